#pragma once

#include <cstdint>
#include <vector>

#include "mpscl/maps.hpp"
#include "mpscl/tensor.hpp"

namespace mpscl {

// The L category anchor vectors, maintained as momentum-smoothed means of
// labeled pixel features. Treated as constants by every loss: no gradient
// flows into the moving average.
struct PrototypeSet {
  int num_categories = 0;
  int dim = 0;
  std::vector<double> vectors;  // [L, d] row-major
  std::uint64_t iteration = 0;
  double momentum = 0.2;
  bool initialized = false;

  const double* category(int i) const { return vectors.data() + static_cast<std::size_t>(i) * dim; }
  double norm(int i) const;
};

// Streaming accumulator of per-category feature sums; shared by prototype
// initialization and refinement so both use the same mean.
class CategoryMeanAccumulator {
 public:
  CategoryMeanAccumulator(int num_categories, int dim);
  void add(const FeatureMap& features, const LabelMap& labels);
  int num_categories() const { return num_categories_; }
  int dim() const { return dim_; }
  std::int64_t count(int category) const { return counts_[static_cast<std::size_t>(category)]; }
  // Mean feature of one category; undefined (throws) when the count is zero.
  std::vector<double> mean(int category) const;

 private:
  int num_categories_;
  int dim_;
  std::vector<double> sums_;
  std::vector<std::int64_t> counts_;
};

// Prototype i starts as the mean of every labeled pixel feature of category i
// across the initialization set. Errors if any category has no pixels.
PrototypeSet init_prototypes(const std::vector<FeatureMap>& features,
                             const std::vector<LabelMap>& labels,
                             double momentum = 0.2);
PrototypeSet init_prototypes(const CategoryMeanAccumulator& acc, double momentum = 0.2);

// One momentum step toward the batch means: for categories present in the
// batch, c_i <- momentum * c_i + (1 - momentum) * batch_mean_i. Absent
// categories are left unchanged. The iteration counter advances by one.
PrototypeSet refine_prototypes(PrototypeSet protos,
                               const std::vector<FeatureMap>& batch_features,
                               const std::vector<LabelMap>& batch_labels);

// Cosine similarity r[l,i] between each pixel feature and each prototype,
// as a plain [H*W, L] tensor (no gradient tracking). Errors on a zero-norm
// feature (naming the pixel) or prototype (naming the category).
Tensor cosine_scores(const FeatureMap& features, const PrototypeSet& protos);

}  // namespace mpscl
