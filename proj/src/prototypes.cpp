#include "mpscl/prototypes.hpp"

#include <cmath>
#include <string>

namespace mpscl {

double PrototypeSet::norm(int i) const {
  const double* c = category(i);
  double acc = 0.0;
  for (int j = 0; j < dim; ++j) acc += c[j] * c[j];
  return std::sqrt(acc);
}

CategoryMeanAccumulator::CategoryMeanAccumulator(int num_categories, int dim)
    : num_categories_(num_categories),
      dim_(dim),
      sums_(static_cast<std::size_t>(num_categories) * dim, 0.0),
      counts_(static_cast<std::size_t>(num_categories), 0) {}

void CategoryMeanAccumulator::add(const FeatureMap& features, const LabelMap& labels) {
  if (features.dim != dim_) {
    throw ShapeError("CategoryMeanAccumulator: feature dim " + std::to_string(features.dim) +
                     " does not match accumulator dim " + std::to_string(dim_));
  }
  if (labels.num_categories != num_categories_) {
    throw ShapeError("CategoryMeanAccumulator: label categories " +
                     std::to_string(labels.num_categories) + " do not match " +
                     std::to_string(num_categories_));
  }
  if (features.h != labels.h || features.w != labels.w) {
    throw ShapeError("CategoryMeanAccumulator: feature grid " + std::to_string(features.h) +
                     "x" + std::to_string(features.w) + " vs label grid " +
                     std::to_string(labels.h) + "x" + std::to_string(labels.w));
  }
  const auto idx = labels.indices();
  const auto& f = features.values.data();
  for (std::size_t p = 0; p < idx.size(); ++p) {
    const std::int32_t cat = idx[p];
    if (cat < 0) continue;
    double* s = sums_.data() + static_cast<std::size_t>(cat) * dim_;
    const double* fp = f.data() + p * static_cast<std::size_t>(dim_);
    for (int j = 0; j < dim_; ++j) s[j] += fp[j];
    ++counts_[static_cast<std::size_t>(cat)];
  }
}

std::vector<double> CategoryMeanAccumulator::mean(int category) const {
  const std::int64_t n = counts_[static_cast<std::size_t>(category)];
  if (n == 0) {
    throw ValueError("CategoryMeanAccumulator: category " + std::to_string(category) +
                     " has no pixels; mean undefined");
  }
  std::vector<double> out(static_cast<std::size_t>(dim_));
  const double* s = sums_.data() + static_cast<std::size_t>(category) * dim_;
  for (int j = 0; j < dim_; ++j) out[static_cast<std::size_t>(j)] = s[j] / static_cast<double>(n);
  return out;
}

PrototypeSet init_prototypes(const CategoryMeanAccumulator& acc, double momentum) {
  if (momentum < 0.0 || momentum > 1.0) {
    throw ValueError("init_prototypes: momentum must lie in [0,1]");
  }
  const int num_categories = acc.num_categories();
  const int dim = acc.dim();
  std::string empties;
  for (int i = 0; i < num_categories; ++i) {
    if (acc.count(i) == 0) {
      if (!empties.empty()) empties += ", ";
      empties += std::to_string(i);
    }
  }
  if (!empties.empty()) {
    throw ValueError("init_prototypes: categories with no labeled pixels: " + empties);
  }
  PrototypeSet protos;
  protos.num_categories = num_categories;
  protos.dim = dim;
  protos.momentum = momentum;
  protos.iteration = 0;
  protos.initialized = true;
  protos.vectors.resize(static_cast<std::size_t>(num_categories) * dim);
  for (int i = 0; i < num_categories; ++i) {
    const auto m = acc.mean(i);
    std::copy(m.begin(), m.end(), protos.vectors.begin() + static_cast<std::size_t>(i) * dim);
  }
  return protos;
}

PrototypeSet init_prototypes(const std::vector<FeatureMap>& features,
                             const std::vector<LabelMap>& labels,
                             double momentum) {
  if (features.empty() || features.size() != labels.size()) {
    throw ValueError("init_prototypes: need matching, non-empty feature and label lists");
  }
  CategoryMeanAccumulator acc(labels.front().num_categories, features.front().dim);
  for (std::size_t i = 0; i < features.size(); ++i) acc.add(features[i], labels[i]);
  return init_prototypes(acc, momentum);
}

PrototypeSet refine_prototypes(PrototypeSet protos,
                               const std::vector<FeatureMap>& batch_features,
                               const std::vector<LabelMap>& batch_labels) {
  if (!protos.initialized) {
    throw ValueError("refine_prototypes: prototypes are uninitialized");
  }
  if (protos.momentum < 0.0 || protos.momentum > 1.0) {
    throw ValueError("refine_prototypes: momentum must lie in [0,1]");
  }
  if (batch_features.size() != batch_labels.size()) {
    throw ValueError("refine_prototypes: feature/label batch size mismatch");
  }
  CategoryMeanAccumulator acc(protos.num_categories, protos.dim);
  for (std::size_t i = 0; i < batch_features.size(); ++i) {
    acc.add(batch_features[i], batch_labels[i]);
  }
  const double a = protos.momentum;
  for (int i = 0; i < protos.num_categories; ++i) {
    if (acc.count(i) == 0) continue;  // absent category keeps its prototype
    const auto m = acc.mean(i);
    double* c = protos.vectors.data() + static_cast<std::size_t>(i) * protos.dim;
    for (int j = 0; j < protos.dim; ++j) {
      c[j] = a * c[j] + (1.0 - a) * m[static_cast<std::size_t>(j)];
    }
  }
  protos.iteration += 1;
  return protos;
}

Tensor cosine_scores(const FeatureMap& features, const PrototypeSet& protos) {
  if (!protos.initialized) {
    throw ValueError("cosine_scores: prototypes are uninitialized");
  }
  if (features.dim != protos.dim) {
    throw ShapeError("cosine_scores: feature dim " + std::to_string(features.dim) +
                     " does not match prototype dim " + std::to_string(protos.dim));
  }
  const int L = protos.num_categories;
  const int d = protos.dim;
  std::vector<double> pnorm(static_cast<std::size_t>(L));
  for (int i = 0; i < L; ++i) {
    const double n = protos.norm(i);
    if (n == 0.0) {
      throw ValueError("cosine_scores: prototype for category " + std::to_string(i) +
                       " has zero norm");
    }
    pnorm[static_cast<std::size_t>(i)] = n;
  }
  const auto& f = features.values.data();
  const std::int64_t p = features.values.dim(0);
  std::vector<double> out(static_cast<std::size_t>(p * L));
  for (std::int64_t l = 0; l < p; ++l) {
    const double* fp = f.data() + static_cast<std::size_t>(l) * d;
    double fn = 0.0;
    for (int j = 0; j < d; ++j) fn += fp[j] * fp[j];
    fn = std::sqrt(fn);
    if (fn == 0.0) {
      throw ValueError("cosine_scores: feature at pixel " + std::to_string(l) +
                       " has zero norm");
    }
    for (int i = 0; i < L; ++i) {
      const double* c = protos.category(i);
      double dot = 0.0;
      for (int j = 0; j < d; ++j) dot += c[j] * fp[j];
      out[static_cast<std::size_t>(l * L + i)] = dot / (pnorm[static_cast<std::size_t>(i)] * fn);
    }
  }
  return Tensor::from_data({p, L}, std::move(out));
}

}  // namespace mpscl
