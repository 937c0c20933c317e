#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpscl/image.hpp"
#include "mpscl/maps.hpp"
#include "mpscl/rng.hpp"
#include "mpscl/tensor.hpp"

namespace mpscl {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

struct GeneratorConfig {
  int feature_dim = 32;
  int num_categories = 5;
};

// Segmentation generator: a small conv encoder that emits per-pixel embedding
// features at full input resolution (one 2x pool/upsample pair inside) plus a
// linear per-pixel classifier on top of them.
class Generator {
 public:
  Generator(GeneratorConfig cfg, Rng& init_rng);

  struct Output {
    FeatureMap features;
    PredictionMap pred;
  };

  // image is [1, H, W] with intensities in [0, 1]; H and W must be positive
  // and even. Deterministic given the parameters.
  Output forward(const Tensor& image) const;
  Output forward(const ImageF& image) const;

  std::vector<NamedParam> params();
  std::int64_t param_count() const;
  const GeneratorConfig& config() const { return cfg_; }

  // parameter tensors (leaves)
  Tensor conv1_w, conv1_b;
  Tensor conv2_w, conv2_b;
  Tensor conv3_w, conv3_b;
  Tensor conv4_w, conv4_b;
  Tensor cls_w, cls_b;  // [d, L], [1, L]

 private:
  GeneratorConfig cfg_;
};

// Patch discriminator over self-information maps: three stride-2 convs that
// map [L, H, W] to an [1, H/8, W/8] grid of domain probabilities. Outputs are
// clamped to stay strictly inside (0, 1).
class Discriminator {
 public:
  Discriminator(int num_categories, Rng& init_rng);

  // self_info is [L, H, W]; H and W must be divisible by 8.
  Tensor forward(const Tensor& self_info) const;
  // Convenience: reshapes a [H*W, L] map to [L, H, W] first.
  Tensor forward(const SelfInfoMap& map) const;

  std::vector<NamedParam> params();
  std::int64_t param_count() const;
  int num_categories() const { return num_categories_; }

  Tensor conv1_w, conv1_b;
  Tensor conv2_w, conv2_b;
  Tensor conv3_w, conv3_b;

 private:
  int num_categories_;
};

}  // namespace mpscl
