#pragma once

#include <cstdint>
#include <vector>

#include "mpscl/image.hpp"
#include "mpscl/tensor.hpp"

namespace mpscl {

// Numeric-stability epsilon: every log argument is clamped below at this
// value (cross-entropy, self-information, binary cross-entropy).
inline constexpr double kLogEps = 1e-7;
// Inputs to acos are kept strictly inside (-1, 1) by this margin so the
// derivative stays finite.
inline constexpr double kAcosEps = 1e-7;

// Per-pixel class probabilities of one image, flattened to [H*W, L].
struct PredictionMap {
  Tensor logits;  // [P, L]
  Tensor probs;   // [P, L], softmax of logits
  int h = 0;
  int w = 0;
  int num_categories = 0;

  static PredictionMap from_logits(Tensor logits, int h, int w);
  // Wraps probabilities produced elsewhere (tests, detached copies).
  static PredictionMap from_probs(Tensor probs, int h, int w);
  // Checks the row-stochastic invariant; throws ValueError on violation.
  void validate() const;
};

// Per-pixel one-hot category assignment, [H*W, L]. Rows may be all-zero
// (unassigned) only for pseudo-labels.
struct LabelMap {
  enum class Kind { GroundTruth, Pseudo };

  Tensor onehot;  // [P, L], constant (never carries gradients)
  Kind kind = Kind::GroundTruth;
  int h = 0;
  int w = 0;
  int num_categories = 0;

  static LabelMap ground_truth(const ImageU8& mask, int num_categories);
  static LabelMap from_onehot(Tensor onehot, int h, int w, Kind kind);

  // Category index per pixel; -1 where unassigned.
  std::vector<std::int32_t> indices() const;
  std::int64_t assigned_count() const;
  void validate() const;
};

// Per-pixel embedding grid, flattened to [H*W, d].
struct FeatureMap {
  Tensor values;  // [P, d]
  int h = 0;
  int w = 0;
  int dim = 0;

  static FeatureMap wrap(Tensor values, int h, int w);
};

// Per-pixel, per-class -p*log(p) tensor fed to the domain discriminator.
struct SelfInfoMap {
  Tensor values;  // [P, L]
  int h = 0;
  int w = 0;
  int num_categories = 0;
};

}  // namespace mpscl
