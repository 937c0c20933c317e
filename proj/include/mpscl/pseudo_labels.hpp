#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mpscl/maps.hpp"
#include "mpscl/tensor.hpp"

namespace mpscl {

// Per-pixel diagnostics of the self-paced selection: the best / second-best
// prototype indices, the confidence difference between them, and the final
// selection mask. second_index is the lowest index among equal runner-ups.
struct ConfidenceReport {
  std::vector<std::int32_t> top_index;
  std::vector<std::int32_t> second_index;
  std::vector<double> confidence_diff;  // r[I1] - r[I2], always >= 0
  std::vector<std::uint8_t> selected;
};

// Self-paced pseudo-label assignment from prototype cosine scores. A pixel
// receives a one-hot label at its argmax iff the argmax is unique and the
// top-two confidence difference strictly exceeds delta_th; otherwise the row
// stays all-zero. A tied maximum has confidence difference 0 and is never
// assigned, including for negative thresholds where the argmax itself is
// ill-defined.
std::pair<LabelMap, ConfidenceReport> assign_pseudo_labels(const Tensor& scores,
                                                           double delta_th,
                                                           int h, int w);

}  // namespace mpscl
