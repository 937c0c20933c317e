#include "mpscl/pseudo_labels.hpp"

#include <string>

namespace mpscl {

std::pair<LabelMap, ConfidenceReport> assign_pseudo_labels(const Tensor& scores,
                                                           double delta_th,
                                                           int h, int w) {
  if (scores.rank() != 2) {
    throw ShapeError("assign_pseudo_labels: scores expect [P,L], got " +
                     shape_str(scores.shape()));
  }
  const std::int64_t p = scores.dim(0);
  const std::int64_t L = scores.dim(1);
  if (L < 2) {
    throw ValueError("assign_pseudo_labels: need at least 2 categories, got " +
                     std::to_string(L) + " (submaximum undefined)");
  }
  if (p != static_cast<std::int64_t>(h) * w) {
    throw ShapeError("assign_pseudo_labels: " + std::to_string(p) + " rows do not match " +
                     std::to_string(h) + "x" + std::to_string(w));
  }

  const auto& r = scores.data();
  ConfidenceReport report;
  report.top_index.resize(static_cast<std::size_t>(p));
  report.second_index.resize(static_cast<std::size_t>(p));
  report.confidence_diff.resize(static_cast<std::size_t>(p));
  report.selected.resize(static_cast<std::size_t>(p));
  std::vector<double> onehot(static_cast<std::size_t>(p * L), 0.0);

  for (std::int64_t l = 0; l < p; ++l) {
    const double* row = r.data() + l * L;
    std::int64_t i1 = 0;
    for (std::int64_t i = 1; i < L; ++i) {
      if (row[i] > row[i1]) i1 = i;
    }
    std::int64_t i2 = (i1 == 0) ? 1 : 0;
    bool tie = false;
    for (std::int64_t i = 0; i < L; ++i) {
      if (i == i1) continue;
      if (row[i] == row[i1]) tie = true;
      if (row[i] > row[i2]) i2 = i;
    }
    const double diff = row[i1] - row[i2];
    const bool assign = !tie && diff > delta_th;
    report.top_index[static_cast<std::size_t>(l)] = static_cast<std::int32_t>(i1);
    report.second_index[static_cast<std::size_t>(l)] = static_cast<std::int32_t>(i2);
    report.confidence_diff[static_cast<std::size_t>(l)] = diff;
    report.selected[static_cast<std::size_t>(l)] = assign ? 1 : 0;
    if (assign) onehot[static_cast<std::size_t>(l * L + i1)] = 1.0;
  }

  LabelMap labels = LabelMap::from_onehot(Tensor::from_data({p, L}, std::move(onehot)),
                                          h, w, LabelMap::Kind::Pseudo);
  return {std::move(labels), std::move(report)};
}

}  // namespace mpscl
