#include "mpscl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <utility>

#include "mpscl/error.hpp"

namespace mpscl {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

void check_masks(const ImageU8& a, const ImageU8& b, const char* op) {
  if (a.h != b.h || a.w != b.w) {
    throw ShapeError(std::string(op) + ": mask sizes differ: " + std::to_string(a.h) + "x" +
                     std::to_string(a.w) + " vs " + std::to_string(b.h) + "x" +
                     std::to_string(b.w));
  }
  if (a.v.size() != static_cast<std::size_t>(a.h) * a.w ||
      b.v.size() != static_cast<std::size_t>(b.h) * b.w) {
    throw ShapeError(std::string(op) + ": malformed mask raster");
  }
}

// Pixels of the category region with at least one 4-neighbor outside it.
std::vector<std::pair<int, int>> boundary_pixels(const ImageU8& mask, int category) {
  std::vector<std::pair<int, int>> out;
  const int h = mask.h, w = mask.w;
  auto inside = [&](int y, int x) {
    return y >= 0 && y < h && x >= 0 && x < w &&
           mask.v[static_cast<std::size_t>(y) * w + x] == category;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!inside(y, x)) continue;
      if (!inside(y - 1, x) || !inside(y + 1, x) || !inside(y, x - 1) || !inside(y, x + 1)) {
        out.emplace_back(y, x);
      }
    }
  }
  return out;
}

double directed_mean_distance(const std::vector<std::pair<int, int>>& from,
                              const std::vector<std::pair<int, int>>& to) {
  double acc = 0.0;
  for (const auto& [fy, fx] : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [ty, tx] : to) {
      const double dy = fy - ty, dx = fx - tx;
      best = std::min(best, dy * dy + dx * dx);
    }
    acc += std::sqrt(best);
  }
  return acc / static_cast<double>(from.size());
}

}  // namespace

double dice_coefficient(const ImageU8& pred_mask, const ImageU8& gt_mask, int category) {
  check_masks(pred_mask, gt_mask, "dice_coefficient");
  std::int64_t p = 0, g = 0, inter = 0;
  for (std::size_t i = 0; i < pred_mask.v.size(); ++i) {
    const bool in_p = pred_mask.v[i] == category;
    const bool in_g = gt_mask.v[i] == category;
    p += in_p;
    g += in_g;
    inter += (in_p && in_g);
  }
  if (p + g == 0) return 100.0;
  return 100.0 * 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
}

double asd_2d(const ImageU8& pred_mask, const ImageU8& gt_mask, int category) {
  check_masks(pred_mask, gt_mask, "asd_2d");
  const auto bp = boundary_pixels(pred_mask, category);
  const auto bg = boundary_pixels(gt_mask, category);
  if (bp.empty() || bg.empty()) {
    throw ValueError("asd_2d: undefined surface distance for category " +
                     std::to_string(category) + " (empty mask)");
  }
  return 0.5 * (directed_mean_distance(bp, bg) + directed_mean_distance(bg, bp));
}

std::optional<double> try_asd_2d(const ImageU8& pred_mask, const ImageU8& gt_mask,
                                 int category) {
  const auto bp = boundary_pixels(pred_mask, category);
  const auto bg = boundary_pixels(gt_mask, category);
  if (bp.empty() || bg.empty()) return std::nullopt;
  return 0.5 * (directed_mean_distance(bp, bg) + directed_mean_distance(bg, bp));
}

double AngleHistogram::fraction_below(double angle) const {
  if (total == 0) return 0.0;
  std::int64_t n = 0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (edges[i + 1] <= angle) n += counts[i];
  }
  return static_cast<double>(n) / static_cast<double>(total);
}

void AngleHistogram::merge(const AngleHistogram& other) {
  if (other.total == 0) return;
  if (total == 0) {
    *this = other;
    return;
  }
  if (counts.size() != other.counts.size()) {
    throw ValueError("AngleHistogram: cannot merge histograms with different binning");
  }
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  mean_angle = (mean_angle * static_cast<double>(total) +
                other.mean_angle * static_cast<double>(other.total)) /
               static_cast<double>(total + other.total);
  total += other.total;
}

AngleHistogram angle_histogram(const FeatureMap& features, const LabelMap& labels,
                               const PrototypeSet& protos, int bins) {
  if (bins < 1) throw ValueError("angle_histogram: need at least one bin");
  if (features.h != labels.h || features.w != labels.w) {
    throw ShapeError("angle_histogram: feature/label grid mismatch");
  }
  if (features.dim != protos.dim) {
    throw ShapeError("angle_histogram: feature dim does not match prototypes");
  }
  AngleHistogram hist;
  hist.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) {
    hist.edges[static_cast<std::size_t>(i)] = kPi * i / bins;
  }
  hist.counts.assign(static_cast<std::size_t>(bins), 0);

  const auto idx = labels.indices();
  const auto& f = features.values.data();
  const int d = features.dim;
  double angle_sum = 0.0;
  for (std::size_t l = 0; l < idx.size(); ++l) {
    const std::int32_t cat = idx[l];
    if (cat < 0) continue;
    const double* fp = f.data() + l * static_cast<std::size_t>(d);
    const double* c = protos.category(cat);
    double dot = 0.0, fn = 0.0, cn = 0.0;
    for (int j = 0; j < d; ++j) {
      dot += fp[j] * c[j];
      fn += fp[j] * fp[j];
      cn += c[j] * c[j];
    }
    const double denom = std::sqrt(fn) * std::sqrt(cn);
    if (denom == 0.0) {
      throw ValueError("angle_histogram: zero-norm feature or prototype at pixel " +
                       std::to_string(l));
    }
    const double cosv = std::clamp(dot / denom, -1.0, 1.0);
    const double theta = std::acos(cosv);
    int bin = static_cast<int>(theta / kPi * bins);
    bin = std::min(bin, bins - 1);
    ++hist.counts[static_cast<std::size_t>(bin)];
    angle_sum += theta;
    ++hist.total;
  }
  hist.mean_angle = hist.total ? angle_sum / static_cast<double>(hist.total) : 0.0;
  return hist;
}

EvalReport evaluate_masks(const std::vector<ImageU8>& pred_masks,
                          const std::vector<ImageU8>& gt_masks, int num_categories) {
  if (pred_masks.size() != gt_masks.size() || pred_masks.empty()) {
    throw ValueError("evaluate_masks: need matching, non-empty mask lists");
  }
  EvalReport report;
  report.per_category.resize(static_cast<std::size_t>(num_categories));
  for (int cat = 0; cat < num_categories; ++cat) {
    double dice_acc = 0.0;
    double asd_acc = 0.0;
    std::int64_t asd_n = 0;
    for (std::size_t i = 0; i < pred_masks.size(); ++i) {
      dice_acc += dice_coefficient(pred_masks[i], gt_masks[i], cat);
      const auto a = try_asd_2d(pred_masks[i], gt_masks[i], cat);
      if (a) {
        asd_acc += *a;
        ++asd_n;
      }
    }
    auto& m = report.per_category[static_cast<std::size_t>(cat)];
    m.dice = dice_acc / static_cast<double>(pred_masks.size());
    if (asd_n > 0) m.asd = asd_acc / static_cast<double>(asd_n);
  }
  double fg_dice = 0.0, fg_asd = 0.0;
  std::int64_t fg_asd_n = 0;
  for (int cat = 1; cat < num_categories; ++cat) {
    const auto& m = report.per_category[static_cast<std::size_t>(cat)];
    fg_dice += m.dice;
    if (m.asd) {
      fg_asd += *m.asd;
      ++fg_asd_n;
    }
  }
  report.mean_foreground_dice = fg_dice / static_cast<double>(num_categories - 1);
  if (fg_asd_n > 0) report.mean_foreground_asd = fg_asd / static_cast<double>(fg_asd_n);
  return report;
}

void write_eval_report_csv(const std::string& path, const EvalReport& report) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_eval_report_csv: cannot open " + path);
  f << "category,dice,asd\n";
  char buf[96];
  for (std::size_t cat = 0; cat < report.per_category.size(); ++cat) {
    const auto& m = report.per_category[cat];
    if (m.asd) {
      std::snprintf(buf, sizeof(buf), "%zu,%.4f,%.4f\n", cat, m.dice, *m.asd);
    } else {
      std::snprintf(buf, sizeof(buf), "%zu,%.4f,\n", cat, m.dice);
    }
    f << buf;
  }
  if (report.mean_foreground_asd) {
    std::snprintf(buf, sizeof(buf), "mean_foreground,%.4f,%.4f\n",
                  report.mean_foreground_dice, *report.mean_foreground_asd);
  } else {
    std::snprintf(buf, sizeof(buf), "mean_foreground,%.4f,\n", report.mean_foreground_dice);
  }
  f << buf;
  if (!f) throw IoError("write_eval_report_csv: short write to " + path);
}

void write_angle_histogram_csv(const std::string& path, const AngleHistogram& hist) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_angle_histogram_csv: cannot open " + path);
  f << "bin_start,bin_end,count\n";
  char buf[96];
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.8f,%.8f,%lld\n", hist.edges[i], hist.edges[i + 1],
                  static_cast<long long>(hist.counts[i]));
    f << buf;
  }
  if (!f) throw IoError("write_angle_histogram_csv: short write to " + path);
}

}  // namespace mpscl
