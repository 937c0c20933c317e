#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mpscl/image.hpp"
#include "mpscl/maps.hpp"
#include "mpscl/prototypes.hpp"

namespace mpscl {

// Overlap in percent: 100 * 2|P^G| / (|P| + |G|); both-empty convention 100.
double dice_coefficient(const ImageU8& pred_mask, const ImageU8& gt_mask, int category);

// 2-D average symmetric surface distance in pixels. Boundaries are mask
// pixels with at least one 4-neighbor outside the mask (image borders count
// as outside); the result is the mean of the two directed average
// nearest-boundary distances. Throws ValueError when either mask is empty
// for the category ("undefined surface distance").
double asd_2d(const ImageU8& pred_mask, const ImageU8& gt_mask, int category);

// asd_2d wrapped for report assembly: empty-mask categories come back as
// nullopt instead of an error.
std::optional<double> try_asd_2d(const ImageU8& pred_mask, const ImageU8& gt_mask,
                                 int category);

struct AngleHistogram {
  std::vector<double> edges;        // bins+1 edges spanning [0, pi]
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;
  double mean_angle = 0.0;

  double fraction_below(double angle) const;
  void merge(const AngleHistogram& other);
};

// Distribution of the angle between each assigned pixel feature and its own
// category prototype, binned over [0, pi].
AngleHistogram angle_histogram(const FeatureMap& features, const LabelMap& labels,
                               const PrototypeSet& protos, int bins);

struct CategoryMetrics {
  double dice = 0.0;               // percent
  std::optional<double> asd;       // pixels; absent when undefined
};

struct EvalReport {
  std::vector<CategoryMetrics> per_category;   // length L
  double mean_foreground_dice = 0.0;
  std::optional<double> mean_foreground_asd;   // over categories with defined ASD
};

// Per-image metrics averaged over an image set (foreground categories are
// 1..L-1). ASD values undefined for an image are excluded from that
// category's average.
EvalReport evaluate_masks(const std::vector<ImageU8>& pred_masks,
                          const std::vector<ImageU8>& gt_masks, int num_categories);

void write_eval_report_csv(const std::string& path, const EvalReport& report);
void write_angle_histogram_csv(const std::string& path, const AngleHistogram& hist);

}  // namespace mpscl
