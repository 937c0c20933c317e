#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mpscl/checkpoint.hpp"
#include "mpscl/config.hpp"
#include "mpscl/data.hpp"
#include "mpscl/metrics.hpp"
#include "mpscl/models.hpp"
#include "mpscl/optim.hpp"
#include "mpscl/prototypes.hpp"

namespace mpscl {

struct LossRecord {
  double seg = 0.0;
  double contrastive_src = 0.0;
  double contrastive_trg = 0.0;
  double adversarial = 0.0;
  double discriminator = 0.0;
  std::optional<double> val_dice;  // set on evaluation iterations
};

struct AngleStats {
  double mean_angle = 0.0;
  double frac_below_quarter_pi = 0.0;
  std::int64_t pixels = 0;
};

struct TrainResult {
  double best_val_dice = -1.0;
  std::uint64_t best_iteration = 0;
  double final_val_dice = 0.0;
  std::uint64_t iterations = 0;
  bool has_angle_stats = false;
  AngleStats angle_phase2_start;
  AngleStats angle_phase2_end;
  std::string checkpoint_path;
  std::string loss_curve_path;
};

// Two-phase optimization loop: phase 1 trains the generator on the source
// segmentation objective plus the weighted adversarial term while the
// discriminator learns to separate the domains; the prototype bootstrap then
// initializes category anchors from the source training set, and phase 2 adds
// both contrastive terms with per-batch pseudo-label regeneration and
// per-iteration prototype refinement. Validation (target test split, labels
// used for evaluation only) runs every eval_every iterations and the best
// snapshot is kept.
class Trainer {
 public:
  Trainer(TrainConfig cfg, Dataset dataset);

  LossRecord phase1_step(std::uint64_t iteration);
  LossRecord phase2_step(std::uint64_t iteration);
  void bootstrap_prototypes();

  double validate();
  AngleStats target_angle_stats();

  TrainResult train(const Checkpoint* resume = nullptr);

  Checkpoint snapshot(std::uint32_t phase, std::uint64_t iteration,
                      double best_val_dice);
  void restore(const Checkpoint& ckpt);

  Generator& generator() { return g_; }
  Discriminator& discriminator() { return d_; }
  const PrototypeSet& prototypes() const { return protos_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  struct Sample {
    std::size_t row = 0;
    Tensor image;  // [1, H, W]
    ImageU8 mask;  // empty when labels are off-limits
  };

  LossRecord step_impl(std::uint64_t iteration, bool phase2);
  std::vector<std::size_t> draw_batch(Rng& rng, std::size_t pool) const;
  std::vector<double> batch_ce_weights(const std::vector<std::size_t>& batch) const;

  TrainConfig cfg_;
  Dataset dataset_;
  std::vector<Sample> src_train_;
  std::vector<Sample> trg_train_;  // images only
  std::vector<Sample> trg_val_;    // target test split, labels for evaluation
  Generator g_;
  Discriminator d_;
  SgdMomentum g_opt_;
  Adam d_opt_;
  PrototypeSet protos_;
  int h_ = 0;
  int w_ = 0;
};

// Opens cfg.data_dir and runs the full protocol; writes checkpoint.bin and
// loss_curve.csv under cfg.out_dir.
TrainResult train(const TrainConfig& cfg);

// Rehydrates models and prototypes from a checkpoint (for eval and the
// pseudo-label/metric exports).
struct LoadedModels {
  TrainConfig cfg;
  Generator g;
  Discriminator d;
  PrototypeSet protos;
  Checkpoint ckpt;
};
LoadedModels load_models(const std::string& checkpoint_path);

// Argmax category per pixel from a probability map.
ImageU8 argmax_mask(const Tensor& probs, int h, int w);

// Category anchors computed from scratch over the dataset's source training
// split with the given generator (the same construction the trainer uses at
// the phase boundary). Lets tools derive prototypes for checkpoints that were
// taken before the bootstrap.
PrototypeSet init_prototypes_from_source(const Generator& g, const Dataset& dataset,
                                         const TrainConfig& cfg);

}  // namespace mpscl
