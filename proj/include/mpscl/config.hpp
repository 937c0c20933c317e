#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace mpscl {

// All training hyperparameters. Every field maps one-to-one to a config-file
// key and to a CLI flag of the same name; precedence is flag > file > default.
struct TrainConfig {
  // method hyperparameters
  double alpha = 0.2;        // prototype momentum
  double delta_th = 0.25;    // pseudo-label confidence-difference threshold
  double margin = 0.4;       // angular margin on the positive pair
  double tau = 1.0;          // contrastive temperature
  double gamma = 1.0;        // weight of the source contrastive term
  double beta = 0.1;         // weight of the target contrastive term
  double lambda = 0.003;     // weight of the adversarial term

  // generator optimizer (SGD with momentum)
  double g_lr = 2.5e-4;
  double g_momentum = 0.9;
  double g_weight_decay = 1e-4;

  // discriminator optimizer (Adam)
  double d_lr = 1e-4;
  double d_beta1 = 0.9;
  double d_beta2 = 0.999;
  double d_eps = 1e-8;

  // schedule
  std::int64_t phase1_iters = 500;
  std::int64_t phase2_iters = 1500;
  std::int64_t batch_size = 4;
  std::int64_t eval_every = 50;
  std::int64_t d_every = 1;  // discriminator update cadence (every k-th iteration)
  std::uint64_t seed = 0;

  // model / data
  std::int64_t feature_dim = 32;
  std::int64_t num_categories = 5;
  std::string source_domain = "A";
  std::string target_domain = "B";
  bool proto_include_target = false;  // add pseudo-labeled target pixels to refinement
  std::int64_t hist_bins = 30;

  // paths
  std::string data_dir;
  std::string out_dir = ".";

  void validate() const;
};

// Parses a flat key=value file ('#' starts a comment, blank lines ignored).
// Unknown keys are hard errors.
std::map<std::string, std::string> parse_config_file(const std::string& path);

// Applies key/value overrides onto a config. Unknown keys or unparsable
// values are hard errors.
void apply_config_overrides(TrainConfig& cfg,
                            const std::map<std::string, std::string>& kv);

// Canonical serialization (sorted keys, one per line) used for checkpoint
// snapshots; parseable by apply_config_overrides.
std::string config_to_text(const TrainConfig& cfg);
TrainConfig config_from_text(const std::string& text);

// True when `key` names a TrainConfig field.
bool is_config_key(const std::string& key);

}  // namespace mpscl
