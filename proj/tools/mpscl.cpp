// Command-line front end: data generation, training, evaluation and the
// pseudo-label / metric exports, wired for reproducible runs (all randomness
// flows from --seed; no wall-clock anywhere).
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpscl/config.hpp"
#include "mpscl/data.hpp"
#include "mpscl/error.hpp"
#include "mpscl/losses.hpp"
#include "mpscl/metrics.hpp"
#include "mpscl/pgm.hpp"
#include "mpscl/pseudo_labels.hpp"
#include "mpscl/training.hpp"

namespace fs = std::filesystem;
using namespace mpscl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitNumerical = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const char* kGlobalUsage = R"(usage: mpscl <command> [flags]

commands:
  gen-data        generate the synthetic two-domain dataset
  train           run the two-phase adaptation training loop
  eval            evaluate a checkpoint (Dice / ASD report)
  pseudo-labels   export per-image pseudo-label maps as PGM
  export-metrics  write eval_report.csv and angle_hist.csv

Run 'mpscl <command> --help' for the command's flags.
)";

const char* kGenDataUsage = R"(usage: mpscl gen-data --out DIR --scenes N [--seed S] [--size H W]

Writes N scenes (two domains each) as PGM files plus manifest.csv. The first
ceil(5N/6) scenes form the train split, the rest the test split. Rerunning
with the same flags reproduces identical bytes.
)";

const char* kTrainUsage = R"(usage: mpscl train --config PATH [--<key> value ...]

Runs phase 1 (segmentation + adversarial), the prototype bootstrap, and
phase 2 (full objective with pseudo-labels). Writes checkpoint.bin and
loss_curve.csv under out_dir. Every config-file key can be overridden by a
flag of the same name; precedence: flag > config file > built-in default.
Exits 3 on a non-finite loss.
)";

const char* kEvalUsage = R"(usage: mpscl eval --checkpoint PATH --data DIR [--split test]
                  [--domain D] [--out DIR]

Prints per-category Dice (percent) and ASD (pixels) for the chosen split and
domain (default: the checkpoint's target domain) and writes eval_report.csv.
)";

const char* kPseudoLabelsUsage = R"(usage: mpscl pseudo-labels --checkpoint PATH --data DIR --out DIR
                           [--split test] [--delta_th X]

For every target image of the split writes four PGM maps: the predicted
category map (_pred), the top-2 confidence difference (_conf), the selection
mask (_mask, white = selected) and the final pseudo-label map (_plabel,
0 = unassigned).
)";

const char* kExportMetricsUsage = R"(usage: mpscl export-metrics --checkpoint PATH --data DIR --out DIR
                            [--split test] [--bins N] [--labels gt|pseudo]

Writes eval_report.csv (category, dice, asd) and angle_hist.csv (bin_start,
bin_end, count) for the target domain of the split. The angle histogram uses
ground-truth labels by default; --labels pseudo switches to the checkpoint's
self-paced assignment.
)";

// Flat flag parser: every flag takes `arity` values; unknown flags are hard
// errors; --help prints the command usage and exits 0.
class Flags {
 public:
  Flags(int argc, char** argv, int start, const char* usage,
        std::map<std::string, int> arity)
      : usage_(usage) {
    for (int i = start; i < argc; ++i) {
      const std::string flag = argv[i];
      if (flag == "--help" || flag == "-h") {
        std::cout << usage;
        std::exit(kExitOk);
      }
      auto it = arity.find(flag);
      if (it == arity.end()) {
        throw UsageError("unknown flag '" + flag + "'");
      }
      std::vector<std::string> values;
      for (int k = 0; k < it->second; ++k) {
        if (++i >= argc) throw UsageError("flag '" + flag + "' is missing a value");
        values.emplace_back(argv[i]);
      }
      values_[flag.substr(2)] = std::move(values);
    }
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get(const std::string& key, const std::string& fallback = "") const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second.at(0);
  }

  std::string require(const std::string& key) const {
    if (!has(key)) throw UsageError("missing required flag '--" + key + "'");
    return values_.at(key).at(0);
  }

  const std::vector<std::string>& get_all(const std::string& key) const {
    return values_.at(key);
  }

  const std::map<std::string, std::vector<std::string>>& all() const { return values_; }

 private:
  const char* usage_;
  std::map<std::string, std::vector<std::string>> values_;
};

long parse_long(const std::string& flag, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw UsageError("flag '--" + flag + "' expects an integer, got '" + v + "'");
  }
}

double parse_double_flag(const std::string& flag, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw UsageError("flag '--" + flag + "' expects a number, got '" + v + "'");
  }
}

int cmd_gen_data(int argc, char** argv) {
  Flags flags(argc, argv, 2, kGenDataUsage,
              {{"--out", 1}, {"--scenes", 1}, {"--seed", 1}, {"--size", 2}});
  const std::string out = flags.require("out");
  const long scenes = parse_long("scenes", flags.require("scenes"));
  if (scenes < 0) throw UsageError("--scenes must be non-negative");
  const long seed = flags.has("seed") ? parse_long("seed", flags.get("seed")) : 0;
  int h = 64, w = 64;
  if (flags.has("size")) {
    h = static_cast<int>(parse_long("size", flags.get_all("size")[0]));
    w = static_cast<int>(parse_long("size", flags.get_all("size")[1]));
  }
  const auto rows = write_dataset(out, static_cast<int>(scenes),
                                  static_cast<std::uint64_t>(seed), h, w);
  std::cout << "wrote " << rows.size() << " samples (" << scenes << " scenes) to " << out
            << "\n";
  return kExitOk;
}

int cmd_train(int argc, char** argv) {
  // --config plus one flag per config key
  std::map<std::string, int> arity{{"--config", 1}};
  for (const auto& line : {"alpha", "delta_th", "margin", "tau", "gamma", "beta", "lambda",
                           "g_lr", "g_momentum", "g_weight_decay", "d_lr", "d_beta1",
                           "d_beta2", "d_eps", "phase1_iters", "phase2_iters", "batch_size",
                           "eval_every", "d_every", "seed", "feature_dim", "num_categories",
                           "source_domain", "target_domain", "proto_include_target",
                           "hist_bins", "data_dir", "out_dir"}) {
    arity["--" + std::string(line)] = 1;
  }
  Flags flags(argc, argv, 2, kTrainUsage, arity);
  if (!flags.has("config")) {
    throw UsageError("missing required flag '--config'");
  }
  TrainConfig cfg;
  try {
    apply_config_overrides(cfg, parse_config_file(flags.get("config")));
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
  std::map<std::string, std::string> overrides;
  for (const auto& [key, values] : flags.all()) {
    if (key == "config") continue;
    overrides[key] = values.at(0);
  }
  apply_config_overrides(cfg, overrides);
  cfg.validate();
  if (cfg.data_dir.empty()) throw UsageError("config key 'data_dir' is not set");

  const TrainResult result = train(cfg);
  std::printf("iterations:      %llu\n", static_cast<unsigned long long>(result.iterations));
  std::printf("best val dice:   %.2f (iteration %llu)\n", result.best_val_dice,
              static_cast<unsigned long long>(result.best_iteration));
  std::printf("final val dice:  %.2f\n", result.final_val_dice);
  if (result.has_angle_stats) {
    std::printf("target angle:    %.4f rad -> %.4f rad (mean over phase 2)\n",
                result.angle_phase2_start.mean_angle, result.angle_phase2_end.mean_angle);
    std::printf("angle < pi/4:    %.3f -> %.3f\n",
                result.angle_phase2_start.frac_below_quarter_pi,
                result.angle_phase2_end.frac_below_quarter_pi);
  }
  std::printf("checkpoint:      %s\n", result.checkpoint_path.c_str());
  std::printf("loss curve:      %s\n", result.loss_curve_path.c_str());
  return kExitOk;
}

int cmd_eval(int argc, char** argv) {
  Flags flags(argc, argv, 2, kEvalUsage,
              {{"--checkpoint", 1}, {"--data", 1}, {"--split", 1}, {"--domain", 1}, {"--out", 1}});
  LoadedModels lm = load_models(flags.require("checkpoint"));
  Dataset ds = Dataset::open(flags.require("data"));
  ds.set_target_domain(lm.cfg.target_domain);
  const std::string split = flags.get("split", "test");
  const std::string domain = flags.get("domain", lm.cfg.target_domain);
  const std::string out_dir = flags.get("out", ".");

  const auto ids = ds.select(split, domain);
  if (ids.empty()) {
    throw ValueError("eval: no rows for split '" + split + "' domain '" + domain + "'");
  }
  NoGradGuard no_grad;
  std::vector<ImageU8> preds, gts;
  int h = 0, w = 0;
  for (auto i : ids) {
    const ImageF img = ds.image(i);
    h = img.h;
    w = img.w;
    const auto out = lm.g.forward(img);
    preds.push_back(argmax_mask(out.pred.probs, h, w));
    gts.push_back(ds.mask(i, MaskPurpose::Evaluation));
  }
  const EvalReport report = evaluate_masks(preds, gts, static_cast<int>(lm.cfg.num_categories));

  std::printf("%-16s %10s %10s\n", "category", "dice", "asd_px");
  for (std::size_t cat = 0; cat < report.per_category.size(); ++cat) {
    const auto& m = report.per_category[cat];
    if (m.asd) {
      std::printf("%-16zu %10.2f %10.2f\n", cat, m.dice, *m.asd);
    } else {
      std::printf("%-16zu %10.2f %10s\n", cat, m.dice, "-");
    }
  }
  if (report.mean_foreground_asd) {
    std::printf("%-16s %10.2f %10.2f\n", "mean_foreground", report.mean_foreground_dice,
                *report.mean_foreground_asd);
  } else {
    std::printf("%-16s %10.2f %10s\n", "mean_foreground", report.mean_foreground_dice, "-");
  }
  std::printf("checkpoint best val dice: %.2f\n", lm.ckpt.best_val_dice);

  fs::create_directories(out_dir);
  write_eval_report_csv((fs::path(out_dir) / "eval_report.csv").string(), report);
  return kExitOk;
}

ImageU8 scale_category_map(const std::vector<std::uint8_t>& cats, int h, int w, int L) {
  ImageU8 img{h, w, std::vector<std::uint8_t>(cats.size())};
  for (std::size_t i = 0; i < cats.size(); ++i) {
    img.v[i] = static_cast<std::uint8_t>((cats[i] * 255) / (L - 1));
  }
  return img;
}

int cmd_pseudo_labels(int argc, char** argv) {
  Flags flags(argc, argv, 2, kPseudoLabelsUsage,
              {{"--checkpoint", 1}, {"--data", 1}, {"--out", 1}, {"--split", 1}, {"--delta_th", 1}});
  LoadedModels lm = load_models(flags.require("checkpoint"));
  Dataset ds = Dataset::open(flags.require("data"));
  ds.set_target_domain(lm.cfg.target_domain);
  if (!lm.ckpt.has_prototypes) {
    // pre-bootstrap checkpoint: derive the anchors from the source split
    lm.protos = init_prototypes_from_source(lm.g, ds, lm.cfg);
  }
  const std::string out_dir = flags.require("out");
  const std::string split = flags.get("split", "test");
  const double delta = flags.has("delta_th")
                           ? parse_double_flag("delta_th", flags.get("delta_th"))
                           : lm.cfg.delta_th;
  const int L = static_cast<int>(lm.cfg.num_categories);

  const auto ids = ds.select(split, lm.cfg.target_domain);
  if (ids.empty()) throw ValueError("pseudo-labels: no target rows in split '" + split + "'");
  fs::create_directories(out_dir);

  NoGradGuard no_grad;
  std::size_t written = 0;
  for (auto i : ids) {
    const ImageF img = ds.image(i);
    const auto out = lm.g.forward(img);
    const Tensor scores = cosine_scores(out.features, lm.protos);
    const auto [labels, report] = assign_pseudo_labels(scores, delta, img.h, img.w);

    const std::size_t pixels = report.top_index.size();
    std::vector<std::uint8_t> pred_cats(pixels);
    for (std::size_t p = 0; p < pixels; ++p) {
      pred_cats[p] = static_cast<std::uint8_t>(report.top_index[p]);
    }
    ImageU16 conf{img.h, img.w, std::vector<std::uint16_t>(pixels)};
    for (std::size_t p = 0; p < pixels; ++p) {
      const double r = std::min(std::max(report.confidence_diff[p], 0.0), 2.0);
      conf.v[p] = static_cast<std::uint16_t>(r / 2.0 * 65535.0 + 0.5);
    }
    ImageU8 sel{img.h, img.w, std::vector<std::uint8_t>(pixels)};
    for (std::size_t p = 0; p < pixels; ++p) sel.v[p] = report.selected[p] ? 255 : 0;
    const auto lab = labels.indices();
    ImageU8 plabel{img.h, img.w, std::vector<std::uint8_t>(pixels, 0)};
    for (std::size_t p = 0; p < pixels; ++p) {
      if (lab[p] >= 0) plabel.v[p] = static_cast<std::uint8_t>(((lab[p] + 1) * 255) / L);
    }

    const std::string stem = fs::path(ds.row(i).image_path).stem().string();
    write_pgm((fs::path(out_dir) / (stem + "_pred.pgm")).string(),
              scale_category_map(pred_cats, img.h, img.w, L));
    write_pgm((fs::path(out_dir) / (stem + "_conf.pgm")).string(), conf);
    write_pgm((fs::path(out_dir) / (stem + "_mask.pgm")).string(), sel);
    write_pgm((fs::path(out_dir) / (stem + "_plabel.pgm")).string(), plabel);
    written += 4;
  }
  std::cout << "wrote " << written << " maps for " << ids.size() << " target images to "
            << out_dir << "\n";
  return kExitOk;
}

int cmd_export_metrics(int argc, char** argv) {
  Flags flags(argc, argv, 2, kExportMetricsUsage,
              {{"--checkpoint", 1}, {"--data", 1}, {"--out", 1}, {"--split", 1}, {"--bins", 1},
               {"--labels", 1}});
  LoadedModels lm = load_models(flags.require("checkpoint"));
  Dataset ds = Dataset::open(flags.require("data"));
  ds.set_target_domain(lm.cfg.target_domain);
  const std::string out_dir = flags.require("out");
  const std::string split = flags.get("split", "test");
  const int bins = flags.has("bins")
                       ? static_cast<int>(parse_long("bins", flags.get("bins")))
                       : static_cast<int>(lm.cfg.hist_bins);
  const std::string label_mode = flags.get("labels", "gt");
  if (label_mode != "gt" && label_mode != "pseudo") {
    throw UsageError("--labels expects 'gt' or 'pseudo'");
  }
  if (!lm.ckpt.has_prototypes) {
    lm.protos = init_prototypes_from_source(lm.g, ds, lm.cfg);
  }
  const auto ids = ds.select(split, lm.cfg.target_domain);
  if (ids.empty()) throw ValueError("export-metrics: no target rows in split '" + split + "'");

  NoGradGuard no_grad;
  std::vector<ImageU8> preds, gts;
  AngleHistogram hist;
  for (auto i : ids) {
    const ImageF img = ds.image(i);
    const auto out = lm.g.forward(img);
    preds.push_back(argmax_mask(out.pred.probs, img.h, img.w));
    gts.push_back(ds.mask(i, MaskPurpose::Evaluation));
    LabelMap labels =
        label_mode == "gt"
            ? LabelMap::ground_truth(gts.back(), static_cast<int>(lm.cfg.num_categories))
            : assign_pseudo_labels(cosine_scores(out.features, lm.protos), lm.cfg.delta_th,
                                   img.h, img.w)
                  .first;
    hist.merge(angle_histogram(out.features, labels, lm.protos, bins));
  }
  const EvalReport report = evaluate_masks(preds, gts, static_cast<int>(lm.cfg.num_categories));

  fs::create_directories(out_dir);
  write_eval_report_csv((fs::path(out_dir) / "eval_report.csv").string(), report);
  write_angle_histogram_csv((fs::path(out_dir) / "angle_hist.csv").string(), hist);
  std::printf("mean foreground dice: %.2f, mean target angle: %.4f rad over %lld pixels\n",
              report.mean_foreground_dice, hist.mean_angle,
              static_cast<long long>(hist.total));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << kGlobalUsage;
    return kExitUsage;
  }
  const std::string cmd = argv[1];
  try {
    if (cmd == "--help" || cmd == "-h" || cmd == "help") {
      std::cout << kGlobalUsage;
      return kExitOk;
    }
    if (cmd == "gen-data") return cmd_gen_data(argc, argv);
    if (cmd == "train") return cmd_train(argc, argv);
    if (cmd == "eval") return cmd_eval(argc, argv);
    if (cmd == "pseudo-labels") return cmd_pseudo_labels(argc, argv);
    if (cmd == "export-metrics") return cmd_export_metrics(argc, argv);
    std::cerr << "mpscl: unknown command '" << cmd << "'\n" << kGlobalUsage;
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "mpscl " << cmd << ": " << e.what() << "\n";
    if (cmd == "gen-data") std::cerr << kGenDataUsage;
    else if (cmd == "train") std::cerr << kTrainUsage;
    else if (cmd == "eval") std::cerr << kEvalUsage;
    else if (cmd == "pseudo-labels") std::cerr << kPseudoLabelsUsage;
    else if (cmd == "export-metrics") std::cerr << kExportMetricsUsage;
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "mpscl " << cmd << ": numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "mpscl " << cmd << ": " << e.what() << "\n";
    return kExitRuntime;
  }
}
