#include "mpscl/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mpscl/losses.hpp"
#include "mpscl/pseudo_labels.hpp"

namespace fs = std::filesystem;

namespace mpscl {

namespace {

constexpr std::uint64_t kGenInitStream = 0xA001;
constexpr std::uint64_t kDiscInitStream = 0xA002;
constexpr std::uint64_t kIterStreamBase = 0x17E7000;
constexpr double kQuarterPi = 0.78539816339744830961566084581988;

Generator make_generator(const TrainConfig& cfg) {
  Rng rng(mix_seed(cfg.seed, kGenInitStream));
  return Generator({static_cast<int>(cfg.feature_dim), static_cast<int>(cfg.num_categories)},
                   rng);
}

Discriminator make_discriminator(const TrainConfig& cfg) {
  Rng rng(mix_seed(cfg.seed, kDiscInitStream));
  return Discriminator(static_cast<int>(cfg.num_categories), rng);
}

std::vector<Tensor> tensors_of(std::vector<NamedParam> params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (auto& p : params) out.push_back(std::move(p.tensor));
  return out;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ImageU8 argmax_mask(const Tensor& probs, int h, int w) {
  const std::int64_t p = probs.dim(0), L = probs.dim(1);
  if (p != static_cast<std::int64_t>(h) * w) {
    throw ShapeError("argmax_mask: probability rows do not match the grid");
  }
  const auto& d = probs.data();
  ImageU8 mask;
  mask.h = h;
  mask.w = w;
  mask.v.resize(static_cast<std::size_t>(p));
  for (std::int64_t l = 0; l < p; ++l) {
    const double* row = d.data() + l * L;
    std::int64_t best = 0;
    for (std::int64_t c = 1; c < L; ++c) {
      if (row[c] > row[best]) best = c;
    }
    mask.v[static_cast<std::size_t>(l)] = static_cast<std::uint8_t>(best);
  }
  return mask;
}

Trainer::Trainer(TrainConfig cfg, Dataset dataset)
    : cfg_(std::move(cfg)),
      dataset_(std::move(dataset)),
      g_(make_generator(cfg_)),
      d_(make_discriminator(cfg_)),
      g_opt_(tensors_of(g_.params()), cfg_.g_lr, cfg_.g_momentum, cfg_.g_weight_decay),
      d_opt_(tensors_of(d_.params()), cfg_.d_lr, cfg_.d_beta1, cfg_.d_beta2, cfg_.d_eps) {
  cfg_.validate();
  dataset_.set_target_domain(cfg_.target_domain);

  const auto src_ids = dataset_.select("train", cfg_.source_domain);
  const auto trg_ids = dataset_.select("train", cfg_.target_domain);
  const auto val_ids = dataset_.select("test", cfg_.target_domain);
  if (src_ids.empty() || trg_ids.empty()) {
    throw ValueError("Trainer: dataset has no training rows for domain '" +
                     cfg_.source_domain + "' or '" + cfg_.target_domain + "'");
  }
  if (val_ids.empty()) {
    throw ValueError("Trainer: dataset has no target test rows for validation");
  }

  auto load = [&](std::size_t row, bool with_mask, MaskPurpose purpose) {
    Sample s;
    s.row = row;
    const ImageF img = dataset_.image(row);
    if (h_ == 0) {
      h_ = img.h;
      w_ = img.w;
    } else if (img.h != h_ || img.w != w_) {
      throw ValueError("Trainer: images of mixed sizes in the dataset");
    }
    s.image = Tensor::from_data({1, img.h, img.w}, img.v);
    if (with_mask) {
      s.mask = dataset_.mask(row, purpose);
      for (std::uint8_t v : s.mask.v) {
        if (v >= cfg_.num_categories) {
          throw ValueError("Trainer: mask value " + std::to_string(v) +
                           " exceeds num_categories " + std::to_string(cfg_.num_categories));
        }
      }
    }
    return s;
  };
  for (auto i : src_ids) src_train_.push_back(load(i, true, MaskPurpose::Training));
  for (auto i : trg_ids) trg_train_.push_back(load(i, false, MaskPurpose::Training));
  for (auto i : val_ids) trg_val_.push_back(load(i, true, MaskPurpose::Evaluation));
}

std::vector<std::size_t> Trainer::draw_batch(Rng& rng, std::size_t pool) const {
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(cfg_.batch_size));
  for (std::int64_t i = 0; i < cfg_.batch_size; ++i) {
    out.push_back(static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(pool))));
  }
  return out;
}

std::vector<double> Trainer::batch_ce_weights(const std::vector<std::size_t>& batch) const {
  // Inverse category frequency over the batch, floored at one pixel,
  // normalized to mean 1.
  const int L = static_cast<int>(cfg_.num_categories);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(L), 0);
  for (auto b : batch) {
    for (std::uint8_t v : src_train_[b].mask.v) ++counts[v];
  }
  std::vector<double> w(static_cast<std::size_t>(L));
  double sum = 0.0;
  for (int i = 0; i < L; ++i) {
    w[static_cast<std::size_t>(i)] = 1.0 / static_cast<double>(std::max<std::int64_t>(
                                               1, counts[static_cast<std::size_t>(i)]));
    sum += w[static_cast<std::size_t>(i)];
  }
  for (auto& v : w) v *= static_cast<double>(L) / sum;
  return w;
}

LossRecord Trainer::step_impl(std::uint64_t iteration, bool phase2) {
  if (phase2 && !protos_.initialized) {
    throw ValueError("phase2_step: prototypes are uninitialized; bootstrap first");
  }
  const double gamma = phase2 ? cfg_.gamma : 0.0;
  const double beta = phase2 ? cfg_.beta : 0.0;
  const bool adversarial_on = cfg_.lambda != 0.0;
  const bool needs_pseudo = phase2 && (beta != 0.0 || cfg_.proto_include_target);
  const bool needs_target = adversarial_on || needs_pseudo;

  Rng rng(mix_seed(cfg_.seed, kIterStreamBase + iteration));
  const auto src_batch = draw_batch(rng, src_train_.size());
  const auto trg_batch = draw_batch(rng, trg_train_.size());

  // (1) forward both batches
  std::vector<Generator::Output> src_out;
  std::vector<LabelMap> src_labels;
  for (auto b : src_batch) {
    src_out.push_back(g_.forward(src_train_[b].image));
    src_labels.push_back(LabelMap::ground_truth(src_train_[b].mask,
                                                static_cast<int>(cfg_.num_categories)));
  }
  std::vector<Generator::Output> trg_out;
  if (needs_target) {
    for (auto b : trg_batch) trg_out.push_back(g_.forward(trg_train_[b].image));
  }

  const auto weights = batch_ce_weights(src_batch);
  Tensor seg = Tensor::scalar(0.0);
  for (std::size_t n = 0; n < src_out.size(); ++n) {
    seg = add(seg, segmentation_loss(src_out[n].pred, src_labels[n], weights));
  }

  // (2) pseudo-labels for the target batch from current prototypes
  std::vector<LabelMap> trg_pseudo;
  if (needs_pseudo) {
    for (auto& out : trg_out) {
      auto scores = cosine_scores(out.features, protos_);
      trg_pseudo.push_back(assign_pseudo_labels(scores, cfg_.delta_th, h_, w_).first);
    }
  }

  // (3) total generator objective
  Tensor c_src = Tensor::scalar(0.0);
  if (phase2 && gamma != 0.0) {
    for (std::size_t n = 0; n < src_out.size(); ++n) {
      c_src = add(c_src, margin_contrastive_loss(src_out[n].features, src_labels[n], protos_,
                                                 cfg_.margin, cfg_.tau));
    }
  }
  Tensor c_trg = Tensor::scalar(0.0);
  if (phase2 && beta != 0.0) {
    for (std::size_t n = 0; n < trg_out.size(); ++n) {
      c_trg = add(c_trg, margin_contrastive_loss(trg_out[n].features, trg_pseudo[n], protos_,
                                                 cfg_.margin, cfg_.tau));
    }
  }
  Tensor adv = Tensor::scalar(0.0);
  std::vector<SelfInfoMap> trg_maps_graph;
  if (adversarial_on) {
    for (auto& out : trg_out) {
      trg_maps_graph.push_back(self_information_map(out.pred));
    }
    adv = generator_adversarial_loss(trg_maps_graph, d_);
  }
  Tensor total = total_generator_loss(seg, c_src, c_trg, adv, gamma, beta, cfg_.lambda);

  // (4) generator step
  total.backward();
  g_opt_.step();

  LossRecord rec;
  rec.seg = seg.item();
  rec.contrastive_src = c_src.item();
  rec.contrastive_trg = c_trg.item();
  rec.adversarial = adv.item();

  // (5) discriminator step on the same batch's detached maps
  if (adversarial_on && iteration % static_cast<std::uint64_t>(cfg_.d_every) == 0) {
    std::vector<SelfInfoMap> src_maps, trg_maps;
    for (auto& out : src_out) {
      src_maps.push_back(self_information_map(
          PredictionMap::from_probs(out.pred.probs.detach(), h_, w_)));
    }
    for (auto& out : trg_out) {
      trg_maps.push_back(self_information_map(
          PredictionMap::from_probs(out.pred.probs.detach(), h_, w_)));
    }
    Tensor d_loss = discriminator_loss(src_maps, trg_maps, d_);
    d_loss.backward();
    d_opt_.step();
    rec.discriminator = d_loss.item();
  }

  // (6) prototype refinement from the batch features
  if (phase2) {
    std::vector<FeatureMap> feats;
    std::vector<LabelMap> labels;
    for (std::size_t n = 0; n < src_out.size(); ++n) {
      feats.push_back(src_out[n].features);
      labels.push_back(src_labels[n]);
    }
    if (cfg_.proto_include_target) {
      for (std::size_t n = 0; n < trg_out.size(); ++n) {
        feats.push_back(trg_out[n].features);
        labels.push_back(trg_pseudo[n]);
      }
    }
    protos_ = refine_prototypes(std::move(protos_), feats, labels);
  }

  if (!std::isfinite(rec.seg) || !std::isfinite(rec.contrastive_src) ||
      !std::isfinite(rec.contrastive_trg) || !std::isfinite(rec.adversarial) ||
      !std::isfinite(rec.discriminator)) {
    std::string dump = "iteration " + std::to_string(iteration) +
                       ": non-finite loss (seg=" + std::to_string(rec.seg) +
                       ", c_src=" + std::to_string(rec.contrastive_src) +
                       ", c_trg=" + std::to_string(rec.contrastive_trg) +
                       ", adv=" + std::to_string(rec.adversarial) +
                       ", d=" + std::to_string(rec.discriminator) + "); source rows:";
    for (auto b : src_batch) dump += " " + dataset_.row(src_train_[b].row).image_path;
    dump += "; target rows:";
    for (auto b : trg_batch) dump += " " + dataset_.row(trg_train_[b].row).image_path;
    throw NumericalError(dump);
  }
  return rec;
}

LossRecord Trainer::phase1_step(std::uint64_t iteration) { return step_impl(iteration, false); }

LossRecord Trainer::phase2_step(std::uint64_t iteration) { return step_impl(iteration, true); }

void Trainer::bootstrap_prototypes() {
  NoGradGuard no_grad;
  CategoryMeanAccumulator acc(static_cast<int>(cfg_.num_categories),
                              static_cast<int>(cfg_.feature_dim));
  for (const auto& s : src_train_) {
    const auto out = g_.forward(s.image);
    acc.add(out.features,
            LabelMap::ground_truth(s.mask, static_cast<int>(cfg_.num_categories)));
  }
  protos_ = init_prototypes(acc, cfg_.alpha);
}

PrototypeSet init_prototypes_from_source(const Generator& g, const Dataset& dataset,
                                         const TrainConfig& cfg) {
  NoGradGuard no_grad;
  const auto ids = dataset.select("train", cfg.source_domain);
  if (ids.empty()) {
    throw ValueError("init_prototypes_from_source: no source training rows in the dataset");
  }
  CategoryMeanAccumulator acc(static_cast<int>(cfg.num_categories),
                              static_cast<int>(cfg.feature_dim));
  for (auto i : ids) {
    const ImageF img = dataset.image(i);
    const auto out = g.forward(img);
    acc.add(out.features, LabelMap::ground_truth(dataset.mask(i, MaskPurpose::Training),
                                                 static_cast<int>(cfg.num_categories)));
  }
  return init_prototypes(acc, cfg.alpha);
}

double Trainer::validate() {
  NoGradGuard no_grad;
  std::vector<ImageU8> preds, gts;
  preds.reserve(trg_val_.size());
  gts.reserve(trg_val_.size());
  for (const auto& s : trg_val_) {
    const auto out = g_.forward(s.image);
    preds.push_back(argmax_mask(out.pred.probs, h_, w_));
    gts.push_back(s.mask);
  }
  return evaluate_masks(preds, gts, static_cast<int>(cfg_.num_categories))
      .mean_foreground_dice;
}

AngleStats Trainer::target_angle_stats() {
  if (!protos_.initialized) {
    throw ValueError("target_angle_stats: prototypes are uninitialized");
  }
  NoGradGuard no_grad;
  AngleHistogram merged;
  for (const auto& s : trg_val_) {
    const auto out = g_.forward(s.image);
    const auto labels =
        LabelMap::ground_truth(s.mask, static_cast<int>(cfg_.num_categories));
    merged.merge(angle_histogram(out.features, labels, protos_,
                                 static_cast<int>(cfg_.hist_bins)));
  }
  AngleStats stats;
  stats.mean_angle = merged.mean_angle;
  stats.frac_below_quarter_pi = merged.fraction_below(kQuarterPi);
  stats.pixels = merged.total;
  return stats;
}

Checkpoint Trainer::snapshot(std::uint32_t phase, std::uint64_t iteration,
                             double best_val_dice) {
  Checkpoint ckpt;
  ckpt.phase = phase;
  ckpt.iteration = iteration;
  ckpt.best_val_dice = best_val_dice;
  ckpt.config_text = config_to_text(cfg_);
  ckpt.has_prototypes = protos_.initialized;
  if (protos_.initialized) ckpt.prototypes = protos_;

  auto add_params = [&](std::vector<NamedParam> params) {
    for (auto& p : params) {
      ckpt.tensors.push_back({p.name, p.tensor.shape(), p.tensor.data()});
    }
  };
  add_params(g_.params());
  add_params(d_.params());
  const auto g_named = g_.params();
  for (std::size_t i = 0; i < g_named.size(); ++i) {
    ckpt.tensors.push_back({"opt.g.v." + g_named[i].name, g_named[i].tensor.shape(),
                            g_opt_.velocity()[i]});
  }
  const auto d_named = d_.params();
  for (std::size_t i = 0; i < d_named.size(); ++i) {
    ckpt.tensors.push_back({"opt.d.m." + d_named[i].name, d_named[i].tensor.shape(),
                            d_opt_.first_moment()[i]});
    ckpt.tensors.push_back({"opt.d.v." + d_named[i].name, d_named[i].tensor.shape(),
                            d_opt_.second_moment()[i]});
  }
  ckpt.tensors.push_back(
      {"opt.d.t", {1}, {static_cast<double>(d_opt_.step_count())}});
  return ckpt;
}

void Trainer::restore(const Checkpoint& ckpt) {
  auto restore_param = [&](NamedParam p) {
    const NamedTensor* t = ckpt.find(p.name);
    if (!t) throw ValueError("restore: checkpoint lacks tensor '" + p.name + "'");
    if (t->shape != p.tensor.shape()) {
      throw ShapeError("restore: tensor '" + p.name + "' has shape " + shape_str(t->shape) +
                       ", model expects " + shape_str(p.tensor.shape()));
    }
    p.tensor.mut_data() = t->values;
  };
  for (auto& p : g_.params()) restore_param(p);
  for (auto& p : d_.params()) restore_param(p);
  const auto g_named = g_.params();
  for (std::size_t i = 0; i < g_named.size(); ++i) {
    const NamedTensor* t = ckpt.find("opt.g.v." + g_named[i].name);
    if (t) g_opt_.velocity()[i] = t->values;
  }
  const auto d_named = d_.params();
  for (std::size_t i = 0; i < d_named.size(); ++i) {
    const NamedTensor* m = ckpt.find("opt.d.m." + d_named[i].name);
    const NamedTensor* v = ckpt.find("opt.d.v." + d_named[i].name);
    if (m) d_opt_.first_moment()[i] = m->values;
    if (v) d_opt_.second_moment()[i] = v->values;
  }
  if (const NamedTensor* t = ckpt.find("opt.d.t")) {
    d_opt_.set_step_count(static_cast<std::uint64_t>(t->values.at(0)));
  }
  if (ckpt.has_prototypes) {
    protos_ = ckpt.prototypes;
  } else {
    protos_ = PrototypeSet{};
  }
}

TrainResult Trainer::train(const Checkpoint* resume) {
  const std::uint64_t phase1 = static_cast<std::uint64_t>(cfg_.phase1_iters);
  const std::uint64_t total = phase1 + static_cast<std::uint64_t>(cfg_.phase2_iters);
  std::uint64_t start = 1;
  double best_dice = -1.0;
  std::uint64_t best_iter = 0;
  if (resume) {
    restore(*resume);
    start = resume->iteration + 1;
    best_dice = resume->best_val_dice;
    if (start > phase1 + 1 && !protos_.initialized) {
      throw ValueError("train: resuming inside phase 2 requires prototypes in the checkpoint");
    }
  }

  fs::create_directories(cfg_.out_dir);
  const std::string curve_path = (fs::path(cfg_.out_dir) / "loss_curve.csv").string();
  const std::string ckpt_path = (fs::path(cfg_.out_dir) / "checkpoint.bin").string();
  std::ofstream curve(curve_path, std::ios::binary);
  if (!curve) throw IoError("train: cannot open " + curve_path);
  curve << "iteration,seg,c_src,c_trg,adv,d,val_dice\n";

  TrainResult result;
  Checkpoint best_snapshot;
  bool have_best = false;
  double last_dice = 0.0;

  for (std::uint64_t iter = start; iter <= total; ++iter) {
    const bool phase2 = iter > phase1;
    if (phase2 && !protos_.initialized) {
      // phase boundary: initialize anchors from the current source features
      bootstrap_prototypes();
      result.angle_phase2_start = target_angle_stats();
      result.has_angle_stats = true;
    }
    const LossRecord rec = phase2 ? phase2_step(iter) : phase1_step(iter);

    std::optional<double> dice;
    if (iter % static_cast<std::uint64_t>(cfg_.eval_every) == 0 || iter == total) {
      dice = validate();
      last_dice = *dice;
      if (*dice > best_dice) {
        best_dice = *dice;
        best_iter = iter;
        best_snapshot = snapshot(phase2 ? 2 : 1, iter, best_dice);
        have_best = true;
      }
    }

    curve << iter << ',' << fmt17(rec.seg) << ',' << fmt17(rec.contrastive_src) << ','
          << fmt17(rec.contrastive_trg) << ',' << fmt17(rec.adversarial) << ','
          << fmt17(rec.discriminator) << ',';
    if (dice) curve << fmt17(*dice);
    curve << '\n';
  }
  curve.close();
  if (!curve) throw IoError("train: short write to " + curve_path);

  if (cfg_.phase2_iters > 0 && protos_.initialized) {
    result.angle_phase2_end = target_angle_stats();
  }
  if (!have_best) {
    // No evaluation ran (zero iterations after resume); snapshot the final state.
    best_dice = last_dice;
    best_iter = total;
    best_snapshot = snapshot(total > phase1 ? 2 : 1, total, best_dice);
  }
  save_checkpoint(ckpt_path, best_snapshot);

  result.best_val_dice = best_dice;
  result.best_iteration = best_iter;
  result.final_val_dice = last_dice;
  result.iterations = total;
  result.checkpoint_path = ckpt_path;
  result.loss_curve_path = curve_path;
  return result;
}

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.data_dir.empty()) throw ValueError("train: data_dir is not set");
  Dataset ds = Dataset::open(cfg.data_dir);
  Trainer trainer(cfg, std::move(ds));
  return trainer.train();
}

LoadedModels load_models(const std::string& checkpoint_path) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  TrainConfig cfg = config_from_text(ckpt.config_text);
  Rng g_rng(mix_seed(cfg.seed, kGenInitStream));
  Rng d_rng(mix_seed(cfg.seed, kDiscInitStream));
  Generator g({static_cast<int>(cfg.feature_dim), static_cast<int>(cfg.num_categories)}, g_rng);
  Discriminator d(static_cast<int>(cfg.num_categories), d_rng);
  auto restore_param = [&](NamedParam p) {
    const NamedTensor* t = ckpt.find(p.name);
    if (!t) throw ValueError("load_models: checkpoint lacks tensor '" + p.name + "'");
    if (t->shape != p.tensor.shape()) {
      throw ShapeError("load_models: tensor '" + p.name + "' shape mismatch");
    }
    p.tensor.mut_data() = t->values;
  };
  for (auto& p : g.params()) restore_param(p);
  for (auto& p : d.params()) restore_param(p);
  LoadedModels lm{std::move(cfg), std::move(g), std::move(d), ckpt.prototypes,
                  std::move(ckpt)};
  if (!lm.ckpt.has_prototypes) lm.protos = PrototypeSet{};
  return lm;
}

}  // namespace mpscl
