#include "mpscl/losses.hpp"

#include <cmath>
#include <string>

namespace mpscl {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

void check_grids_match(const char* op, int ph, int pw, int pl, const LabelMap& labels) {
  if (labels.h != ph || labels.w != pw || labels.num_categories != pl) {
    throw ShapeError(std::string(op) + ": prediction grid " + std::to_string(ph) + "x" +
                     std::to_string(pw) + "x" + std::to_string(pl) + " vs label grid " +
                     std::to_string(labels.h) + "x" + std::to_string(labels.w) + "x" +
                     std::to_string(labels.num_categories));
  }
}

}  // namespace

Tensor weighted_cross_entropy(const PredictionMap& pred, const LabelMap& labels,
                              const std::vector<double>& weights) {
  check_grids_match("weighted_cross_entropy", pred.h, pred.w, pred.num_categories, labels);
  const int L = pred.num_categories;
  if (static_cast<int>(weights.size()) != L) {
    throw ValueError("weighted_cross_entropy: expected " + std::to_string(L) +
                     " weights, got " + std::to_string(weights.size()));
  }
  for (int i = 0; i < L; ++i) {
    if (!(weights[static_cast<std::size_t>(i)] > 0.0)) {
      throw ValueError("weighted_cross_entropy: weight for category " + std::to_string(i) +
                       " must be positive");
    }
  }
  const auto idx = labels.indices();
  const std::int64_t p = static_cast<std::int64_t>(idx.size());
  std::vector<double> weighted_onehot(static_cast<std::size_t>(p) * L, 0.0);
  double denom = 0.0;
  for (std::int64_t l = 0; l < p; ++l) {
    const std::int32_t y = idx[static_cast<std::size_t>(l)];
    if (y < 0) {
      throw ValueError("weighted_cross_entropy: pixel " + std::to_string(l) + " has no label");
    }
    const double wy = weights[static_cast<std::size_t>(y)];
    weighted_onehot[static_cast<std::size_t>(l * L + y)] = wy;
    denom += wy;
  }
  Tensor w_onehot = Tensor::from_data({p, L}, std::move(weighted_onehot));
  Tensor logp = log(clamp(pred.probs, kLogEps, 1.0));
  return mul(sum_all(mul(w_onehot, logp)), -1.0 / denom);
}

Tensor soft_dice_loss(const PredictionMap& pred, const LabelMap& labels) {
  check_grids_match("soft_dice_loss", pred.h, pred.w, pred.num_categories, labels);
  const std::int64_t L = pred.num_categories;
  Tensor inter = sum_axis(mul(pred.probs, labels.onehot), 0);  // [1, L]
  Tensor psum = sum_axis(pred.probs, 0);
  Tensor ysum = sum_axis(labels.onehot, 0);  // constant
  Tensor numer = add(mul(inter, 2.0), kDiceEps);
  Tensor denom = add(add(psum, ysum), kDiceEps);
  Tensor terms = sub(Tensor::full({1, L}, 1.0), div(numer, denom));
  return mean_all(terms);
}

Tensor segmentation_loss(const PredictionMap& pred, const LabelMap& labels,
                         const std::vector<double>& weights) {
  return add(weighted_cross_entropy(pred, labels, weights), soft_dice_loss(pred, labels));
}

SelfInfoMap self_information_map(const PredictionMap& pred) {
  Tensor values = neg(mul(pred.probs, log(clamp(pred.probs, kLogEps, 1.0))));
  SelfInfoMap map;
  map.values = std::move(values);
  map.h = pred.h;
  map.w = pred.w;
  map.num_categories = pred.num_categories;
  return map;
}

Tensor margin_contrastive_loss(const FeatureMap& features, const LabelMap& labels,
                               const PrototypeSet& protos, double margin, double tau) {
  if (!(tau > 0.0)) {
    throw ValueError("margin_contrastive_loss: temperature must be positive, got " +
                     std::to_string(tau));
  }
  if (!protos.initialized) {
    throw ValueError("margin_contrastive_loss: prototypes are uninitialized");
  }
  if (features.h != labels.h || features.w != labels.w) {
    throw ShapeError("margin_contrastive_loss: feature grid " + std::to_string(features.h) +
                     "x" + std::to_string(features.w) + " vs label grid " +
                     std::to_string(labels.h) + "x" + std::to_string(labels.w));
  }
  if (features.dim != protos.dim) {
    throw ShapeError("margin_contrastive_loss: feature dim " + std::to_string(features.dim) +
                     " does not match prototype dim " + std::to_string(protos.dim));
  }
  if (labels.num_categories != protos.num_categories) {
    throw ShapeError("margin_contrastive_loss: label categories " +
                     std::to_string(labels.num_categories) + " vs prototypes " +
                     std::to_string(protos.num_categories));
  }

  const int L = protos.num_categories;
  const int d = protos.dim;
  const auto idx = labels.indices();
  std::vector<std::int64_t> rows;
  std::vector<std::int64_t> positive;
  rows.reserve(idx.size());
  for (std::size_t l = 0; l < idx.size(); ++l) {
    if (idx[l] >= 0) {
      rows.push_back(static_cast<std::int64_t>(l));
      positive.push_back(idx[l]);
    }
  }
  if (rows.empty()) return Tensor::scalar(0.0);

  // Prototypes are constants; fold their normalization in up front.
  std::vector<double> proto_unit(static_cast<std::size_t>(L) * d);
  for (int i = 0; i < L; ++i) {
    const double n = protos.norm(i);
    if (n == 0.0) {
      throw ValueError("margin_contrastive_loss: prototype for category " + std::to_string(i) +
                       " has zero norm");
    }
    const double* c = protos.category(i);
    for (int j = 0; j < d; ++j) {
      proto_unit[static_cast<std::size_t>(j) * L + i] = c[j] / n;  // stored transposed [d, L]
    }
  }
  {
    const auto& f = features.values.data();
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double* fp = f.data() + static_cast<std::size_t>(rows[k]) * d;
      double acc = 0.0;
      for (int j = 0; j < d; ++j) acc += fp[j] * fp[j];
      if (acc == 0.0) {
        throw ValueError("margin_contrastive_loss: feature at pixel " +
                         std::to_string(rows[k]) + " has zero norm");
      }
    }
  }

  Tensor proto_t = Tensor::from_data({d, L}, std::move(proto_unit));
  Tensor f_sel = select_rows(features.values, rows);                    // [Q, d]
  Tensor fnorm = sqrt(sum_axis(mul(f_sel, f_sel), 1));                  // [Q, 1]
  Tensor sims = div(matmul(f_sel, proto_t), fnorm);                     // [Q, L]
  Tensor pos = gather_cols(sims, positive);                             // [Q, 1]
  Tensor theta = acos(clamp(pos, -1.0 + kAcosEps, 1.0 - kAcosEps));
  // cos(theta + m), with the angle held at pi once the margin pushes past it
  Tensor cos_margined = cos(clamp(add(theta, margin), -1e300, kPi));
  Tensor exp_all = exp(mul(sims, 1.0 / tau));
  Tensor exp_pos = exp(mul(pos, 1.0 / tau));
  Tensor exp_margined = exp(mul(cos_margined, 1.0 / tau));
  Tensor denom = add(exp_margined, sub(sum_axis(exp_all, 1), exp_pos));  // S[l]
  Tensor per_pixel = sub(log(denom), mul(cos_margined, 1.0 / tau));
  return sum_all(per_pixel);
}

Tensor bce_domain_loss(const Tensor& disc_output, bool target_is_source) {
  if (!disc_output.defined() || disc_output.numel() == 0) {
    throw ValueError("bce_domain_loss: empty discriminator output");
  }
  Tensor p = disc_output;
  if (target_is_source) {
    return neg(mean_all(log(clamp(p, kLogEps, 1.0))));
  }
  return neg(mean_all(log(clamp(sub(Tensor::full(p.shape(), 1.0), p), kLogEps, 1.0))));
}

Tensor discriminator_loss(const std::vector<SelfInfoMap>& src_maps,
                          const std::vector<SelfInfoMap>& trg_maps,
                          const Discriminator& d) {
  if (src_maps.empty() || trg_maps.empty()) {
    throw ValueError("discriminator_loss: empty source or target batch");
  }
  Tensor src_term = Tensor::scalar(0.0);
  for (const auto& m : src_maps) {
    src_term = add(src_term, bce_domain_loss(d.forward(m), true));
  }
  Tensor trg_term = Tensor::scalar(0.0);
  for (const auto& m : trg_maps) {
    trg_term = add(trg_term, bce_domain_loss(d.forward(m), false));
  }
  return add(mul(src_term, 1.0 / static_cast<double>(src_maps.size())),
             mul(trg_term, 1.0 / static_cast<double>(trg_maps.size())));
}

Tensor generator_adversarial_loss(const std::vector<SelfInfoMap>& trg_maps,
                                  const Discriminator& d) {
  if (trg_maps.empty()) {
    throw ValueError("generator_adversarial_loss: empty target batch");
  }
  Tensor acc = Tensor::scalar(0.0);
  for (const auto& m : trg_maps) {
    acc = add(acc, bce_domain_loss(d.forward(m), true));
  }
  return mul(acc, 1.0 / static_cast<double>(trg_maps.size()));
}

Tensor total_generator_loss(const Tensor& seg, const Tensor& contrastive_src,
                            const Tensor& contrastive_trg, const Tensor& adversarial,
                            double gamma, double beta, double lambda) {
  Tensor total = seg;
  if (gamma != 0.0) total = add(total, mul(contrastive_src, gamma));
  if (beta != 0.0) total = add(total, mul(contrastive_trg, beta));
  if (lambda != 0.0) total = add(total, mul(adversarial, lambda));
  return total;
}

}  // namespace mpscl
