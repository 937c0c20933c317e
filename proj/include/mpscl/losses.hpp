#pragma once

#include <vector>

#include "mpscl/maps.hpp"
#include "mpscl/models.hpp"
#include "mpscl/prototypes.hpp"
#include "mpscl/tensor.hpp"

namespace mpscl {

// Smoothing constant of the soft Dice loss.
inline constexpr double kDiceEps = 1e-5;

// Weighted pixel cross-entropy: -sum_l w[y_l] * log p[l; y_l] / sum_l w[y_l].
// Every pixel must carry exactly one label; weights must be positive and of
// length L. Scale-invariant in the weights by construction.
Tensor weighted_cross_entropy(const PredictionMap& pred, const LabelMap& labels,
                              const std::vector<double>& weights);

// Mean over categories of 1 - (2*intersection + eps) / (|P| + |G| + eps),
// averaged over all L categories including background. An empty-vs-empty
// category contributes 0.
Tensor soft_dice_loss(const PredictionMap& pred, const LabelMap& labels);

// Hybrid per-image segmentation objective: cross-entropy plus Dice.
Tensor segmentation_loss(const PredictionMap& pred, const LabelMap& labels,
                         const std::vector<double>& weights);

// Elementwise -p * log(p) with the 0*log(0) := 0 convention (the clamp sits
// inside the log, so exact zeros and ones map to exactly zero).
SelfInfoMap self_information_map(const PredictionMap& pred);

// Prototype-anchored contrastive objective with an additive angular margin on
// the positive pair. For each assigned pixel with label y and prototype
// cosines r[i]: theta = arccos(r[y]), numerator exp(cos(min(theta+m, pi))/tau),
// denominator the margined positive term plus the unmargined negatives.
// Returns the sum over assigned pixels; an empty assignment yields a constant
// zero. Prototypes act as constants (no gradient into the moving average).
Tensor margin_contrastive_loss(const FeatureMap& features, const LabelMap& labels,
                               const PrototypeSet& protos, double margin, double tau);

// Mean binary cross-entropy of patch scores against the constant domain
// label: 1 for source, 0 for target.
Tensor bce_domain_loss(const Tensor& disc_output, bool target_is_source);

// Discriminator objective: classify source self-information maps as 1 and
// target maps as 0 (per-domain batch means).
Tensor discriminator_loss(const std::vector<SelfInfoMap>& src_maps,
                          const std::vector<SelfInfoMap>& trg_maps,
                          const Discriminator& d);

// Generator adversarial objective: target maps pushed toward the source
// label. Gradients reach the generator through the maps; the discriminator's
// own update never uses them (updates alternate).
Tensor generator_adversarial_loss(const std::vector<SelfInfoMap>& trg_maps,
                                  const Discriminator& d);

// Full generator objective: seg + gamma * c_src + beta * c_trg + lambda * adv.
Tensor total_generator_loss(const Tensor& seg, const Tensor& contrastive_src,
                            const Tensor& contrastive_trg, const Tensor& adversarial,
                            double gamma, double beta, double lambda);

}  // namespace mpscl
