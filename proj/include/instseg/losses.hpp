// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Discriminative embedding loss (pull / push / regularizer) with its
// analytic gradient, Dice and BCE segmentation losses, and the weighted
// combiner used for the per-head and total objectives.

#ifndef INSTSEG_LOSSES_HPP_
#define INSTSEG_LOSSES_HPP_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "instseg/core.hpp"

namespace instseg {

struct DiscriminativeConfig {
  double alpha = 1.0;     // weight of the pull (variance) term
  double beta = 1.0;      // weight of the push (distance) term
  double gamma = 0.001;   // weight of the mean-norm regularizer
  double delta_v = 0.5;   // pull hinge margin
  double delta_d = 1.5;   // push hinge margin; means are pushed to 2*delta_d

  void validate() const;
};

struct LossBreakdown {
  double l_var = 0.0;
  double l_dist = 0.0;
  double l_reg = 0.0;
  double total = 0.0;

  bool operator==(const LossBreakdown&) const = default;
};

struct SegLossConfig {
  double dice_smooth = 1.0;
  double bce_clamp = 1e-7;

  void validate() const;
};

// Named non-negative weights, e.g. {"dice", "bce", "discriminative"}.
class CompositeWeights {
 public:
  CompositeWeights() = default;
  CompositeWeights(std::map<std::string, double> weights);

  const std::map<std::string, double>& weights() const { return weights_; }

 private:
  std::map<std::string, double> weights_;
};

// Instance means mu_1..mu_C over the pixels carrying each ID.
std::vector<std::vector<double>> cluster_means(const EmbeddingField& emb,
                                               const LabelMap& labels);

LossBreakdown discriminative_loss(const EmbeddingField& emb,
                                  const LabelMap& labels,
                                  const DiscriminativeConfig& cfg);

// d(total)/dx_i for every foreground pixel, including the dependence of
// each mean on its members. Background rows are exactly zero. Hinges take
// the flat side at their boundary; d||mu||/dmu is 0 at mu = 0.
GradientField discriminative_grad(const EmbeddingField& emb,
                                  const LabelMap& labels,
                                  const DiscriminativeConfig& cfg);

namespace detail {

// Shared kernel over a raw pixel-major buffer. Writes the gradient into
// `grad` when it is non-empty (same length as `data`). Non-finite inputs
// propagate into the returned values instead of throwing.
LossBreakdown evaluate_discriminative(std::span<const double> data,
                                      std::size_t dim, const LabelMap& labels,
                                      const DiscriminativeConfig& cfg,
                                      std::span<double> grad);

}  // namespace detail

// 1 - (2*sum(p*t) + eps) / (sum(p) + sum(t) + eps)
double dice_loss(const ProbMap& pred, const BinaryMask& target,
                 const SegLossConfig& cfg = {});

// Mean binary cross-entropy with p clamped to [eps, 1 - eps].
double bce_loss(const ProbMap& pred, const BinaryMask& target,
                const SegLossConfig& cfg = {});

// sum_k weight_k * term_k; every weighted key must appear in `terms`.
double composite_loss(const std::map<std::string, double>& terms,
                      const CompositeWeights& weights);

// Drivable-area head: dice + bce + discriminative on the same map.
double drivable_area_loss(const ProbMap& pred, const BinaryMask& target,
                          const EmbeddingField& emb, const LabelMap& labels,
                          const DiscriminativeConfig& disc,
                          const CompositeWeights& weights,
                          const SegLossConfig& seg = {});

// Lane head: dice + bce.
double lane_loss(const ProbMap& pred, const BinaryMask& target,
                 const CompositeWeights& weights,
                 const SegLossConfig& seg = {});

}  // namespace instseg

#endif  // INSTSEG_LOSSES_HPP_
