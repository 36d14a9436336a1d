// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "instseg/losses.hpp"

#include <algorithm>
#include <cmath>

namespace instseg {
namespace {

bool finite_non_negative(double v) { return std::isfinite(v) && v >= 0.0; }

double norm(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

void require_instances(const LabelMap& labels) {
  if (labels.num_instances() == 0) {
    throw Error(ErrorKind::kEmptyInstance, "label map has no instances");
  }
}

}  // namespace

void DiscriminativeConfig::validate() const {
  if (!finite_non_negative(alpha) || !finite_non_negative(beta) ||
      !finite_non_negative(gamma) || !finite_non_negative(delta_v) ||
      !finite_non_negative(delta_d)) {
    throw Error(ErrorKind::kInvalidArgument,
                "discriminative loss parameters must be finite and >= 0");
  }
  if (delta_d <= 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "delta_d must be positive");
  }
}

void SegLossConfig::validate() const {
  if (!finite_non_negative(dice_smooth)) {
    throw Error(ErrorKind::kInvalidArgument, "dice_smooth must be >= 0");
  }
  if (!(bce_clamp > 0.0 && bce_clamp < 0.5)) {
    throw Error(ErrorKind::kInvalidArgument, "bce_clamp must be in (0, 0.5)");
  }
}

CompositeWeights::CompositeWeights(std::map<std::string, double> weights)
    : weights_(std::move(weights)) {
  for (const auto& [name, w] : weights_) {
    if (!finite_non_negative(w)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "weight '" + name + "' must be finite and >= 0");
    }
  }
}

namespace detail {

LossBreakdown evaluate_discriminative(std::span<const double> data,
                                      std::size_t dim, const LabelMap& labels,
                                      const DiscriminativeConfig& cfg,
                                      std::span<double> grad) {
  require_instances(labels);
  const std::size_t num_c = labels.num_instances();
  const std::size_t pixels = labels.shape().size();
  const bool want_grad = !grad.empty();

  std::vector<double> mu(num_c * dim, 0.0);
  std::vector<std::size_t> count(num_c, 0);
  for (std::size_t p = 0; p < pixels; ++p) {
    const std::int32_t id = labels[p];
    if (id == 0) continue;
    const std::size_t c = static_cast<std::size_t>(id - 1);
    ++count[c];
    for (std::size_t k = 0; k < dim; ++k) mu[c * dim + k] += data[p * dim + k];
  }
  for (std::size_t c = 0; c < num_c; ++c) {
    for (std::size_t k = 0; k < dim; ++k) {
      mu[c * dim + k] /= static_cast<double>(count[c]);
    }
  }

  // Gradient with respect to each mean, later spread over its members.
  std::vector<double> mu_grad(want_grad ? num_c * dim : 0, 0.0);
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);

  const double inv_c = 1.0 / static_cast<double>(num_c);
  LossBreakdown out;

  // Pull term.
  std::vector<double> var_sum(num_c, 0.0);
  for (std::size_t p = 0; p < pixels; ++p) {
    const std::int32_t id = labels[p];
    if (id == 0) continue;
    const std::size_t c = static_cast<std::size_t>(id - 1);
    const double* x = &data[p * dim];
    const double* m = &mu[c * dim];
    double sq = 0.0;
    for (std::size_t k = 0; k < dim; ++k) sq += (x[k] - m[k]) * (x[k] - m[k]);
    const double dist = std::sqrt(sq);
    const double hinge = dist - cfg.delta_v;
    if (!(hinge > 0.0)) continue;
    var_sum[c] += hinge * hinge;
    if (!want_grad) continue;
    const double scale = cfg.alpha * 2.0 * hinge /
                         (dist * static_cast<double>(count[c])) * inv_c;
    for (std::size_t k = 0; k < dim; ++k) {
      const double g = scale * (x[k] - m[k]);
      grad[p * dim + k] += g;
      mu_grad[c * dim + k] -= g;
    }
  }
  for (std::size_t c = 0; c < num_c; ++c) {
    out.l_var += var_sum[c] / static_cast<double>(count[c]);
  }
  out.l_var *= inv_c;

  // Push term over ordered pairs.
  if (num_c > 1) {
    const double pair_norm =
        1.0 / (static_cast<double>(num_c) * static_cast<double>(num_c - 1));
    for (std::size_t a = 0; a < num_c; ++a) {
      for (std::size_t b = 0; b < num_c; ++b) {
        if (a == b) continue;
        double sq = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
          const double d = mu[a * dim + k] - mu[b * dim + k];
          sq += d * d;
        }
        const double dist = std::sqrt(sq);
        const double hinge = 2.0 * cfg.delta_d - dist;
        if (!(hinge > 0.0)) continue;
        out.l_dist += hinge * hinge;
        if (!want_grad || dist == 0.0) continue;
        // d/dmu_a of hinge^2; the (b, a) pair supplies the mirrored term.
        const double scale = -cfg.beta * 2.0 * hinge / dist * pair_norm;
        for (std::size_t k = 0; k < dim; ++k) {
          const double g = scale * (mu[a * dim + k] - mu[b * dim + k]);
          mu_grad[a * dim + k] += g;
          mu_grad[b * dim + k] -= g;
        }
      }
    }
    out.l_dist *= pair_norm;
  }

  // Regularizer.
  for (std::size_t c = 0; c < num_c; ++c) {
    const double n = norm({&mu[c * dim], dim});
    out.l_reg += n;
    if (!want_grad || n == 0.0) continue;
    for (std::size_t k = 0; k < dim; ++k) {
      mu_grad[c * dim + k] += cfg.gamma * inv_c * mu[c * dim + k] / n;
    }
  }
  out.l_reg *= inv_c;

  out.total = cfg.alpha * out.l_var + cfg.beta * out.l_dist +
              cfg.gamma * out.l_reg;

  if (want_grad) {
    for (std::size_t p = 0; p < pixels; ++p) {
      const std::int32_t id = labels[p];
      if (id == 0) continue;
      const std::size_t c = static_cast<std::size_t>(id - 1);
      const double inv_n = 1.0 / static_cast<double>(count[c]);
      for (std::size_t k = 0; k < dim; ++k) {
        grad[p * dim + k] += mu_grad[c * dim + k] * inv_n;
      }
    }
  }
  return out;
}

}  // namespace detail

std::vector<std::vector<double>> cluster_means(const EmbeddingField& emb,
                                               const LabelMap& labels) {
  validate_pair(emb, labels);
  require_instances(labels);
  const std::size_t dim = emb.dim();
  std::vector<std::vector<double>> mu(labels.num_instances(),
                                      std::vector<double>(dim, 0.0));
  std::vector<std::size_t> count(labels.num_instances(), 0);
  for (std::size_t p = 0; p < emb.pixels(); ++p) {
    if (labels[p] == 0) continue;
    const auto c = static_cast<std::size_t>(labels[p] - 1);
    ++count[c];
    const auto x = emb.at(p);
    for (std::size_t k = 0; k < dim; ++k) mu[c][k] += x[k];
  }
  for (std::size_t c = 0; c < mu.size(); ++c) {
    if (count[c] == 0) {
      throw Error(ErrorKind::kEmptyInstance,
                  "instance " + std::to_string(c + 1) + " has no pixels");
    }
    for (double& v : mu[c]) v /= static_cast<double>(count[c]);
  }
  return mu;
}

LossBreakdown discriminative_loss(const EmbeddingField& emb,
                                  const LabelMap& labels,
                                  const DiscriminativeConfig& cfg) {
  validate_pair(emb, labels);
  cfg.validate();
  return detail::evaluate_discriminative(emb.data(), emb.dim(), labels, cfg,
                                         {});
}

GradientField discriminative_grad(const EmbeddingField& emb,
                                  const LabelMap& labels,
                                  const DiscriminativeConfig& cfg) {
  validate_pair(emb, labels);
  cfg.validate();
  std::vector<double> grad(emb.data().size(), 0.0);
  detail::evaluate_discriminative(emb.data(), emb.dim(), labels, cfg, grad);
  return GradientField(emb.shape(), emb.dim(), std::move(grad));
}

double dice_loss(const ProbMap& pred, const BinaryMask& target,
                 const SegLossConfig& cfg) {
  validate_pair(pred, target);
  cfg.validate();
  double inter = 0.0;
  double sum_p = 0.0;
  double sum_t = 0.0;
  for (std::size_t i = 0; i < pred.shape().size(); ++i) {
    inter += pred[i] * target[i];
    sum_p += pred[i];
    sum_t += target[i];
  }
  const double denom = sum_p + sum_t + cfg.dice_smooth;
  if (denom == 0.0) return 0.0;  // empty vs empty without smoothing
  return 1.0 - (2.0 * inter + cfg.dice_smooth) / denom;
}

double bce_loss(const ProbMap& pred, const BinaryMask& target,
                const SegLossConfig& cfg) {
  validate_pair(pred, target);
  cfg.validate();
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.shape().size(); ++i) {
    const double p = std::clamp(pred[i], cfg.bce_clamp, 1.0 - cfg.bce_clamp);
    sum -= target[i] != 0 ? std::log(p) : std::log(1.0 - p);
  }
  return sum / static_cast<double>(pred.shape().size());
}

double composite_loss(const std::map<std::string, double>& terms,
                      const CompositeWeights& weights) {
  double total = 0.0;
  for (const auto& [name, w] : weights.weights()) {
    const auto it = terms.find(name);
    if (it == terms.end()) {
      throw Error(ErrorKind::kMissingTerm, "missing loss term '" + name + "'");
    }
    total += w * it->second;
  }
  return total;
}

double drivable_area_loss(const ProbMap& pred, const BinaryMask& target,
                          const EmbeddingField& emb, const LabelMap& labels,
                          const DiscriminativeConfig& disc,
                          const CompositeWeights& weights,
                          const SegLossConfig& seg) {
  return composite_loss({{"dice", dice_loss(pred, target, seg)},
                         {"bce", bce_loss(pred, target, seg)},
                         {"discriminative",
                          discriminative_loss(emb, labels, disc).total}},
                        weights);
}

double lane_loss(const ProbMap& pred, const BinaryMask& target,
                 const CompositeWeights& weights, const SegLossConfig& seg) {
  return composite_loss({{"dice", dice_loss(pred, target, seg)},
                         {"bce", bce_loss(pred, target, seg)}},
                        weights);
}

}  // namespace instseg
