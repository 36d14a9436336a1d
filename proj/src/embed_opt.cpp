// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "instseg/embed_opt.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

namespace instseg {
namespace {

constexpr double kMinNorm = 1e-12;
constexpr double kMaxSphereStep = M_PI;

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool finite(const LossBreakdown& b) {
  return std::isfinite(b.l_var) && std::isfinite(b.l_dist) &&
         std::isfinite(b.l_reg) && std::isfinite(b.total);
}

void normalize_in_place(std::span<double> v, std::size_t pixel) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double n = std::sqrt(sq);
  if (!(n >= kMinNorm)) {
    throw Error(ErrorKind::kDegenerateVector,
                "vector at pixel " + std::to_string(pixel) +
                    " has near-zero norm");
  }
  for (double& x : v) x /= n;
}

std::vector<double> seeded_values(const LabelMap& labels, std::size_t dim,
                                  const OptimizerConfig& cfg) {
  Rng rng(cfg.seed);
  std::vector<double> x(labels.shape().size() * dim);
  for (double& v : x) v = rng.uniform(-cfg.init_scale, cfg.init_scale);
  if (cfg.manifold == Manifold::kSphere) {
    for (std::size_t p = 0; p < labels.shape().size(); ++p) {
      if (labels[p] != 0) normalize_in_place({&x[p * dim], dim}, p);
    }
  }
  return x;
}

}  // namespace

std::string to_string(Manifold m) {
  return m == Manifold::kSphere ? "sphere" : "euclidean";
}

Manifold manifold_from_string(const std::string& name) {
  if (name == "euclidean") return Manifold::kEuclidean;
  if (name == "sphere") return Manifold::kSphere;
  throw Error(ErrorKind::kInvalidArgument, "unknown manifold '" + name + "'");
}

void OptimizerConfig::validate() const {
  if (!(std::isfinite(step_size) && step_size > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "step_size must be positive");
  }
  if (!(std::isfinite(init_scale) && init_scale > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "init_scale must be positive");
  }
  if (!(std::isfinite(loss_tolerance) && loss_tolerance >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "loss_tolerance must be >= 0");
  }
}

GradientField finite_diff_grad(const EmbeddingField& emb,
                               const LabelMap& labels,
                               const DiscriminativeConfig& cfg, double step) {
  validate_pair(emb, labels);
  cfg.validate();
  if (!(step > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "finite-difference step <= 0");
  }
  const std::size_t dim = emb.dim();
  std::vector<double> x(emb.data().begin(), emb.data().end());
  std::vector<double> grad(x.size(), 0.0);
  auto total = [&] {
    return detail::evaluate_discriminative(x, dim, labels, cfg, {}).total;
  };
  for (std::size_t p = 0; p < emb.pixels(); ++p) {
    if (labels[p] == 0) continue;
    for (std::size_t k = 0; k < dim; ++k) {
      const std::size_t i = p * dim + k;
      const double saved = x[i];
      x[i] = saved + step;
      const double up = total();
      x[i] = saved - step;
      const double down = total();
      x[i] = saved;
      grad[i] = (up - down) / (2.0 * step);
    }
  }
  return GradientField(emb.shape(), dim, std::move(grad));
}

EmbeddingField initial_embeddings(const LabelMap& labels, std::size_t dim,
                                  const OptimizerConfig& opt_cfg) {
  opt_cfg.validate();
  if (dim < 1) throw Error(ErrorKind::kInvalidArgument, "dimension must be >= 1");
  const bool on_sphere = opt_cfg.manifold == Manifold::kSphere;
  const BinaryMask fg = foreground_of(labels);
  return EmbeddingField(labels.shape(), dim,
                        seeded_values(labels, dim, opt_cfg), on_sphere, &fg);
}

OptimizationTrace optimize_embeddings(const LabelMap& labels, std::size_t dim,
                                      const DiscriminativeConfig& loss_cfg,
                                      const OptimizerConfig& opt_cfg) {
  loss_cfg.validate();
  opt_cfg.validate();
  if (dim < 1) throw Error(ErrorKind::kInvalidArgument, "dimension must be >= 1");
  if (labels.num_instances() == 0) {
    throw Error(ErrorKind::kEmptyInstance, "label map has no instances");
  }
  const std::size_t pixels = labels.shape().size();
  const std::size_t num_c = labels.num_instances();
  const bool on_sphere = opt_cfg.manifold == Manifold::kSphere;

  std::vector<std::size_t> count(num_c, 0);
  for (std::size_t p = 0; p < pixels; ++p) {
    if (labels[p] != 0) ++count[static_cast<std::size_t>(labels[p] - 1)];
  }

  std::vector<double> x = seeded_values(labels, dim, opt_cfg);
  std::vector<double> grad(x.size(), 0.0);
  OptimizationTrace trace;

  for (std::size_t step = 0; step < opt_cfg.max_steps; ++step) {
    const LossBreakdown loss =
        detail::evaluate_discriminative(x, dim, labels, loss_cfg, grad);
    if (!finite(loss)) {
      throw Error(ErrorKind::kNonFiniteLoss,
                  "loss became non-finite at step " + std::to_string(step) +
                      "; step_size is too large");
    }
    trace.steps.push_back(loss);
    spdlog::debug("step {} total {:.9g} (var {:.3g} dist {:.3g} reg {:.3g})",
                  step, loss.total, loss.l_var, loss.l_dist, loss.l_reg);
    if (loss.total <= opt_cfg.loss_tolerance) break;

    for (std::size_t p = 0; p < pixels; ++p) {
      if (labels[p] == 0) continue;
      const auto c = static_cast<std::size_t>(labels[p] - 1);
      const double rate = opt_cfg.step_size * static_cast<double>(num_c) *
                          static_cast<double>(count[c]);
      double* xp = &x[p * dim];
      const double* gp = &grad[p * dim];
      if (on_sphere) {
        double radial = 0.0;
        for (std::size_t k = 0; k < dim; ++k) radial += gp[k] * xp[k];
        double length = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
          const double t = rate * (gp[k] - radial * xp[k]);
          length += t * t;
          xp[k] -= t;
        }
        // The loss on the sphere is bounded, so divergence shows up as
        // steps longer than half a great circle instead of an infinite loss.
        if (!(std::sqrt(length) <= kMaxSphereStep)) {
          throw Error(ErrorKind::kNonFiniteLoss,
                      "step " + std::to_string(step) + " moved a pixel " +
                          std::to_string(std::sqrt(length)) +
                          " along the sphere; step_size is too large");
        }
        normalize_in_place({xp, dim}, p);
      } else {
        for (std::size_t k = 0; k < dim; ++k) xp[k] -= rate * gp[k];
      }
    }
    if (!all_finite(x)) {
      throw Error(ErrorKind::kNonFiniteLoss,
                  "embeddings diverged after step " + std::to_string(step) +
                      "; step_size is too large");
    }
  }
  trace.steps_taken = trace.steps.size();
  const BinaryMask fg = foreground_of(labels);
  trace.final_field =
      EmbeddingField(labels.shape(), dim, std::move(x), on_sphere, &fg);
  return trace;
}

EmbeddingField normalize_field(const EmbeddingField& emb) {
  std::vector<double> x(emb.data().begin(), emb.data().end());
  const std::size_t dim = emb.dim();
  for (std::size_t p = 0; p < emb.pixels(); ++p) {
    normalize_in_place({&x[p * dim], dim}, p);
  }
  return EmbeddingField(emb.shape(), dim, std::move(x), true);
}

EmbeddingField normalize_field(const EmbeddingField& emb,
                               const BinaryMask& foreground) {
  validate_pair(emb, foreground);
  std::vector<double> x(emb.data().begin(), emb.data().end());
  const std::size_t dim = emb.dim();
  for (std::size_t p = 0; p < emb.pixels(); ++p) {
    if (foreground[p] == 0) continue;
    normalize_in_place({&x[p * dim], dim}, p);
  }
  return EmbeddingField(emb.shape(), dim, std::move(x), true, &foreground);
}

}  // namespace instseg
