// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Free-field surrogate for training an embedding head: gradient descent of
// a per-pixel embedding field against the discriminative loss, plus the
// central-difference gradient used to check the analytic one.

#ifndef INSTSEG_EMBED_OPT_HPP_
#define INSTSEG_EMBED_OPT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "instseg/core.hpp"
#include "instseg/losses.hpp"

namespace instseg {

enum class Manifold {
  kEuclidean,  // descend in free space, normalize once before clustering
  kSphere,     // tangent step then renormalize every foreground vector
};

std::string to_string(Manifold m);
Manifold manifold_from_string(const std::string& name);

struct OptimizerConfig {
  // Per-pixel step: pixel i of instance c moves by
  //   step_size * C * N_c * dL/dx_i,
  // i.e. gradient descent in the metric that weights each pixel by its
  // share 1/(C N_c) of the loss. Without it a pixel's gradient shrinks with
  // the instance size and no fixed step works across scenes.
  double step_size = 0.1;
  std::size_t max_steps = 500;
  double loss_tolerance = 1e-6;
  std::uint64_t seed = 0;
  double init_scale = 1.0;
  // On the sphere a step that moves any pixel farther than pi is reported
  // as NonFiniteLoss, the same as a non-finite loss in free space.
  Manifold manifold = Manifold::kEuclidean;

  void validate() const;
};

struct OptimizationTrace {
  std::vector<LossBreakdown> steps;
  EmbeddingField final_field;
  std::size_t steps_taken = 0;
};

// Central differences of the total loss, one foreground coordinate at a
// time. Background entries are zero.
GradientField finite_diff_grad(const EmbeddingField& emb,
                               const LabelMap& labels,
                               const DiscriminativeConfig& cfg, double step);

// Every coordinate (background included) is drawn uniformly from
// [-init_scale, init_scale]; on the sphere, foreground vectors are then
// normalized. Each step records the loss at the current field, stops when it
// is <= loss_tolerance, and otherwise updates the field. Throws
// NonFiniteLoss if the loss or the field stops being finite.
OptimizationTrace optimize_embeddings(const LabelMap& labels, std::size_t dim,
                                      const DiscriminativeConfig& loss_cfg,
                                      const OptimizerConfig& opt_cfg);

// Seeded initial field, exactly as optimize_embeddings starts from.
EmbeddingField initial_embeddings(const LabelMap& labels, std::size_t dim,
                                  const OptimizerConfig& opt_cfg);

// Scales every vector to unit norm. Throws DegenerateVector when a norm is
// below 1e-12.
EmbeddingField normalize_field(const EmbeddingField& emb);

// Same, restricted to mask-1 pixels; background vectors are left as they
// are.
EmbeddingField normalize_field(const EmbeddingField& emb,
                               const BinaryMask& foreground);

}  // namespace instseg

#endif  // INSTSEG_EMBED_OPT_HPP_
