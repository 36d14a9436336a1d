// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// von Mises-Fisher mean-shift on the unit hypersphere. Seeds climb the
// kernel density (1/n) sum_j exp(kappa x_j^T x) by the normalized weighted
// mean update; converged seeds are merged into modes and every foreground
// point is assigned to its angularly nearest mode. The number of clusters
// is an output, never an input.

#ifndef INSTSEG_VMF_CLUSTER_HPP_
#define INSTSEG_VMF_CLUSTER_HPP_

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "instseg/core.hpp"

namespace instseg {

struct VmfConfig {
  double kappa = 10.0;
  std::size_t max_iters = 100;
  double shift_tolerance = 1e-4;   // radians
  double merge_tolerance = 0.1;    // radians
  std::size_t seed_stride = 4;
  std::size_t min_cluster_pixels = 16;
  // Iterates seeds on worker threads; output is identical to sequential.
  bool parallel = false;

  void validate() const;
};

// n x D row-major matrix of unit vectors.
class PointMatrix {
 public:
  PointMatrix() = default;
  PointMatrix(std::size_t dim, std::vector<double> data);

  std::size_t rows() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<const double> data() const { return data_; }

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

struct FlattenedField {
  PointMatrix points;
  std::vector<std::size_t> pixel_of_row;  // row -> row-major pixel index
  Shape shape;
};

struct ModeSet {
  std::vector<std::vector<double>> modes;  // descending basin population
  std::vector<std::size_t> basin_sizes;    // seeds merged into each mode
  std::size_t dropped_seeds = 0;           // DegenerateShift seeds
};

struct ClusterResult {
  std::vector<std::vector<double>> modes;
  Grid2D<std::int32_t> assignment;  // -1 background/unassigned
  std::size_t num_clusters = 0;
  std::vector<std::size_t> populations;  // pixels per cluster
};

FlattenedField flatten_foreground(const EmbeddingField& emb,
                                  const BinaryMask& mask);

// Inverse of flatten_foreground: background pixels are zero vectors.
VectorField scatter_rows(const FlattenedField& flat);

// One mean-shift update. Weights are exp(kappa (x_j^T x - max_j x_j^T x)),
// the same ratio with no overflow. Throws DegenerateShift when the weighted
// sum is shorter than 1e-12 times the total weight.
std::vector<double> vmf_shift_step(const PointMatrix& points,
                                   std::span<const double> x, double kappa);

// Kernel density scaled by exp(-kappa) so that it lies in (0, 1].
double vmf_density(const PointMatrix& points, std::span<const double> x,
                   double kappa);

// Called with (seed row, iteration, iterate) for every iterate, including
// the starting point at iteration 0.
using IterateObserver =
    std::function<void(std::size_t, std::size_t, std::span<const double>)>;

ModeSet mean_shift_modes(const PointMatrix& points, const VmfConfig& cfg,
                         const IterateObserver& observer = {});

ClusterResult assign_to_modes(const FlattenedField& flat,
                              const std::vector<std::vector<double>>& modes,
                              const VmfConfig& cfg);

ClusterResult cluster_field(const EmbeddingField& emb, const BinaryMask& mask,
                            const VmfConfig& cfg);

}  // namespace instseg

#endif  // INSTSEG_VMF_CLUSTER_HPP_
