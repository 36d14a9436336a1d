// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "instseg/vmf_cluster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <thread>

#include <spdlog/spdlog.h>

namespace instseg {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

// Angle between unit vectors, accurate for small angles.
double angle_between(std::span<const double> a, std::span<const double> b) {
  double sq = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sq += (a[k] - b[k]) * (a[k] - b[k]);
  const double chord = std::min(std::sqrt(sq), 2.0);
  return 2.0 * std::asin(chord / 2.0);
}

std::vector<double> unit(std::vector<double> v) {
  const double n = norm(v);
  for (double& x : v) x /= n;
  return v;
}

std::optional<std::vector<double>> climb(const PointMatrix& points,
                                         std::size_t seed_row,
                                         const VmfConfig& cfg,
                                         const IterateObserver& observer) {
  std::vector<double> x(points.row(seed_row).begin(),
                        points.row(seed_row).end());
  if (observer) observer(seed_row, 0, x);
  try {
    for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
      std::vector<double> next = vmf_shift_step(points, x, cfg.kappa);
      if (observer) observer(seed_row, it, next);
      const double moved = angle_between(x, next);
      x = std::move(next);
      if (moved < cfg.shift_tolerance) break;
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kDegenerateShift) throw;
    spdlog::debug("seed {} dropped: {}", seed_row, e.what());
    return std::nullopt;
  }
  return x;
}

}  // namespace

void VmfConfig::validate() const {
  if (!(std::isfinite(kappa) && kappa > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "kappa must be positive");
  }
  if (!(shift_tolerance > 0.0) || !(merge_tolerance > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "tolerances must be positive");
  }
  if (max_iters < 1 || seed_stride < 1) {
    throw Error(ErrorKind::kInvalidArgument,
                "max_iters and seed_stride must be >= 1");
  }
}

PointMatrix::PointMatrix(std::size_t dim, std::vector<double> data)
    : dim_(dim), data_(std::move(data)) {
  if (dim_ == 0 || data_.size() % dim_ != 0) {
    throw Error(ErrorKind::kInvalidArgument, "point matrix shape mismatch");
  }
  for (std::size_t i = 0; i < rows(); ++i) {
    if (std::abs(norm(row(i)) - 1.0) > 1e-9) {
      throw Error(ErrorKind::kInvalidArgument,
                  "point matrix row " + std::to_string(i) + " is not unit");
    }
  }
}

FlattenedField flatten_foreground(const EmbeddingField& emb,
                                  const BinaryMask& mask) {
  validate_pair(emb, mask);
  const std::size_t dim = emb.dim();
  FlattenedField out;
  out.shape = emb.shape();
  std::vector<double> data;
  for (std::size_t p = 0; p < emb.pixels(); ++p) {
    if (mask[p] == 0) continue;
    const auto v = emb.at(p);
    const double n = norm(v);
    if (std::abs(n - 1.0) > 1e-6) {
      throw Error(ErrorKind::kInvalidArgument,
                  "embedding at pixel " + std::to_string(p) +
                      " is not normalized (norm " + std::to_string(n) + ")");
    }
    // Re-normalize so rows are unit to double precision.
    for (double x : v) data.push_back(x / n);
    out.pixel_of_row.push_back(p);
  }
  if (out.pixel_of_row.empty()) {
    throw Error(ErrorKind::kEmptyForeground, "foreground mask is empty");
  }
  out.points = PointMatrix(dim, std::move(data));
  return out;
}

VectorField scatter_rows(const FlattenedField& flat) {
  const std::size_t dim = flat.points.dim();
  std::vector<double> data(flat.shape.size() * dim, 0.0);
  for (std::size_t r = 0; r < flat.pixel_of_row.size(); ++r) {
    const auto row = flat.points.row(r);
    std::copy(row.begin(), row.end(),
              data.begin() + static_cast<std::ptrdiff_t>(flat.pixel_of_row[r] * dim));
  }
  return VectorField(flat.shape, dim, std::move(data));
}

std::vector<double> vmf_shift_step(const PointMatrix& points,
                                   std::span<const double> x, double kappa) {
  const std::size_t n = points.rows();
  const std::size_t dim = points.dim();
  if (n == 0) throw Error(ErrorKind::kInvalidArgument, "no points");
  if (x.size() != dim) {
    throw Error(ErrorKind::kDimensionMismatch, "iterate dimension mismatch");
  }
  if (std::abs(norm(x) - 1.0) > 1e-9) {
    throw Error(ErrorKind::kInvalidArgument, "iterate is not a unit vector");
  }
  std::vector<double> dots(n);
  double max_dot = -2.0;
  for (std::size_t j = 0; j < n; ++j) {
    dots[j] = dot(points.row(j), x);
    max_dot = std::max(max_dot, dots[j]);
  }
  std::vector<double> sum(dim, 0.0);
  double weight_total = 0.0;
  const double* data = points.data().data();
  for (std::size_t j = 0; j < n; ++j) {
    const double w = std::exp(kappa * (dots[j] - max_dot));
    weight_total += w;
    const double* row = data + j * dim;
    for (std::size_t k = 0; k < dim; ++k) sum[k] += w * row[k];
  }
  const double len = norm(sum);
  if (!(len >= 1e-12 * weight_total)) {
    throw Error(ErrorKind::kDegenerateShift,
                "weighted mean direction vanished");
  }
  for (double& v : sum) v /= len;
  return sum;
}

double vmf_density(const PointMatrix& points, std::span<const double> x,
                   double kappa) {
  double s = 0.0;
  for (std::size_t j = 0; j < points.rows(); ++j) {
    s += std::exp(kappa * (dot(points.row(j), x) - 1.0));
  }
  return s / static_cast<double>(points.rows());
}

ModeSet mean_shift_modes(const PointMatrix& points, const VmfConfig& cfg,
                         const IterateObserver& observer) {
  cfg.validate();
  if (points.rows() == 0) {
    throw Error(ErrorKind::kEmptyForeground, "no points to cluster");
  }
  std::vector<std::size_t> seeds;
  for (std::size_t r = 0; r < points.rows(); r += cfg.seed_stride) {
    seeds.push_back(r);
  }

  std::vector<std::optional<std::vector<double>>> converged(seeds.size());
  const std::size_t workers =
      cfg.parallel ? std::max(1u, std::thread::hardware_concurrency()) : 1;
  if (workers <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      converged[i] = climb(points, seeds[i], cfg, observer);
    }
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> failures(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < seeds.size(); i += workers) {
            converged[i] = climb(points, seeds[i], cfg, observer);
          }
        } catch (...) {
          failures[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
  }

  // Sequential merge in seed order.
  struct Group {
    std::vector<double> sum;
    std::vector<double> rep;
    std::size_t count = 0;
  };
  std::vector<Group> groups;
  ModeSet out;
  for (const auto& point : converged) {
    if (!point) {
      ++out.dropped_seeds;
      continue;
    }
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return angle_between(g.rep, *point) < cfg.merge_tolerance;
    });
    if (it == groups.end()) {
      groups.push_back({*point, *point, 1});
      continue;
    }
    for (std::size_t k = 0; k < point->size(); ++k) it->sum[k] += (*point)[k];
    ++it->count;
    it->rep = unit(it->sum);
  }
  std::stable_sort(groups.begin(), groups.end(),
                   [](const Group& a, const Group& b) { return a.count > b.count; });
  for (const auto& g : groups) {
    out.modes.push_back(g.rep);
    out.basin_sizes.push_back(g.count);
  }
  spdlog::debug("mean shift: {} seeds, {} modes, {} dropped", seeds.size(),
                out.modes.size(), out.dropped_seeds);
  return out;
}

ClusterResult assign_to_modes(const FlattenedField& flat,
                              const std::vector<std::vector<double>>& modes,
                              const VmfConfig& cfg) {
  if (modes.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "no modes to assign to");
  }
  const std::size_t n = flat.points.rows();
  auto nearest = [&](std::size_t row, const std::vector<bool>& allowed) {
    std::int32_t best = -1;
    double best_dot = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < modes.size(); ++m) {
      if (!allowed[m]) continue;
      const double d = dot(flat.points.row(row), modes[m]);
      if (d > best_dot) {  // strict: ties keep the lower index
        best_dot = d;
        best = static_cast<std::int32_t>(m);
      }
    }
    return best;
  };

  std::vector<bool> allowed(modes.size(), true);
  std::vector<std::int32_t> label(n);
  std::vector<std::size_t> pop(modes.size(), 0);
  for (std::size_t r = 0; r < n; ++r) {
    label[r] = nearest(r, allowed);
    ++pop[static_cast<std::size_t>(label[r])];
  }

  bool any_dissolved = false;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    if (pop[m] < cfg.min_cluster_pixels) {
      allowed[m] = false;
      any_dissolved = true;
    }
  }
  const bool any_survivor =
      std::find(allowed.begin(), allowed.end(), true) != allowed.end();
  if (any_dissolved) {
    for (std::size_t r = 0; r < n; ++r) {
      if (!allowed[static_cast<std::size_t>(label[r])]) {
        label[r] = any_survivor ? nearest(r, allowed) : -1;
      }
    }
  }

  std::vector<std::int32_t> renumber(modes.size(), -1);
  ClusterResult out;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    if (!allowed[m]) continue;
    renumber[m] = static_cast<std::int32_t>(out.modes.size());
    out.modes.push_back(modes[m]);
  }
  out.num_clusters = out.modes.size();
  out.populations.assign(out.num_clusters, 0);
  std::vector<std::int32_t> grid(flat.shape.size(), -1);
  for (std::size_t r = 0; r < n; ++r) {
    if (label[r] < 0) continue;
    const std::int32_t c = renumber[static_cast<std::size_t>(label[r])];
    grid[flat.pixel_of_row[r]] = c;
    ++out.populations[static_cast<std::size_t>(c)];
  }
  out.assignment = Grid2D<std::int32_t>(flat.shape.width, flat.shape.height,
                                        std::move(grid));
  return out;
}

ClusterResult cluster_field(const EmbeddingField& emb, const BinaryMask& mask,
                            const VmfConfig& cfg) {
  cfg.validate();
  const FlattenedField flat = flatten_foreground(emb, mask);
  const ModeSet modes = mean_shift_modes(flat.points, cfg);
  if (modes.modes.empty()) {
    ClusterResult none;
    none.assignment = Grid2D<std::int32_t>(emb.shape().width,
                                           emb.shape().height, -1);
    return none;
  }
  return assign_to_modes(flat, modes.modes, cfg);
}

}  // namespace instseg
