// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deformable sampling: each tap of a regular k x k kernel is displaced by a
// real-valued (dy, dx) offset and read with bilinear interpolation (zero
// padding outside the grid). Stacking L such layers and following every tap
// back to the input gives a k^(2L)-point receptive-field trace.
//
// All coordinates are input-pixel units. A level's stride is the spacing of
// its taps at input resolution, and every offset field lives on the input
// grid.

#ifndef INSTSEG_DEFORM_SAMPLE_HPP_
#define INSTSEG_DEFORM_SAMPLE_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "instseg/core.hpp"

namespace instseg {

struct Point2 {
  double y = 0.0;
  double x = 0.0;

  bool operator==(const Point2&) const = default;
};

struct PixelCoord {
  std::int64_t y = 0;
  std::int64_t x = 0;
};

class KernelGrid {
 public:
  explicit KernelGrid(std::size_t k = 3);

  std::size_t size() const { return k_; }
  std::size_t tap_count() const { return taps_.size(); }
  // Row-major over dy, then dx, each in [-r, r].
  const std::vector<PixelCoord>& taps() const { return taps_; }

 private:
  std::size_t k_;
  std::vector<PixelCoord> taps_;
};

// k^2 (dy, dx) pairs per pixel, stored as a field of dimension 2 k^2 with
// tap t at components (2t, 2t + 1).
class OffsetField {
 public:
  OffsetField() = default;
  OffsetField(const KernelGrid& kernel, VectorField values);
  static OffsetField zeros(Shape shape, const KernelGrid& kernel);

  Shape shape() const { return values_.shape(); }
  std::size_t tap_count() const { return values_.dim() / 2; }
  const VectorField& values() const { return values_; }

  Point2 at(std::size_t y, std::size_t x, std::size_t tap) const;
  // Bilinear interpolation of one tap's offset at a fractional location.
  Point2 sample(double y, double x, std::size_t tap) const;

 private:
  VectorField values_;
};

struct ReceptiveTrace {
  std::size_t levels = 0;
  PixelCoord origin;
  std::vector<Point2> points;  // input-level leaves, depth-first order
  // level_points[l - 1] holds every location generated at level l; the
  // last entry is the first expansion of the origin, the first is `points`.
  std::vector<std::vector<Point2>> level_points;
};

double bilinear_sample(const Grid2D<double>& grid, double y, double x);

// Partial derivatives of bilinear_sample with respect to (y, x), one-sided
// from above at integer coordinates.
Point2 bilinear_gradient(const Grid2D<double>& grid, double y, double x);

// sum_t weights[t] * bilinear_sample(grid, center + tap_t + offsets[t])
double deformable_sample(const Grid2D<double>& grid, const KernelGrid& kernel,
                         std::span<const Point2> offsets,
                         std::span<const double> weights, PixelCoord center);

// offset_stack[l - 1] drives level l; level L expands the origin. Empty
// `strides` means stride 1 everywhere.
ReceptiveTrace trace_receptive_field(const std::vector<OffsetField>& offset_stack,
                                     const KernelGrid& kernel, PixelCoord origin,
                                     std::span<const std::size_t> strides = {});

// Fraction of leaves whose nearest pixel carries the origin's instance ID;
// leaves outside the grid count as misses.
double centroid_pull_score(const ReceptiveTrace& trace, const LabelMap& labels);

// Mean squared distance from the leaves to `target`.
double centroid_surrogate(const ReceptiveTrace& trace, Point2 target);

// Pixel centroid of one instance.
Point2 instance_centroid(const LabelMap& labels, std::int32_t id);

struct OffsetFitConfig {
  std::size_t steps = 300;
  double step_size = 2.0;
};

struct OffsetFit {
  std::vector<OffsetField> offsets;
  std::vector<double> surrogate;  // objective before each step, then final
};

// Gradient descent of centroid_surrogate(trace(offsets), centroid of the
// origin's instance) over every offset field entry, starting from zero
// offsets. The gradient is exact: it follows each location through the
// interpolated offsets of the levels below it.
OffsetFit fit_centroid_offsets(const LabelMap& labels, const KernelGrid& kernel,
                               std::size_t levels, PixelCoord origin,
                               std::span<const std::size_t> strides = {},
                               const OffsetFitConfig& cfg = {});

}  // namespace instseg

#endif  // INSTSEG_DEFORM_SAMPLE_HPP_
