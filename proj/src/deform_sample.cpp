// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "instseg/deform_sample.hpp"

#include <array>
#include <cmath>

namespace instseg {
namespace {

struct Corner {
  std::size_t index;  // row-major pixel
  double weight;
  double dwdy;
  double dwdx;
};

// In-bounds corners of the bilinear stencil at (y, x).
std::size_t bilinear_corners(Shape shape, double y, double x,
                             std::array<Corner, 4>& out) {
  const double fy0 = std::floor(y);
  const double fx0 = std::floor(x);
  if (!(fy0 >= -1.0 && fy0 <= static_cast<double>(shape.height) &&
        fx0 >= -1.0 && fx0 <= static_cast<double>(shape.width))) {
    return 0;
  }
  const auto y0 = static_cast<std::int64_t>(fy0);
  const auto x0 = static_cast<std::int64_t>(fx0);
  const double fy = y - fy0;
  const double fx = x - fx0;
  const std::array<std::int64_t, 4> ys{y0, y0, y0 + 1, y0 + 1};
  const std::array<std::int64_t, 4> xs{x0, x0 + 1, x0, x0 + 1};
  const std::array<double, 4> w{(1 - fy) * (1 - fx), (1 - fy) * fx,
                                fy * (1 - fx), fy * fx};
  const std::array<double, 4> dy{-(1 - fx), -fx, 1 - fx, fx};
  const std::array<double, 4> dx{-(1 - fy), 1 - fy, -fy, fy};
  std::size_t n = 0;
  for (std::size_t c = 0; c < 4; ++c) {
    if (ys[c] < 0 || xs[c] < 0 ||
        ys[c] >= static_cast<std::int64_t>(shape.height) ||
        xs[c] >= static_cast<std::int64_t>(shape.width)) {
      continue;
    }
    out[n++] = {static_cast<std::size_t>(ys[c]) * shape.width +
                    static_cast<std::size_t>(xs[c]),
                w[c], dy[c], dx[c]};
  }
  return n;
}

struct OffsetSample {
  Point2 value;
  // d(dy)/dy, d(dy)/dx, d(dx)/dy, d(dx)/dx
  std::array<double, 4> jacobian{};
};

OffsetSample sample_offset(std::span<const double> data, Shape shape,
                           std::size_t dim, double y, double x,
                           std::size_t tap) {
  std::array<Corner, 4> corners{};
  const std::size_t n = bilinear_corners(shape, y, x, corners);
  OffsetSample s;
  for (std::size_t c = 0; c < n; ++c) {
    const double oy = data[corners[c].index * dim + 2 * tap];
    const double ox = data[corners[c].index * dim + 2 * tap + 1];
    s.value.y += corners[c].weight * oy;
    s.value.x += corners[c].weight * ox;
    s.jacobian[0] += corners[c].dwdy * oy;
    s.jacobian[1] += corners[c].dwdx * oy;
    s.jacobian[2] += corners[c].dwdy * ox;
    s.jacobian[3] += corners[c].dwdx * ox;
  }
  return s;
}

std::vector<std::size_t> resolve_strides(std::span<const std::size_t> strides,
                                         std::size_t levels) {
  if (strides.empty()) return std::vector<std::size_t>(levels, 1);
  if (strides.size() != levels) {
    throw Error(ErrorKind::kInvalidArgument,
                "expected " + std::to_string(levels) + " strides, got " +
                    std::to_string(strides.size()));
  }
  for (std::size_t s : strides) {
    if (s < 1) throw Error(ErrorKind::kInvalidArgument, "stride must be >= 1");
  }
  return {strides.begin(), strides.end()};
}

struct TraceNode {
  Point2 pos;
  std::int64_t parent;  // -1: the origin
  std::size_t level;
  std::size_t tap;
};

// Depth-first expansion; parents precede their children in `nodes`.
struct FieldView {
  std::span<const double> data;
  Shape shape;
  std::size_t dim;
};

void expand(const std::vector<FieldView>& fields, const KernelGrid& kernel,
            const std::vector<std::size_t>& strides, Point2 at,
            std::int64_t parent, std::size_t level,
            std::vector<TraceNode>& nodes) {
  const FieldView& f = fields[level - 1];
  const double stride = static_cast<double>(strides[level - 1]);
  for (std::size_t t = 0; t < kernel.tap_count(); ++t) {
    const Point2 off = sample_offset(f.data, f.shape, f.dim, at.y, at.x, t).value;
    const Point2 pos{at.y + stride * static_cast<double>(kernel.taps()[t].y) + off.y,
                     at.x + stride * static_cast<double>(kernel.taps()[t].x) + off.x};
    nodes.push_back({pos, parent, level, t});
    if (level > 1) {
      expand(fields, kernel, strides, pos,
             static_cast<std::int64_t>(nodes.size() - 1), level - 1, nodes);
    }
  }
}

ReceptiveTrace collect(const std::vector<TraceNode>& nodes, std::size_t levels,
                       PixelCoord origin) {
  ReceptiveTrace trace;
  trace.levels = levels;
  trace.origin = origin;
  trace.level_points.resize(levels);
  for (const auto& n : nodes) trace.level_points[n.level - 1].push_back(n.pos);
  trace.points = trace.level_points.empty() ? std::vector<Point2>{}
                                            : trace.level_points.front();
  return trace;
}

}  // namespace

KernelGrid::KernelGrid(std::size_t k) : k_(k) {
  if (k % 2 == 0) {
    throw Error(ErrorKind::kInvalidArgument, "kernel size must be odd");
  }
  const auto r = static_cast<std::int64_t>((k - 1) / 2);
  for (std::int64_t dy = -r; dy <= r; ++dy) {
    for (std::int64_t dx = -r; dx <= r; ++dx) taps_.push_back({dy, dx});
  }
}

OffsetField::OffsetField(const KernelGrid& kernel, VectorField values)
    : values_(std::move(values)) {
  if (values_.dim() != 2 * kernel.tap_count()) {
    throw Error(ErrorKind::kInvalidArgument,
                "offset field needs " + std::to_string(2 * kernel.tap_count()) +
                    " components per pixel, got " +
                    std::to_string(values_.dim()));
  }
}

OffsetField OffsetField::zeros(Shape shape, const KernelGrid& kernel) {
  return OffsetField(kernel, VectorField::zeros(shape, 2 * kernel.tap_count()));
}

Point2 OffsetField::at(std::size_t y, std::size_t x, std::size_t tap) const {
  const auto v = values_.at(y, x);
  return {v[2 * tap], v[2 * tap + 1]};
}

Point2 OffsetField::sample(double y, double x, std::size_t tap) const {
  return sample_offset(values_.data(), values_.shape(), values_.dim(), y, x, tap)
      .value;
}

double bilinear_sample(const Grid2D<double>& grid, double y, double x) {
  std::array<Corner, 4> corners{};
  const std::size_t n = bilinear_corners(grid.shape(), y, x, corners);
  double v = 0.0;
  for (std::size_t c = 0; c < n; ++c) v += corners[c].weight * grid[corners[c].index];
  return v;
}

Point2 bilinear_gradient(const Grid2D<double>& grid, double y, double x) {
  std::array<Corner, 4> corners{};
  const std::size_t n = bilinear_corners(grid.shape(), y, x, corners);
  Point2 g;
  for (std::size_t c = 0; c < n; ++c) {
    g.y += corners[c].dwdy * grid[corners[c].index];
    g.x += corners[c].dwdx * grid[corners[c].index];
  }
  return g;
}

double deformable_sample(const Grid2D<double>& grid, const KernelGrid& kernel,
                         std::span<const Point2> offsets,
                         std::span<const double> weights, PixelCoord center) {
  if (offsets.size() != kernel.tap_count() ||
      weights.size() != kernel.tap_count()) {
    throw Error(ErrorKind::kInvalidArgument,
                "deformable_sample needs one offset and one weight per tap");
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < kernel.tap_count(); ++t) {
    const double y = static_cast<double>(center.y + kernel.taps()[t].y) + offsets[t].y;
    const double x = static_cast<double>(center.x + kernel.taps()[t].x) + offsets[t].x;
    sum += weights[t] * bilinear_sample(grid, y, x);
  }
  return sum;
}

ReceptiveTrace trace_receptive_field(const std::vector<OffsetField>& offset_stack,
                                     const KernelGrid& kernel, PixelCoord origin,
                                     std::span<const std::size_t> strides) {
  const std::size_t levels = offset_stack.size();
  if (levels == 0) {
    throw Error(ErrorKind::kInvalidArgument, "trace needs at least one level");
  }
  const auto resolved = resolve_strides(strides, levels);
  std::vector<FieldView> views;
  for (const auto& f : offset_stack) {
    if (f.tap_count() != kernel.tap_count()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "offset field tap count does not match the kernel");
    }
    views.push_back({f.values().data(), f.shape(), f.values().dim()});
  }
  std::vector<TraceNode> nodes;
  expand(views, kernel, resolved,
         {static_cast<double>(origin.y), static_cast<double>(origin.x)}, -1,
         levels, nodes);
  return collect(nodes, levels, origin);
}

double centroid_pull_score(const ReceptiveTrace& trace, const LabelMap& labels) {
  const Shape shape = labels.shape();
  if (trace.origin.y < 0 || trace.origin.x < 0 ||
      trace.origin.y >= static_cast<std::int64_t>(shape.height) ||
      trace.origin.x >= static_cast<std::int64_t>(shape.width)) {
    throw Error(ErrorKind::kInvalidArgument, "trace origin outside the grid");
  }
  const std::int32_t id = labels.at(static_cast<std::size_t>(trace.origin.y),
                                    static_cast<std::size_t>(trace.origin.x));
  if (id == 0) {
    throw Error(ErrorKind::kOriginOnBackground, "trace origin is background");
  }
  if (trace.points.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& p : trace.points) {
    const double ry = std::round(p.y);
    const double rx = std::round(p.x);
    if (ry < 0 || rx < 0 || ry >= static_cast<double>(shape.height) ||
        rx >= static_cast<double>(shape.width)) {
      continue;
    }
    if (labels.at(static_cast<std::size_t>(ry), static_cast<std::size_t>(rx)) == id) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(trace.points.size());
}

double centroid_surrogate(const ReceptiveTrace& trace, Point2 target) {
  double sum = 0.0;
  for (const auto& p : trace.points) {
    sum += (p.y - target.y) * (p.y - target.y) + (p.x - target.x) * (p.x - target.x);
  }
  return trace.points.empty() ? 0.0 : sum / static_cast<double>(trace.points.size());
}

Point2 instance_centroid(const LabelMap& labels, std::int32_t id) {
  double sy = 0.0;
  double sx = 0.0;
  std::size_t n = 0;
  for (std::size_t y = 0; y < labels.shape().height; ++y) {
    for (std::size_t x = 0; x < labels.shape().width; ++x) {
      if (labels.at(y, x) != id) continue;
      sy += static_cast<double>(y);
      sx += static_cast<double>(x);
      ++n;
    }
  }
  if (n == 0) {
    throw Error(ErrorKind::kEmptyInstance,
                "instance " + std::to_string(id) + " has no pixels");
  }
  return {sy / static_cast<double>(n), sx / static_cast<double>(n)};
}

OffsetFit fit_centroid_offsets(const LabelMap& labels, const KernelGrid& kernel,
                               std::size_t levels, PixelCoord origin,
                               std::span<const std::size_t> strides,
                               const OffsetFitConfig& cfg) {
  if (levels == 0) {
    throw Error(ErrorKind::kInvalidArgument, "fit needs at least one level");
  }
  const auto resolved = resolve_strides(strides, levels);
  const Shape shape = labels.shape();
  if (origin.y < 0 || origin.x < 0 ||
      origin.y >= static_cast<std::int64_t>(shape.height) ||
      origin.x >= static_cast<std::int64_t>(shape.width)) {
    throw Error(ErrorKind::kInvalidArgument, "origin outside the grid");
  }
  const std::int32_t id = labels.at(static_cast<std::size_t>(origin.y),
                                    static_cast<std::size_t>(origin.x));
  if (id == 0) {
    throw Error(ErrorKind::kOriginOnBackground, "origin is background");
  }
  const Point2 target = instance_centroid(labels, id);
  const std::size_t dim = 2 * kernel.tap_count();

  std::vector<std::vector<double>> fields(
      levels, std::vector<double>(shape.size() * dim, 0.0));
  std::vector<std::vector<double>> grads(levels);
  const Point2 start{static_cast<double>(origin.y), static_cast<double>(origin.x)};

  OffsetFit fit;
  std::vector<TraceNode> nodes;
  for (std::size_t step = 0; step <= cfg.steps; ++step) {
    std::vector<FieldView> views;
    for (const auto& f : fields) views.push_back({f, shape, dim});
    nodes.clear();
    expand(views, kernel, resolved, start, -1, levels, nodes);

    double objective = 0.0;
    std::size_t leaves = 0;
    for (const auto& n : nodes) {
      if (n.level != 1) continue;
      objective += (n.pos.y - target.y) * (n.pos.y - target.y) +
                   (n.pos.x - target.x) * (n.pos.x - target.x);
      ++leaves;
    }
    objective /= static_cast<double>(leaves);
    fit.surrogate.push_back(objective);
    if (step == cfg.steps) break;

    // Reverse sweep: children come after their parents in `nodes`.
    std::vector<Point2> adj(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].level != 1) continue;
      adj[i] = {2.0 * (nodes[i].pos.y - target.y) / static_cast<double>(leaves),
                2.0 * (nodes[i].pos.x - target.x) / static_cast<double>(leaves)};
    }
    for (auto& g : grads) g.assign(shape.size() * dim, 0.0);
    for (std::size_t i = nodes.size(); i-- > 0;) {
      const TraceNode& n = nodes[i];
      const Point2 at = n.parent < 0 ? start : nodes[static_cast<std::size_t>(n.parent)].pos;
      const Point2 g = adj[i];
      std::array<Corner, 4> corners{};
      const std::size_t nc = bilinear_corners(shape, at.y, at.x, corners);
      auto& grad = grads[n.level - 1];
      for (std::size_t c = 0; c < nc; ++c) {
        grad[corners[c].index * dim + 2 * n.tap] += corners[c].weight * g.y;
        grad[corners[c].index * dim + 2 * n.tap + 1] += corners[c].weight * g.x;
      }
      if (n.parent < 0) continue;
      const auto& jac =
          sample_offset(fields[n.level - 1], shape, dim, at.y, at.x, n.tap).jacobian;
      Point2& up = adj[static_cast<std::size_t>(n.parent)];
      up.y += g.y + g.y * jac[0] + g.x * jac[2];
      up.x += g.x + g.y * jac[1] + g.x * jac[3];
    }
    for (std::size_t l = 0; l < levels; ++l) {
      for (std::size_t i = 0; i < fields[l].size(); ++i) {
        fields[l][i] -= cfg.step_size * grads[l][i];
      }
    }
  }
  for (auto& f : fields) {
    fit.offsets.emplace_back(kernel, VectorField(shape, dim, std::move(f)));
  }
  return fit;
}

}  // namespace instseg
