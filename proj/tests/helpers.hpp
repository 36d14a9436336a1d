// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Fixture builders shared by the unit tests and the acceptance suite.

#ifndef INSTSEG_TESTS_HELPERS_HPP_
#define INSTSEG_TESTS_HELPERS_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "instseg/config.hpp"
#include "instseg/core.hpp"
#include "instseg/embed_opt.hpp"
#include "instseg/io.hpp"
#include "instseg/losses.hpp"
#include "instseg/metrics.hpp"
#include "instseg/scenegen.hpp"
#include "instseg/vmf_cluster.hpp"
#include "oracles.hpp"

namespace fixtures {

using namespace instseg;

// Kind of the instseg::Error thrown by `f`, if any.
inline std::optional<ErrorKind> error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline LabelMap labels_from(std::size_t w, std::size_t h, std::vector<std::int32_t> ids) {
  return LabelMap(Grid2D<std::int32_t>(w, h, std::move(ids)));
}

inline BinaryMask mask_from(std::size_t w, std::size_t h, std::vector<std::uint8_t> v) {
  return BinaryMask(Grid2D<std::uint8_t>(w, h, std::move(v)));
}

inline std::vector<oracle::Vec> to_points(const VectorField& f) {
  std::vector<oracle::Vec> out;
  for (std::size_t p = 0; p < f.pixels(); ++p) {
    out.emplace_back(f.at(p).begin(), f.at(p).end());
  }
  return out;
}

inline std::vector<int> ids_of(const LabelMap& labels) {
  return {labels.grid().values().begin(), labels.grid().values().end()};
}

inline oracle::LossParams params_of(const DiscriminativeConfig& c) {
  return {c.alpha, c.beta, c.gamma, c.delta_v, c.delta_d};
}

struct LossCase {
  LabelMap labels;
  EmbeddingField field;
  DiscriminativeConfig cfg;
};

// Random grid up to max_side x max_side, D <= max_dim, C <= max_c, with a
// random sprinkling of background.
inline LossCase random_loss_case(Rng& rng, std::size_t max_side, std::size_t max_dim,
                                 std::size_t max_c) {
  const std::size_t w = 1 + rng.below(max_side);
  const std::size_t h = 1 + rng.below(max_side);
  const std::size_t n = w * h;
  const std::size_t c = 1 + rng.below(std::min(max_c, n));
  std::vector<std::int32_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = rng.uniform() < 0.2 ? 0 : static_cast<std::int32_t>(1 + rng.below(c));
  }
  // Every instance owns at least one pixel.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  for (std::size_t k = 0; k < c; ++k) ids[order[k]] = static_cast<std::int32_t>(k + 1);

  const std::size_t dim = 1 + rng.below(max_dim);
  std::vector<double> data(n * dim);
  for (double& v : data) v = rng.uniform(-2.0, 2.0);
  DiscriminativeConfig cfg;
  cfg.alpha = rng.uniform(0.1, 2.0);
  cfg.beta = rng.uniform(0.1, 2.0);
  cfg.gamma = rng.uniform(0.0, 1.0);
  cfg.delta_v = rng.uniform(0.05, 1.0);
  cfg.delta_d = rng.uniform(0.1, 2.0);
  return {labels_from(w, h, std::move(ids)), EmbeddingField({w, h}, dim, std::move(data)),
          cfg};
}

// True when no hinge argument or mean norm lies within `margin` of its kink.
inline bool away_from_kinks(const LossCase& c, double margin) {
  const auto x = to_points(c.field);
  const auto ids = ids_of(c.labels);
  const std::size_t C = c.labels.num_instances();
  std::vector<oracle::Vec> mu(C, oracle::Vec(c.field.dim(), 0.0));
  std::vector<double> n(C, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (ids[i] == 0) continue;
    const auto k = static_cast<std::size_t>(ids[i] - 1);
    for (std::size_t d = 0; d < c.field.dim(); ++d) mu[k][d] += x[i][d];
    n[k] += 1.0;
  }
  for (std::size_t k = 0; k < C; ++k) {
    for (double& v : mu[k]) v /= n[k];
    if (oracle::norm(mu[k]) < margin) return false;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (ids[i] == 0) continue;
    const auto k = static_cast<std::size_t>(ids[i] - 1);
    const double dist = oracle::norm(oracle::sub(mu[k], x[i]));
    // A lone pixel sits exactly on its mean, where the distance itself kinks.
    if (n[k] > 1.0 && dist < margin) return false;
    if (std::abs(dist - c.cfg.delta_v) < margin) return false;
  }
  for (std::size_t a = 0; a < C; ++a) {
    for (std::size_t b = a + 1; b < C; ++b) {
      const double d = oracle::norm(oracle::sub(mu[a], mu[b]));
      if (std::abs(d - 2.0 * c.cfg.delta_d) < margin || d < margin) return false;
    }
  }
  return true;
}

// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

struct PipelineResult {
  Scene scene;
  ClusterResult clusters;
  double mean_iou = 0.0;
  double map50 = 0.0;
};

// Same path as the `pipeline` command, embeddings quantized to float32.
inline PipelineResult run_pipeline(const SceneConfig& sc, const RunConfig& cfg,
                                   std::uint64_t seed) {
  PipelineResult r;
  r.scene = gen_scene(sc);
  OptimizerConfig opt = cfg.embedding.optimizer;
  opt.seed = seed;
  const OptimizationTrace trace =
      optimize_embeddings(r.scene.labels, cfg.embedding.dim, cfg.loss, opt);
  const VectorField stored =
      io::decode_embeddings(io::encode_embeddings(trace.final_field));
  const EmbeddingField emb(stored.shape(), stored.dim(),
                           {stored.data().begin(), stored.data().end()});
  r.clusters = cluster_field(normalize_field(emb, r.scene.drivable_mask),
                             r.scene.drivable_mask, cfg.cluster);
  const auto ious = best_instance_ious(r.clusters.assignment, r.scene.labels);
  r.mean_iou = std::accumulate(ious.begin(), ious.end(), 0.0) /
               static_cast<double>(ious.size());
  r.map50 = instance_map50(r.clusters, r.scene.labels).value;
  return r;
}

inline std::vector<double> repeat_rows(const std::vector<double>& v, std::size_t n) {
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.insert(out.end(), v.begin(), v.end());
  return out;
}

inline std::vector<double> random_unit(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double n = 0.0;
  do {
    n = 0.0;
    for (double& x : v) {
      x = rng.uniform(-1.0, 1.0);
      n += x * x;
    }
  } while (n < 1e-6);
  for (double& x : v) x /= std::sqrt(n);
  return v;
}

inline std::vector<double> flatten(const std::vector<oracle::Vec>& rows) {
  std::vector<double> out;
  for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

struct PlantedCase {
  std::size_t dim = 0;
  std::vector<oracle::Vec> directions;
  std::vector<oracle::Vec> points;
  std::vector<int> bundle_of;  // planted bundle of each point
};

inline oracle::Vec axis(std::size_t dim, std::size_t i) {
  oracle::Vec v(dim, 0.0);
  v[i] = 1.0;
  return v;
}

// Orthogonal directions in several dimensions with tight bundles around each.
inline std::vector<PlantedCase> planted_suite() {
  std::vector<PlantedCase> suite;
  std::uint64_t seed = 100;
  for (std::size_t dim : {3u, 4u, 8u}) {
    for (std::size_t bundles = 2; bundles <= std::min<std::size_t>(dim, 4); ++bundles) {
      PlantedCase c;
      c.dim = dim;
      for (std::size_t b = 0; b < bundles; ++b) c.directions.push_back(axis(dim, b));
      c.points = oracle::planted_bundles(c.directions, 40, 0.1, seed++);
      for (std::size_t b = 0; b < bundles; ++b) {
        for (int i = 0; i < 40; ++i) c.bundle_of.push_back(static_cast<int>(b));
      }
      suite.push_back(std::move(c));
    }
  }
  return suite;
}

inline std::vector<std::vector<double>> random_rows(Rng& rng, std::size_t h, std::size_t w) {
  std::vector<std::vector<double>> rows(h, std::vector<double>(w));
  for (auto& r : rows) {
    for (double& v : r) v = rng.uniform(-1.0, 1.0);
  }
  return rows;
}

inline Grid2D<double> grid_from_rows(const std::vector<std::vector<double>>& rows) {
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return Grid2D<double>(rows[0].size(), rows.size(), std::move(flat));
}

// Foreground pixels with a 4-neighbour carrying a different label.
inline std::vector<PixelCoord> boundary_pixels(const LabelMap& labels) {
  std::vector<PixelCoord> out;
  const auto W = static_cast<std::int64_t>(labels.shape().width);
  const auto H = static_cast<std::int64_t>(labels.shape().height);
  const auto id = [&](std::int64_t y, std::int64_t x) {
    return labels.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  };
  for (std::int64_t y = 0; y < H; ++y) {
    for (std::int64_t x = 0; x < W; ++x) {
      const std::int32_t here = id(y, x);
      if (here == 0) continue;
      bool edge = false;
      const std::int64_t dy[] = {-1, 1, 0, 0};
      const std::int64_t dx[] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        const std::int64_t yy = y + dy[k];
        const std::int64_t xx = x + dx[k];
        if (yy < 0 || xx < 0 || yy >= H || xx >= W) continue;
        edge = edge || id(yy, xx) != here;
      }
      if (edge) out.push_back({y, x});
    }
  }
  return out;
}

inline PixelCoord boundary_origin(const LabelMap& labels, std::uint64_t seed) {
  const auto candidates = boundary_pixels(labels);
  Rng rng(seed);
  return candidates.at(rng.below(candidates.size()));
}

struct DetectionCase {
  std::vector<DetectionSet> preds;
  std::vector<DetectionSet> gts;
  double threshold = 0.5;
};

// Up to 3 images with up to 4 ground-truth boxes each, one per 50 x 50
// quadrant so ground truths never overlap, and up to 4 predictions that are
// either jittered ground truths or free boxes. Scores are drawn from a small
// set so ties occur.
inline DetectionCase random_detection_case(Rng& rng) {
  DetectionCase c;
  c.threshold = kCocoThresholds[rng.below(kCocoThresholds.size())];
  const std::size_t images = 1 + rng.below(3);
  for (std::size_t img = 0; img < images; ++img) {
    DetectionSet gt{static_cast<std::int64_t>(img), {}};
    DetectionSet pr{static_cast<std::int64_t>(img), {}};
    const std::size_t n_gt = rng.below(5);
    std::vector<std::size_t> cells = {0, 1, 2, 3};
    for (std::size_t i = 4; i > 1; --i) std::swap(cells[i - 1], cells[rng.below(i)]);
    for (std::size_t g = 0; g < n_gt; ++g) {
      const double ox = 50.0 * static_cast<double>(cells[g] % 2);
      const double oy = 50.0 * static_cast<double>(cells[g] / 2);
      const double x1 = ox + rng.uniform(0, 20);
      const double y1 = oy + rng.uniform(0, 20);
      const auto cls = static_cast<std::int32_t>(rng.uniform() < 0.85 ? 0 : 1);
      gt.detections.push_back(
          {{x1, y1, x1 + rng.uniform(10, 30), y1 + rng.uniform(10, 30)}, cls, std::nullopt});
    }
    const std::size_t n_pred = rng.below(5);
    for (std::size_t p = 0; p < n_pred; ++p) {
      Box b;
      if (!gt.detections.empty() && rng.uniform() < 0.7) {
        const Box& g = gt.detections[rng.below(gt.detections.size())].box;
        const double j = rng.uniform(0.0, 4.0);
        b = {g.x1 + rng.uniform(-j, j), g.y1 + rng.uniform(-j, j),
             g.x2 + rng.uniform(-j, j), g.y2 + rng.uniform(-j, j)};
      } else {
        const double x1 = rng.uniform(0, 80);
        const double y1 = rng.uniform(0, 80);
        b = {x1, y1, x1 + rng.uniform(5, 30), y1 + rng.uniform(5, 30)};
      }
      const double score = rng.uniform() < 0.5 ? 0.2 * static_cast<double>(1 + rng.below(5))
                                               : rng.uniform();
      const auto cls = static_cast<std::int32_t>(rng.uniform() < 0.85 ? 0 : 1);
      pr.detections.push_back({b, cls, score});
    }
    c.gts.push_back(std::move(gt));
    c.preds.push_back(std::move(pr));
  }
  return c;
}

inline std::map<std::string, std::string> read_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  if (!std::filesystem::exists(root)) return out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    out[std::filesystem::relative(e.path(), root).string()] = io::read_file(e.path());
  }
  return out;
}

}  // namespace fixtures

#endif  // INSTSEG_TESTS_HELPERS_HPP_
