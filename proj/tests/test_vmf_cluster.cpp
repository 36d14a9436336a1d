// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <set>

#include "helpers.hpp"
#include "instseg/vmf_cluster.hpp"

using namespace instseg;
using fixtures::error_kind;

namespace {

// Shift of x by the definition: normalized sum of exp(kappa p.x) p.
oracle::Vec direct_shift(const std::vector<oracle::Vec>& pts, const oracle::Vec& x, double kappa) {
  oracle::Vec s(x.size(), 0.0);
  for (const auto& p : pts) {
    double d = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) d += p[k] * x[k];
    for (std::size_t k = 0; k < x.size(); ++k) s[k] += std::exp(kappa * d) * p[k];
  }
  const double n = oracle::norm(s);
  for (double& v : s) v /= n;
  return s;
}

// Random rotation by Gram-Schmidt on random rows.
std::vector<oracle::Vec> random_rotation(Rng& rng, std::size_t dim) {
  std::vector<oracle::Vec> q;
  while (q.size() < dim) {
    oracle::Vec v = fixtures::random_unit(rng, dim);
    for (const auto& u : q) {
      double d = 0.0;
      for (std::size_t k = 0; k < dim; ++k) d += v[k] * u[k];
      for (std::size_t k = 0; k < dim; ++k) v[k] -= d * u[k];
    }
    const double n = oracle::norm(v);
    if (n < 1e-3) continue;
    for (double& x : v) x /= n;
    q.push_back(v);
  }
  return q;
}

oracle::Vec rotate(const std::vector<oracle::Vec>& r, std::span<const double> v) {
  oracle::Vec out(r.size(), 0.0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t k = 0; k < v.size(); ++k) out[i] += r[i][k] * v[k];
  }
  return out;
}

oracle::Vec vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_SUITE("vmf_cluster") {
  TEST_CASE("flatten keeps foreground rows in raster order") {
    const EmbeddingField emb({3, 2}, 2, {1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1});
    const BinaryMask mask = fixtures::mask_from(3, 2, {1, 0, 1, 0, 0, 1});
    const FlattenedField flat = flatten_foreground(emb, mask);
    CHECK(flat.points.rows() == 3);
    CHECK(flat.pixel_of_row == std::vector<std::size_t>{0, 2, 5});
    const VectorField back = scatter_rows(flat);
    for (std::size_t p = 0; p < 6; ++p) {
      for (std::size_t k = 0; k < 2; ++k) {
        CHECK(back.at(p)[k] == (mask[p] ? emb.at(p)[k] : 0.0));
      }
    }
  }

  TEST_CASE("flatten rejects empty and unnormalized input") {
    const EmbeddingField emb({2, 1}, 2, {1, 0, 0, 2});
    CHECK(error_kind([&] { flatten_foreground(emb, fixtures::mask_from(2, 1, {0, 0})); }) ==
          ErrorKind::kEmptyForeground);
    CHECK(error_kind([&] { flatten_foreground(emb, fixtures::mask_from(2, 1, {1, 1})); }) ==
          ErrorKind::kInvalidArgument);
    CHECK(error_kind([&] { flatten_foreground(emb, fixtures::mask_from(1, 2, {1, 1})); }) ==
          ErrorKind::kDimensionMismatch);
  }

  TEST_CASE("shift step matches the weighted mean direction") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t dim = 2 + rng.below(6);
      std::vector<oracle::Vec> pts;
      for (std::size_t i = 0; i < 1 + rng.below(20); ++i) pts.push_back(fixtures::random_unit(rng, dim));
      const oracle::Vec x = fixtures::random_unit(rng, dim);
      const double kappa = rng.uniform(0.1, 30.0);
      const auto got = vmf_shift_step(PointMatrix(dim, fixtures::flatten(pts)), x, kappa);
      const auto want = direct_shift(pts, x, kappa);
      for (std::size_t k = 0; k < dim; ++k) CHECK(std::abs(got[k] - want[k]) <= 1e-12);
    }
  }

  TEST_CASE("shift step examples") {
    // Two orthogonal points seen from the first: e1 + exp(-kappa) e2.
    const PointMatrix pts(2, {1, 0, 0, 1});
    const auto s = vmf_shift_step(pts, std::vector<double>{1, 0}, 2.0);
    const double t = std::exp(-2.0);
    CHECK(s[0] == doctest::Approx(1.0 / std::hypot(1.0, t)).epsilon(1e-14));
    CHECK(s[1] == doctest::Approx(t / std::hypot(1.0, t)).epsilon(1e-14));
    // From the bisector both points weigh the same.
    const double h = std::sqrt(0.5);
    const auto b = vmf_shift_step(pts, std::vector<double>{h, h}, 7.0);
    CHECK(b[0] == doctest::Approx(h).epsilon(1e-14));
    CHECK(b[1] == doctest::Approx(h).epsilon(1e-14));
  }

  TEST_CASE("a single datum is reached in one step") {
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
      const auto p = fixtures::random_unit(rng, 4);
      auto x = fixtures::random_unit(rng, 4);
      double d = 0.0;
      for (std::size_t k = 0; k < 4; ++k) d += p[k] * x[k];
      if (d < -0.99) continue;
      const auto s = vmf_shift_step(PointMatrix(4, p), x, rng.uniform(0.5, 50.0));
      for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(s[k] - p[k]) <= 1e-15);
    }
  }

  TEST_CASE("large kappa does not overflow") {
    const PointMatrix pts(2, {1, 0, 0.6, 0.8});
    const auto s = vmf_shift_step(pts, std::vector<double>{0.6, 0.8}, 1e4);
    CHECK(std::isfinite(s[0]));
    CHECK(s[0] == doctest::Approx(0.6).epsilon(1e-12));
  }

  TEST_CASE("antipodal pair cancels") {
    const PointMatrix pts(2, {1, 0, -1, 0});
    CHECK(error_kind([&] { vmf_shift_step(pts, std::vector<double>{0, 1}, 10.0); }) ==
          ErrorKind::kDegenerateShift);
    VmfConfig cfg;
    cfg.seed_stride = 1;
    // Seeds start on the data, so each one climbs to its own point.
    const ModeSet m = mean_shift_modes(pts, cfg);
    CHECK(m.modes.size() == 2);
    CHECK(m.dropped_seeds == 0);
  }

  TEST_CASE("shift step checks its arguments") {
    const PointMatrix pts(2, {1, 0});
    CHECK(error_kind([&] { vmf_shift_step(pts, std::vector<double>{1, 0, 0}, 1.0); }) ==
          ErrorKind::kDimensionMismatch);
    CHECK(error_kind([&] { vmf_shift_step(pts, std::vector<double>{2, 0}, 1.0); }) ==
          ErrorKind::kInvalidArgument);
    CHECK(error_kind([] { PointMatrix(2, {1, 1}); }) == ErrorKind::kInvalidArgument);
    CHECK(error_kind([] { PointMatrix(2, {1, 0, 0}); }) == ErrorKind::kInvalidArgument);
  }

  TEST_CASE("planted bundles are recovered") {
    for (const auto& c : fixtures::planted_suite()) {
      CAPTURE(c.dim);
      CAPTURE(c.directions.size());
      const PointMatrix pts(c.dim, fixtures::flatten(c.points));
      VmfConfig cfg;
      const ModeSet m = mean_shift_modes(pts, cfg);
      REQUIRE(m.modes.size() == c.directions.size());
      for (const auto& dir : c.directions) {
        double best = 10.0;
        for (const auto& mode : m.modes) best = std::min(best, oracle::angle_between(dir, mode));
        CHECK(best <= 0.05);
      }
      // Every seed lands on one of the modes found from every point.
      cfg.seed_stride = 1;
      const ModeSet all = mean_shift_modes(pts, cfg);
      REQUIRE(all.modes.size() == m.modes.size());
      for (const auto& mode : m.modes) {
        double best = 10.0;
        for (const auto& other : all.modes) best = std::min(best, oracle::angle_between(mode, other));
        CHECK(best <= cfg.merge_tolerance);
      }
      std::size_t seeds = 0;
      for (std::size_t s : m.basin_sizes) seeds += s;
      CHECK(seeds == (c.points.size() + 3) / 4);
    }
  }

  TEST_CASE("wide merge tolerance collapses everything") {
    const auto c = fixtures::planted_suite().front();
    VmfConfig cfg;
    cfg.merge_tolerance = 2.0;  // beyond the right angle between bundles
    const ModeSet m = mean_shift_modes(PointMatrix(c.dim, fixtures::flatten(c.points)), cfg);
    CHECK(m.modes.size() == 1);
    CHECK(m.basin_sizes.front() == (c.points.size() + 3) / 4);
  }

  TEST_CASE("identical points give one mode") {
    Rng rng(8);
    const auto p = fixtures::random_unit(rng, 5);
    const ModeSet m = mean_shift_modes(PointMatrix(5, fixtures::repeat_rows(p, 30)), VmfConfig{});
    REQUIRE(m.modes.size() == 1);
    for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(m.modes[0][k] - p[k]) <= 1e-15);
  }

  TEST_CASE("modes are unit vectors sorted by population") {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<oracle::Vec> pts;
      for (int i = 0; i < 60; ++i) pts.push_back(fixtures::random_unit(rng, 3));
      VmfConfig cfg;
      cfg.seed_stride = 1;
      cfg.kappa = 25.0;
      const ModeSet m = mean_shift_modes(PointMatrix(3, fixtures::flatten(pts)), cfg);
      for (const auto& mode : m.modes) CHECK(std::abs(oracle::norm(mode) - 1.0) <= 1e-12);
      for (std::size_t i = 1; i < m.basin_sizes.size(); ++i) {
        CHECK(m.basin_sizes[i - 1] >= m.basin_sizes[i]);
      }
    }
  }

  TEST_CASE("observer sees every iterate starting from the seed row") {
    const auto c = fixtures::planted_suite().front();
    const PointMatrix pts(c.dim, fixtures::flatten(c.points));
    VmfConfig cfg;
    std::set<std::size_t> rows;
    bool all_unit = true;
    bool starts_on_row = true;
    mean_shift_modes(pts, cfg, [&](std::size_t row, std::size_t it, std::span<const double> x) {
      rows.insert(row);
      all_unit = all_unit && std::abs(oracle::norm(vec(x)) - 1.0) <= 1e-12;
      if (it == 0) starts_on_row = starts_on_row && vec(x) == vec(pts.row(row));
    });
    CHECK(all_unit);
    CHECK(starts_on_row);
    CHECK(rows.size() == (pts.rows() + 3) / 4);
    CHECK(*rows.rbegin() % 4 == 0);
  }

  TEST_CASE("iterates never lose density") {
    Rng rng(10);
    std::vector<oracle::Vec> pts;
    for (int i = 0; i < 80; ++i) pts.push_back(fixtures::random_unit(rng, 4));
    const PointMatrix m(4, fixtures::flatten(pts));
    VmfConfig cfg;
    cfg.kappa = 6.0;
    std::map<std::size_t, double> last;
    std::size_t violations = 0;
    mean_shift_modes(m, cfg, [&](std::size_t row, std::size_t, std::span<const double> x) {
      const double f = vmf_density(m, x, cfg.kappa);
      auto it = last.find(row);
      if (it != last.end() && f < it->second - 1e-12) ++violations;
      last[row] = f;
    });
    CHECK(violations == 0);
  }

  TEST_CASE("rotating the data rotates the modes") {
    Rng rng(11);
    for (const auto& c : fixtures::planted_suite()) {
      const auto r = random_rotation(rng, c.dim);
      std::vector<oracle::Vec> rotated;
      for (const auto& p : c.points) rotated.push_back(rotate(r, p));
      const ModeSet a = mean_shift_modes(PointMatrix(c.dim, fixtures::flatten(c.points)), {});
      const ModeSet b = mean_shift_modes(PointMatrix(c.dim, fixtures::flatten(rotated)), {});
      REQUIRE(a.modes.size() == b.modes.size());
      CHECK(a.basin_sizes == b.basin_sizes);
      for (std::size_t i = 0; i < a.modes.size(); ++i) {
        CHECK(oracle::angle_between(rotate(r, a.modes[i]), b.modes[i]) <= 1e-6);
      }
    }
  }

  TEST_CASE("parallel seeds give the sequential result") {
    for (const auto& c : fixtures::planted_suite()) {
      const PointMatrix pts(c.dim, fixtures::flatten(c.points));
      VmfConfig cfg;
      cfg.seed_stride = 1;
      const ModeSet a = mean_shift_modes(pts, cfg);
      cfg.parallel = true;
      const ModeSet b = mean_shift_modes(pts, cfg);
      CHECK(a.modes == b.modes);
      CHECK(a.basin_sizes == b.basin_sizes);
      CHECK(mean_shift_modes(pts, cfg).modes == b.modes);
    }
  }

  TEST_CASE("assignment ties go to the lower index") {
    const double h = std::sqrt(0.5);
    const EmbeddingField emb({3, 1}, 2, {h, h, 1, 0, 0, 1});
    const FlattenedField flat = flatten_foreground(emb, fixtures::mask_from(3, 1, {1, 1, 1}));
    VmfConfig cfg;
    cfg.min_cluster_pixels = 1;
    const ClusterResult r = assign_to_modes(flat, {{1, 0}, {0, 1}}, cfg);
    CHECK(r.num_clusters == 2);
    CHECK(r.assignment[0] == 0);
    CHECK(r.assignment[1] == 0);
    CHECK(r.assignment[2] == 1);
    CHECK(r.populations == std::vector<std::size_t>{2, 1});
  }

  TEST_CASE("small clusters dissolve into their neighbours") {
    const EmbeddingField emb({4, 1}, 2, {1, 0, 1, 0, 1, 0, 0, 1});
    const FlattenedField flat = flatten_foreground(emb, fixtures::mask_from(4, 1, {1, 1, 1, 1}));
    VmfConfig cfg;
    cfg.min_cluster_pixels = 2;
    const ClusterResult r = assign_to_modes(flat, {{1, 0}, {0, 1}}, cfg);
    CHECK(r.num_clusters == 1);
    CHECK(r.populations == std::vector<std::size_t>{4});
    for (std::size_t p = 0; p < 4; ++p) CHECK(r.assignment[p] == 0);
    cfg.min_cluster_pixels = 5;
    const ClusterResult none = assign_to_modes(flat, {{1, 0}, {0, 1}}, cfg);
    CHECK(none.num_clusters == 0);
    for (std::size_t p = 0; p < 4; ++p) CHECK(none.assignment[p] == -1);
  }

  TEST_CASE("cluster_field separates two orthogonal halves") {
    std::vector<double> data;
    std::vector<std::uint8_t> mask;
    for (std::size_t y = 0; y < 8; ++y) {
      for (std::size_t x = 0; x < 8; ++x) {
        const bool bg = y == 0;
        mask.push_back(bg ? 0 : 1);
        if (bg) {
          data.insert(data.end(), {0, 0, 1});
        } else {
          data.insert(data.end(), x < 4 ? std::initializer_list<double>{1, 0, 0}
                                        : std::initializer_list<double>{0, 1, 0});
        }
      }
    }
    const ClusterResult r =
        cluster_field(EmbeddingField({8, 8}, 3, data), fixtures::mask_from(8, 8, mask), {});
    REQUIRE(r.num_clusters == 2);
    CHECK(r.populations == std::vector<std::size_t>{28, 28});
    for (std::size_t y = 0; y < 8; ++y) {
      for (std::size_t x = 0; x < 8; ++x) {
        if (y == 0) {
          CHECK(r.assignment.at(y, x) == -1);
        } else {
          CHECK(r.assignment.at(y, x) == r.assignment.at(1, x < 4 ? 0 : 7));
        }
      }
    }
    CHECK(r.assignment.at(1, 0) != r.assignment.at(1, 7));
  }

  TEST_CASE("configuration is validated") {
    VmfConfig cfg;
    cfg.kappa = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.seed_stride = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.merge_tolerance = -1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.max_iters = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
  }
}
