// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "instseg/scenegen.hpp"

using namespace instseg;
using fixtures::error_kind;

namespace {

struct Px {
  std::int64_t y;
  std::int64_t x;
};

std::vector<std::vector<Px>> instance_pixels(const LabelMap& labels) {
  std::vector<std::vector<Px>> out(labels.num_instances());
  for (std::size_t y = 0; y < labels.shape().height; ++y) {
    for (std::size_t x = 0; x < labels.shape().width; ++x) {
      const std::int32_t id = labels.at(y, x);
      if (id > 0) {
        out[static_cast<std::size_t>(id - 1)].push_back(
            {static_cast<std::int64_t>(y), static_cast<std::int64_t>(x)});
      }
    }
  }
  return out;
}

// Smallest squared distance between pixels of different instances.
std::int64_t min_separation_sq(const LabelMap& labels) {
  const auto inst = instance_pixels(labels);
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  for (std::size_t a = 0; a < inst.size(); ++a) {
    for (std::size_t b = a + 1; b < inst.size(); ++b) {
      for (const Px& p : inst[a]) {
        for (const Px& q : inst[b]) {
          best = std::min(best, (p.y - q.y) * (p.y - q.y) + (p.x - q.x) * (p.x - q.x));
        }
      }
    }
  }
  return best;
}

}  // namespace

TEST_SUITE("scenegen") {
  TEST_CASE("two parallel stripes are vertical bands") {
    const Scene s = gen_scene(SceneConfig{});
    std::set<std::int32_t> ids(s.labels.grid().values().begin(), s.labels.grid().values().end());
    CHECK(ids == std::set<std::int32_t>{0, 1, 2});
    // Every occupied row covers the same columns for a given instance.
    for (std::int32_t id : {1, 2}) {
      std::optional<std::set<std::size_t>> cols;
      for (std::size_t y = 0; y < 64; ++y) {
        std::set<std::size_t> row;
        for (std::size_t x = 0; x < 64; ++x) {
          if (s.labels.at(y, x) == id) row.insert(x);
        }
        if (row.empty()) continue;
        CHECK(*row.rbegin() - *row.begin() + 1 == row.size());
        if (cols) CHECK(*cols == row);
        cols = row;
      }
    }
  }

  TEST_CASE("fixed seed reproduces the scene") {
    for (int l = 0; l < 3; ++l) {
      SceneConfig cfg;
      cfg.layout = static_cast<Layout>(l);
      cfg.num_instances = 3;
      cfg.seed = 12;
      const Scene a = gen_scene(cfg);
      const Scene b = gen_scene(cfg);
      CHECK(a.labels == b.labels);
      CHECK(a.lane_mask == b.lane_mask);
      CHECK(a.gt_boxes == b.gt_boxes);
    }
  }

  TEST_CASE("seeds change the scene") {
    std::set<std::vector<std::int32_t>> seen;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      SceneConfig cfg;
      cfg.seed = seed;
      const Scene s = gen_scene(cfg);
      seen.insert({s.labels.grid().values().begin(), s.labels.grid().values().end()});
    }
    CHECK(seen.size() > 1);
  }

  TEST_CASE("overcrowded layouts are infeasible") {
    SceneConfig cfg;
    cfg.width = 16;
    cfg.height = 16;
    cfg.num_instances = 6;
    cfg.gap_pixels = 8;
    for (int l = 0; l < 3; ++l) {
      cfg.layout = static_cast<Layout>(l);
      CHECK(error_kind([&] { gen_scene(cfg); }) == ErrorKind::kInfeasibleLayout);
    }
  }

  TEST_CASE("every generated scene meets its constraints") {
    for (int l = 0; l < 3; ++l) {
      for (std::size_t c = 1; c <= 6; ++c) {
        for (std::size_t gap : {1u, 3u, 5u}) {
          for (std::uint64_t seed = 0; seed < 3; ++seed) {
            SceneConfig cfg;
            cfg.layout = static_cast<Layout>(l);
            cfg.num_instances = c;
            cfg.gap_pixels = gap;
            cfg.seed = seed;
            Scene s;
            const auto kind = error_kind([&] { s = gen_scene(cfg); });
            if (kind) {
              CHECK(*kind == ErrorKind::kInfeasibleLayout);
              continue;
            }
            CAPTURE(l);
            CAPTURE(c);
            CAPTURE(gap);
            CHECK(s.labels.num_instances() == c);
            CHECK(s.drivable_mask == foreground_of(s.labels));
            if (c > 1) {
              CHECK(min_separation_sq(s.labels) >= static_cast<std::int64_t>(gap * gap));
            }
            const auto inst = instance_pixels(s.labels);
            std::size_t fg = 0;
            for (const auto& i : inst) fg += i.size();
            for (const auto& i : inst) CHECK(20 * i.size() >= fg);
            for (std::size_t p = 0; p < s.labels.shape().size(); ++p) {
              if (s.lane_mask[p]) CHECK(s.labels[p] == 0);
            }
            CHECK(s.lane_mask.count() > 0);
            REQUIRE(s.gt_boxes.detections.size() == c);
            for (const auto& d : s.gt_boxes.detections) {
              CHECK_NOTHROW(d.validate());
              CHECK_FALSE(d.score.has_value());
              CHECK(d.box.x1 >= 0.0);
              CHECK(d.box.y1 >= 0.0);
              CHECK(d.box.x2 <= 64.0);
              CHECK(d.box.y2 <= 64.0);
              CHECK(d.class_id >= 0);
              CHECK(d.class_id < kVehicleClasses);
            }
          }
        }
      }
    }
  }

  TEST_CASE("the default configurations of every layout are feasible") {
    for (int l = 0; l < 3; ++l) {
      for (std::size_t c = 1; c <= 4; ++c) {
        SceneConfig cfg;
        cfg.layout = static_cast<Layout>(l);
        cfg.num_instances = c;
        CHECK_NOTHROW(gen_scene(cfg));
      }
    }
  }

  TEST_CASE("scene configuration is validated") {
    SceneConfig cfg;
    cfg.num_instances = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.num_instances = 7;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.gap_pixels = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.lane_thickness = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    CHECK(layout_from_string(to_string(Layout::kFork)) == Layout::kFork);
    CHECK(layout_from_string("curved_bands") == Layout::kCurvedBands);
    CHECK(error_kind([] { layout_from_string("spiral"); }) == ErrorKind::kInvalidArgument);
    CHECK(score_model_from_string(to_string(ScoreModel::kUniform)) == ScoreModel::kUniform);
  }

  TEST_CASE("zero noise returns the ground truth with full scores") {
    const Scene s = gen_scene(SceneConfig{});
    const DetectionSet p = perturb_detections(s.gt_boxes, {}, 3);
    REQUIRE(p.detections.size() == s.gt_boxes.detections.size());
    for (std::size_t i = 0; i < p.detections.size(); ++i) {
      CHECK(p.detections[i].box == s.gt_boxes.detections[i].box);
      CHECK(p.detections[i].class_id == s.gt_boxes.detections[i].class_id);
      CHECK(p.detections[i].score == 1.0);
    }
    CHECK(map_50_95({p}, {s.gt_boxes}, {0, 1, 2, 3}).value == 1.0);
  }

  TEST_CASE("dropping everything leaves nothing to recall") {
    const Scene s = gen_scene(SceneConfig{});
    DetectionNoise noise;
    noise.drop_prob = 1.0;
    const DetectionSet p = perturb_detections(s.gt_boxes, noise, 3);
    CHECK(p.detections.empty());
    CHECK(detection_recall({p}, {s.gt_boxes}, {0, 1, 2, 3}, 0.5, 0.0) == 0.0);
  }

  TEST_CASE("a shifted box has the closed-form overlap") {
    for (double s : {0.0, 0.5, 1.0, 2.5, 4.0}) {
      const DetectionSet gt{0, {{{2, 3, 8, 7}, 1, std::nullopt}}};
      DetectionNoise noise;
      noise.shift_px = s;
      const Box b = perturb_detections(gt, noise, 0).detections.at(0).box;
      const double w = 6.0;
      const double h = 4.0;
      const double want = (w - s) * h / (w * h + s * h);
      CHECK(box_iou(gt.detections[0].box, b) == doctest::Approx(want).epsilon(1e-14));
      CHECK(oracle::overlap(gt.detections[0].box, b) == doctest::Approx(want).epsilon(1e-14));
    }
  }

  TEST_CASE("spurious boxes rank below kept ones under the separable model") {
    const Scene s = gen_scene(SceneConfig{});
    DetectionNoise noise;
    noise.spurious_count = 20;
    const DetectionSet p = perturb_detections(s.gt_boxes, noise, 8);
    REQUIRE(p.detections.size() == s.gt_boxes.detections.size() + 20);
    for (std::size_t i = 0; i < p.detections.size(); ++i) {
      const auto& d = p.detections[i];
      CHECK_NOTHROW(d.validate());
      if (i < s.gt_boxes.detections.size()) {
        CHECK(*d.score == 1.0);
      } else {
        CHECK(*d.score < 0.5);
        CHECK(d.box.x2 <= 64.0);
        CHECK(d.box.y2 <= 64.0);
      }
    }
    CHECK(p == perturb_detections(s.gt_boxes, noise, 8));
    // Kept boxes still find every ground truth first.
    CHECK(detection_recall({p}, {s.gt_boxes}, {0, 1, 2, 3}, 0.5, 0.5) == 1.0);
  }

  TEST_CASE("uniform scores stay in range") {
    const Scene s = gen_scene(SceneConfig{});
    DetectionNoise noise;
    noise.spurious_count = 50;
    noise.score_model = ScoreModel::kUniform;
    for (const auto& d : perturb_detections(s.gt_boxes, noise, 1).detections) {
      CHECK(*d.score >= 0.0);
      CHECK(*d.score < 1.0);
    }
  }

  TEST_CASE("noise is validated") {
    DetectionNoise noise;
    noise.drop_prob = 1.5;
    CHECK_THROWS_AS(noise.validate(), Error);
    noise = {};
    noise.shift_px = std::nan("");
    CHECK_THROWS_AS(noise.validate(), Error);
    noise = {};
    noise.width = 2;
    CHECK_THROWS_AS(noise.validate(), Error);
  }
}
