// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "instseg/scenegen.hpp"

#include <algorithm>
#include <cmath>

namespace instseg {
namespace {

constexpr std::int64_t kMinBand = 4;

struct Band {
  std::vector<std::int64_t> left;  // per row
  std::int64_t width = 0;
};

[[noreturn]] void infeasible(const SceneConfig& cfg, const std::string& why) {
  throw Error(ErrorKind::kInfeasibleLayout,
              std::to_string(cfg.num_instances) + " instances with gap " +
                  std::to_string(cfg.gap_pixels) + " do not fit " +
                  std::to_string(cfg.height) + "x" + std::to_string(cfg.width) +
                  ": " + why);
}

std::vector<Band> layout_bands(const SceneConfig& cfg, Rng& rng) {
  const auto W = static_cast<std::int64_t>(cfg.width);
  const auto H = static_cast<std::int64_t>(cfg.height);
  const auto C = static_cast<std::int64_t>(cfg.num_instances);
  const auto gap = static_cast<std::int64_t>(cfg.gap_pixels);
  const std::int64_t margin = W >= 32 ? 2 : 1;
  const std::int64_t avail = W - 2 * margin;
  const std::int64_t w_max = (avail - (C - 1) * gap) / C;
  if (avail - (C - 1) * gap < C * kMinBand || w_max < kMinBand) {
    infeasible(cfg, "bands would be narrower than " + std::to_string(kMinBand));
  }

  std::vector<Band> bands(static_cast<std::size_t>(C));
  for (auto& b : bands) b.left.assign(static_cast<std::size_t>(H), 0);

  switch (cfg.layout) {
    case Layout::kParallelStripes: {
      std::int64_t used = 0;
      for (auto& b : bands) {
        b.width = std::max(kMinBand, w_max - static_cast<std::int64_t>(
                                                 rng.below(static_cast<std::uint64_t>(w_max / 4 + 1))));
        used += b.width;
      }
      const std::int64_t slack = avail - used - (C - 1) * gap;
      std::int64_t x = margin + static_cast<std::int64_t>(
                                    rng.below(static_cast<std::uint64_t>(slack + 1)));
      for (auto& b : bands) {
        std::fill(b.left.begin(), b.left.end(), x);
        x += b.width + gap;
      }
      break;
    }
    case Layout::kFork: {
      const std::int64_t w = std::max(kMinBand, (2 * w_max) / 3);
      const std::int64_t packed = C * w + (C - 1) * gap;
      const std::int64_t bottom0 = margin + (avail - packed) / 2;
      std::vector<std::int64_t> top(static_cast<std::size_t>(C));
      if (C == 1) {
        top[0] = margin + static_cast<std::int64_t>(
                              rng.below(static_cast<std::uint64_t>(avail - w + 1)));
      } else {
        const std::int64_t gap_top = gap + (avail - packed) / (C - 1);
        const std::int64_t top0 = margin + (avail - (C * w + (C - 1) * gap_top)) / 2;
        for (std::int64_t c = 0; c < C; ++c) top[static_cast<std::size_t>(c)] = top0 + c * (w + gap_top);
      }
      for (std::int64_t c = 0; c < C; ++c) {
        auto& b = bands[static_cast<std::size_t>(c)];
        b.width = w;
        const std::int64_t bottom = bottom0 + c * (w + gap);
        for (std::int64_t y = 0; y < H; ++y) {
          b.left[static_cast<std::size_t>(y)] =
              bottom + ((top[static_cast<std::size_t>(c)] - bottom) * (H - 1 - y)) / std::max<std::int64_t>(H - 1, 1);
        }
      }
      break;
    }
    case Layout::kCurvedBands: {
      const std::int64_t amp = std::max<std::int64_t>(
          1, w_max / 2 - static_cast<std::int64_t>(
                             rng.below(static_cast<std::uint64_t>(w_max / 4 + 1))));
      const std::int64_t w = (avail - amp - (C - 1) * gap) / C;
      if (w < kMinBand) infeasible(cfg, "no room for the curve amplitude");
      const bool flip = rng.below(2) == 1;
      const std::int64_t yc = (H - 1) / 2;
      const std::int64_t denom = std::max<std::int64_t>(yc * yc, 1);
      for (std::int64_t c = 0; c < C; ++c) {
        auto& b = bands[static_cast<std::size_t>(c)];
        b.width = w;
        for (std::int64_t y = 0; y < H; ++y) {
          std::int64_t bow = (amp * (y - yc) * (y - yc)) / denom;
          bow = std::min(bow, amp);
          b.left[static_cast<std::size_t>(y)] = margin + c * (w + gap) + (flip ? amp - bow : bow);
        }
      }
      break;
    }
  }
  return bands;
}

}  // namespace

std::string to_string(Layout layout) {
  switch (layout) {
    case Layout::kParallelStripes: return "parallel_stripes";
    case Layout::kFork: return "fork";
    case Layout::kCurvedBands: return "curved_bands";
  }
  return "unknown";
}

Layout layout_from_string(const std::string& name) {
  if (name == "parallel_stripes") return Layout::kParallelStripes;
  if (name == "fork") return Layout::kFork;
  if (name == "curved_bands") return Layout::kCurvedBands;
  throw Error(ErrorKind::kInvalidArgument, "unknown layout '" + name + "'");
}

std::string to_string(ScoreModel model) {
  return model == ScoreModel::kSeparable ? "separable" : "uniform";
}

ScoreModel score_model_from_string(const std::string& name) {
  if (name == "separable") return ScoreModel::kSeparable;
  if (name == "uniform") return ScoreModel::kUniform;
  throw Error(ErrorKind::kInvalidArgument, "unknown score model '" + name + "'");
}

void SceneConfig::validate() const {
  if (width < 8 || height < 8) {
    throw Error(ErrorKind::kInvalidArgument, "scene must be at least 8x8");
  }
  if (width > 4096 || height > 4096) {
    throw Error(ErrorKind::kInvalidArgument, "scene larger than 4096x4096");
  }
  if (num_instances < 1 || num_instances > 6) {
    throw Error(ErrorKind::kInvalidArgument, "num_instances must be in 1..6");
  }
  if (gap_pixels < 1) {
    throw Error(ErrorKind::kInvalidArgument, "gap_pixels must be >= 1");
  }
  if (lane_thickness < 1) {
    throw Error(ErrorKind::kInvalidArgument, "lane_thickness must be >= 1");
  }
}

void DetectionNoise::validate() const {
  if (!(std::isfinite(shift_px))) {
    throw Error(ErrorKind::kInvalidArgument, "shift_px must be finite");
  }
  if (!(drop_prob >= 0.0 && drop_prob <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "drop_prob must be in [0,1]");
  }
  if (width < 4 || height < 4) {
    throw Error(ErrorKind::kInvalidArgument, "noise bounds must be >= 4x4");
  }
}

Scene gen_scene(const SceneConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::vector<Band> bands = layout_bands(cfg, rng);
  const auto W = static_cast<std::int64_t>(cfg.width);
  const auto H = static_cast<std::int64_t>(cfg.height);
  const std::int64_t top = static_cast<std::int64_t>(
      rng.below(static_cast<std::uint64_t>(H / 8 + 1)));

  std::vector<std::int32_t> labels(cfg.width * cfg.height, 0);
  auto idx = [&](std::int64_t y, std::int64_t x) {
    return static_cast<std::size_t>(y * W + x);
  };
  for (std::size_t c = 0; c < bands.size(); ++c) {
    for (std::int64_t y = top; y < H; ++y) {
      const std::int64_t l = bands[c].left[static_cast<std::size_t>(y)];
      for (std::int64_t x = std::max<std::int64_t>(l, 0);
           x < std::min(l + bands[c].width, W); ++x) {
        labels[idx(y, x)] = static_cast<std::int32_t>(c + 1);
      }
    }
  }

  // Carve every instance away from lower-numbered ones until all pairs are
  // more than gap_pixels apart.
  const auto gap = static_cast<std::int64_t>(cfg.gap_pixels);
  std::vector<std::int32_t> carved = labels;
  for (std::int64_t y = 0; y < H; ++y) {
    for (std::int64_t x = 0; x < W; ++x) {
      const std::int32_t id = carved[idx(y, x)];
      if (id <= 1) continue;
      bool close = false;
      for (std::int64_t dy = -gap; dy <= gap && !close; ++dy) {
        for (std::int64_t dx = -gap; dx <= gap && !close; ++dx) {
          if (dy * dy + dx * dx > gap * gap) continue;
          const std::int64_t yy = y + dy;
          const std::int64_t xx = x + dx;
          if (yy < 0 || xx < 0 || yy >= H || xx >= W) continue;
          const std::int32_t other = carved[idx(yy, xx)];
          close = other != 0 && other < id;
        }
      }
      if (close) carved[idx(y, x)] = 0;
    }
  }

  std::vector<std::size_t> area(bands.size(), 0);
  std::size_t foreground = 0;
  for (std::int32_t id : carved) {
    if (id == 0) continue;
    ++area[static_cast<std::size_t>(id - 1)];
    ++foreground;
  }
  for (std::size_t c = 0; c < area.size(); ++c) {
    if (area[c] == 0 || area[c] * 20 < foreground) {
      infeasible(cfg, "instance " + std::to_string(c + 1) +
                          " is below 5% of the foreground");
    }
  }

  std::vector<std::uint8_t> lanes(cfg.width * cfg.height, 0);
  const auto thickness = static_cast<std::int64_t>(cfg.lane_thickness);
  auto paint = [&](std::int64_t y, std::int64_t from, std::int64_t to) {
    for (std::int64_t x = std::max<std::int64_t>(from, 0);
         x <= std::min(to, W - 1); ++x) {
      if (carved[idx(y, x)] == 0) lanes[idx(y, x)] = 1;
    }
  };
  for (std::int64_t y = top; y < H; ++y) {
    const auto row = static_cast<std::size_t>(y);
    const std::int64_t first = bands.front().left[row];
    const std::int64_t last = bands.back().left[row] + bands.back().width;
    paint(y, first - 1 - thickness, first - 2);
    paint(y, last + 1, last + thickness);
    for (std::size_t c = 0; c + 1 < bands.size(); ++c) {
      const std::int64_t lo = bands[c].left[row] + bands[c].width;
      const std::int64_t hi = bands[c + 1].left[row] - 1;
      if (hi < lo) continue;
      const std::int64_t mid = (lo + hi) / 2;
      paint(y, std::max(lo, mid - (thickness - 1) / 2),
            std::min(hi, mid + thickness / 2));
    }
  }

  DetectionSet boxes;
  boxes.image_id = 0;
  for (std::size_t c = 0; c < bands.size(); ++c) {
    std::vector<std::size_t> pixels;
    for (std::size_t i = 0; i < carved.size(); ++i) {
      if (carved[i] == static_cast<std::int32_t>(c + 1)) pixels.push_back(i);
    }
    const std::size_t pick = pixels[rng.below(pixels.size())];
    const auto py = static_cast<std::int64_t>(pick / cfg.width);
    const auto px = static_cast<std::int64_t>(pick % cfg.width);
    const auto bw = static_cast<std::int64_t>(4 + rng.below(7));
    const auto bh = static_cast<std::int64_t>(4 + rng.below(7));
    const std::int64_t x1 = std::clamp<std::int64_t>(px - bw / 2, 0, W - 1);
    const std::int64_t y1 = std::clamp<std::int64_t>(py - bh / 2, 0, H - 1);
    Detection d;
    d.box = {static_cast<double>(x1), static_cast<double>(y1),
             static_cast<double>(std::min(x1 + bw, W)),
             static_cast<double>(std::min(y1 + bh, H))};
    d.class_id = static_cast<std::int32_t>(rng.below(kVehicleClasses));
    boxes.detections.push_back(d);
  }

  Scene scene;
  scene.labels = LabelMap(Grid2D<std::int32_t>(cfg.width, cfg.height, std::move(carved)));
  scene.drivable_mask = foreground_of(scene.labels);
  scene.lane_mask = BinaryMask(Grid2D<std::uint8_t>(cfg.width, cfg.height, std::move(lanes)));
  scene.gt_boxes = std::move(boxes);
  return scene;
}

DetectionSet perturb_detections(const DetectionSet& gt,
                                const DetectionNoise& noise,
                                std::uint64_t seed) {
  noise.validate();
  Rng rng(seed);
  DetectionSet out;
  out.image_id = gt.image_id;
  for (const auto& d : gt.detections) {
    const bool drop = rng.uniform() < noise.drop_prob;
    const double score = noise.score_model == ScoreModel::kSeparable ? 1.0 : rng.uniform();
    if (drop) continue;
    Detection p = d;
    p.box.x1 += noise.shift_px;
    p.box.x2 += noise.shift_px;
    p.score = score;
    out.detections.push_back(p);
  }
  for (std::size_t i = 0; i < noise.spurious_count; ++i) {
    const auto bw = static_cast<double>(3 + rng.below(std::min<std::size_t>(10, noise.width - 2)));
    const auto bh = static_cast<double>(3 + rng.below(std::min<std::size_t>(10, noise.height - 2)));
    const double x1 = std::floor(rng.uniform(0.0, static_cast<double>(noise.width) - bw));
    const double y1 = std::floor(rng.uniform(0.0, static_cast<double>(noise.height) - bh));
    Detection p;
    p.box = {x1, y1, x1 + bw, y1 + bh};
    p.class_id = static_cast<std::int32_t>(rng.below(kVehicleClasses));
    p.score = noise.score_model == ScoreModel::kSeparable ? rng.uniform(0.0, 0.5)
                                                          : rng.uniform();
    out.detections.push_back(p);
  }
  return out;
}

}  // namespace instseg
