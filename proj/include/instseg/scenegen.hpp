// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded synthetic road scenes: drivable-area instances laid out as
// parallel, forking or curved bands, lane lines in the gaps between them,
// and one vehicle box per instance. Rasterization uses integers only, so a
// seed reproduces the same scene bit for bit on any platform.

#ifndef INSTSEG_SCENEGEN_HPP_
#define INSTSEG_SCENEGEN_HPP_

#include <cstdint>
#include <string>

#include "instseg/core.hpp"
#include "instseg/metrics.hpp"

namespace instseg {

enum class Layout { kParallelStripes, kFork, kCurvedBands };

std::string to_string(Layout layout);
Layout layout_from_string(const std::string& name);

inline constexpr std::int32_t kVehicleClasses = 4;  // car, bus, truck, train

struct SceneConfig {
  std::size_t width = 64;
  std::size_t height = 64;
  std::size_t num_instances = 2;
  Layout layout = Layout::kParallelStripes;
  // Distinct instances are more than gap_pixels apart (Euclidean distance
  // between pixel centres), i.e. at least gap_pixels background pixels lie
  // between them along a row.
  std::size_t gap_pixels = 3;
  std::uint64_t seed = 0;
  std::size_t lane_thickness = 1;

  void validate() const;
};

struct Scene {
  LabelMap labels;
  BinaryMask drivable_mask;
  BinaryMask lane_mask;
  DetectionSet gt_boxes;
};

// Throws InfeasibleLayout when the bands cannot fit or an instance ends up
// below 5% of the foreground.
Scene gen_scene(const SceneConfig& cfg);

enum class ScoreModel {
  kSeparable,  // kept boxes score 1.0, spurious boxes below 0.5
  kUniform,    // every score uniform in [0, 1)
};

std::string to_string(ScoreModel model);
ScoreModel score_model_from_string(const std::string& name);

struct DetectionNoise {
  double shift_px = 0.0;  // every kept box moves this far along +x
  double drop_prob = 0.0;
  std::size_t spurious_count = 0;
  ScoreModel score_model = ScoreModel::kSeparable;
  // Bounds for spurious boxes.
  std::size_t width = 64;
  std::size_t height = 64;

  void validate() const;
};

DetectionSet perturb_detections(const DetectionSet& gt,
                                const DetectionNoise& noise,
                                std::uint64_t seed);

}  // namespace instseg

#endif  // INSTSEG_SCENEGEN_HPP_
