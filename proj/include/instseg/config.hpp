// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration shared by every command. Every field is optional; an
// absent section or key keeps the owning module's default. Unknown keys,
// wrong types and out-of-range values throw kConfig with the line of the
// offending key.

#ifndef INSTSEG_CONFIG_HPP_
#define INSTSEG_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "instseg/deform_sample.hpp"
#include "instseg/embed_opt.hpp"
#include "instseg/losses.hpp"
#include "instseg/scenegen.hpp"
#include "instseg/vmf_cluster.hpp"

namespace instseg {

struct EmbeddingRunConfig {
  std::size_t dim = 8;
  OptimizerConfig optimizer;

  EmbeddingRunConfig() { optimizer.manifold = Manifold::kSphere; }
};

struct MetricsConfig {
  std::vector<std::int32_t> classes = {0, 1, 2, 3};
  double iou_threshold = 0.5;    // recall
  double score_threshold = 0.0;  // recall

  void validate() const;
};

struct DetectionRunConfig {
  DetectionNoise noise;
  std::uint64_t seed = 0;
};

struct TraceConfig {
  std::size_t kernel_size = 3;
  std::size_t levels = 3;
  std::vector<std::size_t> strides;  // empty: 1 at every level
  std::optional<PixelCoord> origin;  // default: image centre

  void validate() const;
};

struct RunConfig {
  SceneConfig scene;
  DiscriminativeConfig loss;
  SegLossConfig seg_loss;
  EmbeddingRunConfig embedding;
  VmfConfig cluster;
  MetricsConfig metrics;
  DetectionRunConfig detections;
  TraceConfig trace;
  std::filesystem::path output_dir = "out";

  // Overrides the scene, optimizer and detection seeds.
  void apply_seed(std::uint64_t seed);
};

RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

// Resolved values of every section except output_dir.
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace instseg

#endif  // INSTSEG_CONFIG_HPP_
