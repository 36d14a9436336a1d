// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Subcommands behind the `instseg` executable. Each one reads its inputs
// from files, writes its outputs into a directory and is deterministic in
// (config, inputs).

#ifndef INSTSEG_COMMANDS_HPP_
#define INSTSEG_COMMANDS_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "instseg/config.hpp"
#include "instseg/core.hpp"

namespace instseg::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitIo = 3,
  kExitNumerical = 4,
  kExitEmptyInput = 5,
};

int exit_code(ErrorKind kind);

// labels.pgm, drivable.pgm, lanes.pgm, boxes.json, scene.json
void cmd_gen(const RunConfig& cfg);

// embeddings.embf, trace.json
void cmd_optimize(const RunConfig& cfg, const std::filesystem::path& labels);

// instances.pgm, modes.json
void cmd_cluster(const RunConfig& cfg, const std::filesystem::path& embeddings,
                 const std::filesystem::path& mask);

struct EvalInputs {
  std::optional<std::filesystem::path> pred_drivable, gt_drivable;
  std::optional<std::filesystem::path> pred_lanes, gt_lanes;
  std::optional<std::filesystem::path> pred_boxes, gt_boxes;
  std::optional<std::filesystem::path> pred_instances, gt_labels;
};

// metrics.json
void cmd_eval(const RunConfig& cfg, const EvalInputs& inputs);

// trace.csv. `offsets` holds one EMBF field per level, input side first;
// when empty, zero offsets on a scene-sized grid are used.
void cmd_trace(const RunConfig& cfg,
               const std::vector<std::filesystem::path>& offsets);

// gen, optimize, cluster, detections.json, eval; all in output_dir.
void cmd_pipeline(const RunConfig& cfg);

// `args` excludes the program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args);

}  // namespace instseg::cli

#endif  // INSTSEG_COMMANDS_HPP_
