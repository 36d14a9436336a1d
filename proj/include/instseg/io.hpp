// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// File formats:
//   masks        8-bit binary PGM (P5), 0 / 255; any non-zero reads as 1
//   label maps   8-bit P5, pixel value = instance ID (at most 255)
//   instances    8-bit P5, cluster index + 1, 0 for background
//   embeddings   "EMBF", u32 H, u32 W, u32 D (little-endian), then H*W*D
//                little-endian float32, row-major, vector components last
//   boxes        JSON {"images": [{"image_id", "detections": [
//                  {"box": [x1, y1, x2, y2], "class_id", "score"?}]}]}
//   traces       CSV "level,y,x"
// Malformed content throws kParse, filesystem failures kIo.

#ifndef INSTSEG_IO_HPP_
#define INSTSEG_IO_HPP_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "instseg/core.hpp"
#include "instseg/deform_sample.hpp"
#include "instseg/embed_opt.hpp"
#include "instseg/metrics.hpp"
#include "instseg/vmf_cluster.hpp"

namespace instseg::io {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

std::string encode_pgm(const Grid2D<std::uint8_t>& image);
Grid2D<std::uint8_t> decode_pgm(std::string_view bytes);

std::string encode_mask(const BinaryMask& mask);
BinaryMask decode_mask(std::string_view bytes);

std::string encode_labels(const LabelMap& labels);
// IDs are remapped onto {1..C} in increasing order.
LabelMap decode_labels(std::string_view bytes);

std::string encode_instances(const Grid2D<std::int32_t>& assignment);
Grid2D<std::int32_t> decode_instances(std::string_view bytes);

std::string encode_embeddings(const VectorField& field);
VectorField decode_embeddings(std::string_view bytes);

nlohmann::json to_json(const std::vector<DetectionSet>& sets);
std::vector<DetectionSet> detections_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const OptimizationTrace& trace);
nlohmann::json to_json(const ClusterResult& result);

std::string trace_to_csv(const ReceptiveTrace& trace);

// Pretty-printed with a trailing newline.
std::string dump(const nlohmann::json& doc);

}  // namespace instseg::io

#endif  // INSTSEG_IO_HPP_
