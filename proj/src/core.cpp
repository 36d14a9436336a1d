// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "instseg/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace instseg {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kEmptyInstance: return "EmptyInstance";
    case ErrorKind::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::kDegenerateVector: return "DegenerateVector";
    case ErrorKind::kDegenerateShift: return "DegenerateShift";
    case ErrorKind::kEmptyForeground: return "EmptyForeground";
    case ErrorKind::kOriginOnBackground: return "OriginOnBackground";
    case ErrorKind::kInfeasibleLayout: return "InfeasibleLayout";
    case ErrorKind::kMissingTerm: return "MissingTerm";
    case ErrorKind::kNoGroundTruth: return "NoGroundTruth";
    case ErrorKind::kConfig: return "ConfigError";
    case ErrorKind::kParse: return "ParseError";
    case ErrorKind::kIo: return "IoError";
  }
  return "Unknown";
}

std::string to_string(Shape shape) {
  return std::to_string(shape.height) + "x" + std::to_string(shape.width);
}

VectorField::VectorField(Shape shape, std::size_t dim, std::vector<double> data)
    : shape_(shape), dim_(dim), data_(std::move(data)) {
  if (shape.width < 1 || shape.height < 1 || dim < 1) {
    throw Error(ErrorKind::kInvalidArgument,
                "vector field needs positive width, height and dimension");
  }
  if (data_.size() != shape.size() * dim) {
    throw Error(ErrorKind::kInvalidArgument,
                "vector field holds " + std::to_string(data_.size()) +
                    " values, expected " +
                    std::to_string(shape.size() * dim));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "vector field contains a non-finite component");
    }
  }
}

VectorField VectorField::zeros(Shape shape, std::size_t dim) {
  return VectorField(shape, dim, std::vector<double>(shape.size() * dim, 0.0));
}

EmbeddingField::EmbeddingField(Shape shape, std::size_t dim,
                               std::vector<double> data, bool normalized,
                               const BinaryMask* foreground)
    : VectorField(shape, dim, std::move(data)), normalized_(normalized) {
  if (!normalized_) return;
  if (foreground != nullptr) validate_shapes(shape, foreground->shape());
  for (std::size_t p = 0; p < pixels(); ++p) {
    if (foreground != nullptr && (*foreground)[p] == 0) continue;
    double sq = 0.0;
    for (double v : at(p)) sq += v * v;
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) {
      throw Error(ErrorKind::kInvalidArgument,
                  "field marked normalized has a vector of norm " +
                      std::to_string(std::sqrt(sq)) + " at pixel " +
                      std::to_string(p));
    }
  }
}

LabelMap::LabelMap(Grid2D<std::int32_t> grid) : grid_(std::move(grid)) {
  std::int32_t max_id = 0;
  for (std::int32_t id : grid_.values()) {
    if (id < 0) {
      throw Error(ErrorKind::kInvalidArgument, "negative instance ID");
    }
    max_id = std::max(max_id, id);
  }
  std::vector<bool> seen(static_cast<std::size_t>(max_id) + 1, false);
  for (std::int32_t id : grid_.values()) seen[id] = true;
  for (std::int32_t id = 1; id <= max_id; ++id) {
    if (!seen[id]) {
      throw Error(ErrorKind::kInvalidArgument,
                  "instance IDs are not contiguous: " + std::to_string(id) +
                      " is missing below " + std::to_string(max_id));
    }
  }
  num_instances_ = static_cast<std::size_t>(max_id);
}

ProbMap::ProbMap(Grid2D<double> grid) : grid_(std::move(grid)) {
  for (double v : grid_.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "probability outside [0,1]: " + std::to_string(v));
    }
  }
}

BinaryMask::BinaryMask(Grid2D<std::uint8_t> grid) : grid_(std::move(grid)) {
  for (std::uint8_t v : grid_.values()) {
    if (v > 1) {
      throw Error(ErrorKind::kInvalidArgument, "binary mask value not 0/1");
    }
  }
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(
      std::count(grid_.values().begin(), grid_.values().end(), 1));
}

BinaryMask foreground_of(const LabelMap& labels) {
  std::vector<std::uint8_t> values(labels.shape().size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = labels[i] != 0 ? 1 : 0;
  }
  return BinaryMask(Grid2D<std::uint8_t>(labels.shape().width,
                                         labels.shape().height,
                                         std::move(values)));
}

void validate_shapes(Shape a, Shape b) {
  if (a != b) {
    throw Error(ErrorKind::kDimensionMismatch,
                "shape mismatch: " + to_string(a) + " vs " + to_string(b));
  }
}

LabelMap relabel_contiguous(const Grid2D<std::int32_t>& raw) {
  std::map<std::int32_t, std::int32_t> remap;
  for (std::int32_t id : raw.values()) {
    if (id < 0) {
      throw Error(ErrorKind::kInvalidArgument, "negative instance ID");
    }
    if (id != 0) remap.emplace(id, 0);
  }
  std::int32_t next = 1;
  for (auto& [from, to] : remap) to = next++;
  std::vector<std::int32_t> values(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    values[i] = raw[i] == 0 ? 0 : remap.at(raw[i]);
  }
  return LabelMap(Grid2D<std::int32_t>(raw.width(), raw.height(),
                                       std::move(values)));
}

LabelMap relabel_contiguous(const LabelMap& labels) {
  return relabel_contiguous(labels.grid());
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next() { return engine_(); }

double Rng::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw Error(ErrorKind::kInvalidArgument, "Rng::below(0)");
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = next();
  while (x >= limit) x = next();
  return x % n;
}

}  // namespace instseg
