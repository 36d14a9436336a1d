// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Grid and field types shared by every module. All types validate their
// invariants at construction and are read-only afterwards.

#ifndef INSTSEG_CORE_HPP_
#define INSTSEG_CORE_HPP_

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace instseg {

enum class ErrorKind {
  kInvalidArgument,
  kDimensionMismatch,
  kEmptyInstance,
  kNonFiniteLoss,
  kDegenerateVector,
  kDegenerateShift,
  kEmptyForeground,
  kOriginOnBackground,
  kInfeasibleLayout,
  kMissingTerm,
  kNoGroundTruth,
  kConfig,
  kParse,
  kIo,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct Shape {
  std::size_t width = 0;
  std::size_t height = 0;

  std::size_t size() const { return width * height; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(Shape shape);

// Row-major dense grid.
template <typename V>
class Grid2D {
 public:
  Grid2D() = default;
  Grid2D(std::size_t width, std::size_t height, std::vector<V> values)
      : shape_{width, height}, values_(std::move(values)) {
    if (width < 1 || height < 1) {
      throw Error(ErrorKind::kInvalidArgument, "grid must be at least 1x1");
    }
    if (values_.size() != width * height) {
      throw Error(ErrorKind::kInvalidArgument,
                  "grid value count " + std::to_string(values_.size()) +
                      " does not match " + to_string(shape_));
    }
  }
  Grid2D(std::size_t width, std::size_t height, V fill = V{})
      : Grid2D(width, height, std::vector<V>(width * height, fill)) {}

  Shape shape() const { return shape_; }
  std::size_t width() const { return shape_.width; }
  std::size_t height() const { return shape_.height; }
  std::size_t size() const { return values_.size(); }

  const V& at(std::size_t y, std::size_t x) const {
    return values_[y * shape_.width + x];
  }
  const V& operator[](std::size_t i) const { return values_[i]; }
  std::span<const V> values() const { return values_; }

  bool operator==(const Grid2D&) const = default;

 private:
  Shape shape_;
  std::vector<V> values_;
};

// Dense H x W x D field of reals, pixel-major.
class VectorField {
 public:
  VectorField() = default;
  VectorField(Shape shape, std::size_t dim, std::vector<double> data);
  static VectorField zeros(Shape shape, std::size_t dim);

  Shape shape() const { return shape_; }
  std::size_t dim() const { return dim_; }
  std::size_t pixels() const { return shape_.size(); }

  std::span<const double> at(std::size_t pixel) const {
    return {data_.data() + pixel * dim_, dim_};
  }
  std::span<const double> at(std::size_t y, std::size_t x) const {
    return at(y * shape_.width + x);
  }
  std::span<const double> data() const { return data_; }

  bool operator==(const VectorField&) const = default;

 protected:
  Shape shape_;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

// Per-pixel gradient of a scalar loss with respect to each embedding.
using GradientField = VectorField;

inline constexpr std::size_t kDefaultEmbeddingDim = 8;

class BinaryMask;

class EmbeddingField : public VectorField {
 public:
  EmbeddingField() = default;
  // `normalized` is checked against `foreground` when given, against every
  // pixel otherwise.
  EmbeddingField(Shape shape, std::size_t dim, std::vector<double> data,
                 bool normalized = false,
                 const BinaryMask* foreground = nullptr);

  bool normalized() const { return normalized_; }

  bool operator==(const EmbeddingField&) const = default;

 private:
  bool normalized_ = false;
};

class LabelMap {
 public:
  LabelMap() = default;
  // Requires non-zero IDs to form exactly {1..C}.
  explicit LabelMap(Grid2D<std::int32_t> grid);

  Shape shape() const { return grid_.shape(); }
  const Grid2D<std::int32_t>& grid() const { return grid_; }
  std::int32_t at(std::size_t y, std::size_t x) const { return grid_.at(y, x); }
  std::int32_t operator[](std::size_t i) const { return grid_[i]; }
  std::size_t num_instances() const { return num_instances_; }

  bool operator==(const LabelMap&) const = default;

 private:
  Grid2D<std::int32_t> grid_;
  std::size_t num_instances_ = 0;
};

class ProbMap {
 public:
  ProbMap() = default;
  explicit ProbMap(Grid2D<double> grid);

  Shape shape() const { return grid_.shape(); }
  const Grid2D<double>& grid() const { return grid_; }
  double operator[](std::size_t i) const { return grid_[i]; }

 private:
  Grid2D<double> grid_;
};

class BinaryMask {
 public:
  BinaryMask() = default;
  explicit BinaryMask(Grid2D<std::uint8_t> grid);

  Shape shape() const { return grid_.shape(); }
  const Grid2D<std::uint8_t>& grid() const { return grid_; }
  std::uint8_t at(std::size_t y, std::size_t x) const {
    return grid_.at(y, x);
  }
  std::uint8_t operator[](std::size_t i) const { return grid_[i]; }
  std::size_t count() const;

  bool operator==(const BinaryMask&) const = default;

 private:
  Grid2D<std::uint8_t> grid_;
};

// Foreground of a label map (ID != 0).
BinaryMask foreground_of(const LabelMap& labels);

template <typename T>
concept Shaped = requires(const T& t) {
  { t.shape() } -> std::convertible_to<Shape>;
};

void validate_shapes(Shape a, Shape b);

template <Shaped A, Shaped B>
void validate_pair(const A& a, const B& b) {
  validate_shapes(a.shape(), b.shape());
}

// Order-preserving remap of non-zero IDs onto {1..C}. Negative IDs throw.
LabelMap relabel_contiguous(const Grid2D<std::int32_t>& raw);
LabelMap relabel_contiguous(const LabelMap& labels);

// Deterministic 64-bit generator with platform-independent conversions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace instseg

#endif  // INSTSEG_CORE_HPP_
