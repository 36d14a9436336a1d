// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "instseg/io.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace instseg::io {
namespace {

[[noreturn]] void parse_error(const std::string& what) {
  throw Error(ErrorKind::kParse, what);
}

class PgmHeaderReader {
 public:
  explicit PgmHeaderReader(std::string_view bytes) : bytes_(bytes) {}

  std::size_t next_number() {
    skip_space_and_comments();
    std::size_t start = pos_;
    std::size_t value = 0;
    while (pos_ < bytes_.size() &&
           std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (value > (1u << 24)) parse_error("PGM header value too large");
      ++pos_;
    }
    if (pos_ == start) parse_error("malformed PGM header");
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() ||
        !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      parse_error("malformed PGM header");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 2;
};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  }
  return v;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
}

std::string encode_pgm(const Grid2D<std::uint8_t>& image) {
  std::string out = "P5\n" + std::to_string(image.width()) + " " +
                    std::to_string(image.height()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.values().data()), image.size());
  return out;
}

Grid2D<std::uint8_t> decode_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    parse_error("not a binary PGM (P5) file");
  }
  PgmHeaderReader header(bytes);
  const std::size_t width = header.next_number();
  const std::size_t height = header.next_number();
  const std::size_t maxval = header.next_number();
  if (width < 1 || height < 1) parse_error("PGM with empty raster");
  if (maxval < 1 || maxval > 255) parse_error("only 8-bit PGM is supported");
  const std::size_t start = header.raster_start();
  if (bytes.size() - std::min(start, bytes.size()) != width * height) {
    parse_error("PGM raster size does not match its header");
  }
  std::vector<std::uint8_t> values(width * height);
  std::memcpy(values.data(), bytes.data() + start, values.size());
  return Grid2D<std::uint8_t>(width, height, std::move(values));
}

std::string encode_mask(const BinaryMask& mask) {
  std::vector<std::uint8_t> v(mask.shape().size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = mask[i] ? 255 : 0;
  return encode_pgm(Grid2D<std::uint8_t>(mask.shape().width, mask.shape().height, std::move(v)));
}

BinaryMask decode_mask(std::string_view bytes) {
  const auto img = decode_pgm(bytes);
  std::vector<std::uint8_t> v(img.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = img[i] != 0 ? 1 : 0;
  return BinaryMask(Grid2D<std::uint8_t>(img.width(), img.height(), std::move(v)));
}

std::string encode_labels(const LabelMap& labels) {
  if (labels.num_instances() > 255) {
    throw Error(ErrorKind::kInvalidArgument, "more than 255 instances");
  }
  std::vector<std::uint8_t> v(labels.shape().size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::uint8_t>(labels[i]);
  return encode_pgm(Grid2D<std::uint8_t>(labels.shape().width, labels.shape().height, std::move(v)));
}

LabelMap decode_labels(std::string_view bytes) {
  const auto img = decode_pgm(bytes);
  std::vector<std::int32_t> v(img.values().begin(), img.values().end());
  return relabel_contiguous(Grid2D<std::int32_t>(img.width(), img.height(), std::move(v)));
}

std::string encode_instances(const Grid2D<std::int32_t>& assignment) {
  std::vector<std::uint8_t> v(assignment.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (assignment[i] < -1 || assignment[i] > 254) {
      throw Error(ErrorKind::kInvalidArgument, "cluster index out of 8-bit range");
    }
    v[i] = static_cast<std::uint8_t>(assignment[i] + 1);
  }
  return encode_pgm(Grid2D<std::uint8_t>(assignment.width(), assignment.height(), std::move(v)));
}

Grid2D<std::int32_t> decode_instances(std::string_view bytes) {
  const auto img = decode_pgm(bytes);
  std::vector<std::int32_t> v(img.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::int32_t>(img[i]) - 1;
  return Grid2D<std::int32_t>(img.width(), img.height(), std::move(v));
}

std::string encode_embeddings(const VectorField& field) {
  std::string out = "EMBF";
  put_u32(out, static_cast<std::uint32_t>(field.shape().height));
  put_u32(out, static_cast<std::uint32_t>(field.shape().width));
  put_u32(out, static_cast<std::uint32_t>(field.dim()));
  out.reserve(out.size() + field.data().size() * 4);
  for (double v : field.data()) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

VectorField decode_embeddings(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 4) != "EMBF") {
    parse_error("not an EMBF embedding file");
  }
  const std::size_t h = get_u32(bytes, 4);
  const std::size_t w = get_u32(bytes, 8);
  const std::size_t d = get_u32(bytes, 12);
  if (h == 0 || w == 0 || d == 0) parse_error("EMBF header has a zero extent");
  if ((bytes.size() - 16) / 4 != h * w * d || (bytes.size() - 16) % 4 != 0) {
    parse_error("EMBF payload size does not match its header");
  }
  std::vector<double> data(h * w * d);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float f = std::bit_cast<float>(get_u32(bytes, 16 + 4 * i));
    if (!std::isfinite(f)) parse_error("EMBF payload has a non-finite value");
    data[i] = f;
  }
  return VectorField({w, h}, d, std::move(data));
}

nlohmann::json to_json(const std::vector<DetectionSet>& sets) {
  nlohmann::json images = nlohmann::json::array();
  for (const auto& set : sets) {
    nlohmann::json dets = nlohmann::json::array();
    for (const auto& d : set.detections) {
      nlohmann::json j = {{"box", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}},
                          {"class_id", d.class_id}};
      if (d.score) j["score"] = *d.score;
      dets.push_back(std::move(j));
    }
    images.push_back({{"image_id", set.image_id}, {"detections", std::move(dets)}});
  }
  return {{"images", std::move(images)}};
}

std::vector<DetectionSet> detections_from_json(const nlohmann::json& doc) {
  std::vector<DetectionSet> sets;
  try {
    for (const auto& img : doc.at("images")) {
      DetectionSet set;
      set.image_id = img.at("image_id").get<std::int64_t>();
      for (const auto& j : img.at("detections")) {
        const auto& b = j.at("box");
        if (!b.is_array() || b.size() != 4) parse_error("box must have 4 numbers");
        Detection d;
        d.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                 b[3].get<double>()};
        d.class_id = j.at("class_id").get<std::int32_t>();
        if (j.contains("score")) d.score = j["score"].get<double>();
        d.validate();
        set.detections.push_back(d);
      }
      sets.push_back(std::move(set));
    }
  } catch (const nlohmann::json::exception& e) {
    parse_error(std::string("malformed detection file: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kParse) throw;
    parse_error(std::string("invalid detection: ") + e.what());
  }
  return sets;
}

nlohmann::json to_json(const OptimizationTrace& trace) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : trace.steps) {
    steps.push_back({{"l_var", s.l_var}, {"l_dist", s.l_dist},
                     {"l_reg", s.l_reg}, {"total", s.total}});
  }
  return {{"steps_taken", trace.steps_taken}, {"steps", std::move(steps)}};
}

nlohmann::json to_json(const ClusterResult& result) {
  return {{"num_clusters", result.num_clusters},
          {"modes", result.modes},
          {"populations", result.populations}};
}

std::string trace_to_csv(const ReceptiveTrace& trace) {
  std::string out = "level,y,x\n";
  for (std::size_t l = trace.level_points.size(); l-- > 0;) {
    for (const auto& p : trace.level_points[l]) {
      out += fmt::format("{},{},{}\n", l + 1, p.y, p.x);
    }
  }
  return out;
}

std::string dump(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

}  // namespace instseg::io
