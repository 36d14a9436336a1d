// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "instseg/config.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "instseg/io.hpp"

namespace instseg {
namespace {

using nlohmann::json;

std::size_t line_of(std::string_view text, std::size_t pos) {
  pos = std::min(pos, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + pos, '\n'));
}

// Position of `"key"` used as an object key at or after `from`.
std::size_t find_key(std::string_view text, std::string_view key, std::size_t from) {
  const std::string quoted = "\"" + std::string(key) + "\"";
  for (std::size_t pos = text.find(quoted, from); pos != std::string_view::npos;
       pos = text.find(quoted, pos + 1)) {
    std::size_t after = pos + quoted.size();
    while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) {
      ++after;
    }
    if (after < text.size() && text[after] == ':') return pos;
  }
  return std::string_view::npos;
}

class Section {
 public:
  Section(std::string_view text, const json& root, std::string name)
      : text_(text), name_(std::move(name)) {
    const auto it = root.find(name_);
    if (it == root.end()) return;
    start_ = find_key(text_, name_, 0);
    if (!it->is_object()) fail(start_, "section '" + name_ + "' must be an object");
    obj_ = &*it;
  }

  bool has(const std::string& key) const {
    return obj_ != nullptr && obj_->contains(key);
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (obj_ == nullptr) return;
    const auto it = obj_->find(key);
    if (it == obj_->end()) return;
    convert(key, *it, out);
  }

  // Rejects keys that no read() asked for.
  void finish() const {
    if (obj_ == nullptr) return;
    for (const auto& [key, value] : obj_->items()) {
      if (!seen_.contains(key)) {
        fail(key_pos(key), "unknown key '" + name_ + "." + key + "'");
      }
    }
  }

  // Runs a module validator and reports its message against this section.
  template <typename F>
  void check(F&& validate) const {
    try {
      validate();
    } catch (const Error& e) {
      fail(start_, "invalid section '" + name_ + "': " + e.what());
    }
  }

  [[noreturn]] void fail_key(const std::string& key, const std::string& what) const {
    fail(key_pos(key), what);
  }

 private:
  std::size_t key_pos(const std::string& key) const {
    const std::size_t from = start_ == std::string_view::npos ? 0 : start_;
    return find_key(text_, key, from);
  }

  [[noreturn]] void fail(std::size_t pos, const std::string& what) const {
    std::string msg = "config";
    if (pos != std::string_view::npos) msg += ":" + std::to_string(line_of(text_, pos));
    throw Error(ErrorKind::kConfig, msg + ": " + what);
  }

  void type_error(const std::string& key, const char* expected) const {
    fail_key(key, "'" + name_ + "." + key + "' must be " + expected);
  }

  void convert(const std::string& key, const json& v, double& out) const {
    if (!v.is_number()) type_error(key, "a number");
    out = v.get<double>();
  }
  void convert(const std::string& key, const json& v, std::size_t& out) const {
    if (!v.is_number_unsigned()) type_error(key, "a non-negative integer");
    out = v.get<std::size_t>();
  }
  void convert(const std::string& key, const json& v, bool& out) const {
    if (!v.is_boolean()) type_error(key, "true or false");
    out = v.get<bool>();
  }
  void convert(const std::string& key, const json& v, std::string& out) const {
    if (!v.is_string()) type_error(key, "a string");
    out = v.get<std::string>();
  }
  void convert(const std::string& key, const json& v, std::vector<std::size_t>& out) const {
    if (!v.is_array()) type_error(key, "an array of non-negative integers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number_unsigned()) type_error(key, "an array of non-negative integers");
      out.push_back(e.get<std::size_t>());
    }
  }
  void convert(const std::string& key, const json& v, std::vector<std::int32_t>& out) const {
    if (!v.is_array()) type_error(key, "an array of integers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number_integer()) type_error(key, "an array of integers");
      const auto x = e.get<std::int64_t>();
      if (x < INT32_MIN || x > INT32_MAX) type_error(key, "an array of 32-bit integers");
      out.push_back(static_cast<std::int32_t>(x));
    }
  }
  void convert(const std::string& key, const json& v, std::optional<PixelCoord>& out) const {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() ||
        !v[1].is_number_integer()) {
      type_error(key, "an array [y, x] of integers");
    }
    out = PixelCoord{v[0].get<std::int64_t>(), v[1].get<std::int64_t>()};
  }

  std::string_view text_;
  std::string name_;
  const json* obj_ = nullptr;
  std::size_t start_ = std::string_view::npos;
  std::set<std::string> seen_;
};

template <typename E, typename Parse>
void read_enum(Section& s, const std::string& key, E& out, Parse parse) {
  std::string name;
  s.read(key, name);
  if (!s.has(key)) return;
  try {
    out = parse(name);
  } catch (const Error& e) {
    s.fail_key(key, e.what());
  }
}

}  // namespace

void MetricsConfig::validate() const {
  if (classes.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "classes must not be empty");
  }
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "iou_threshold must be in (0, 1]");
  }
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "score_threshold must be in [0, 1]");
  }
}

void TraceConfig::validate() const {
  if (kernel_size % 2 == 0 || kernel_size == 0) {
    throw Error(ErrorKind::kInvalidArgument, "kernel_size must be odd");
  }
  if (levels < 1 || levels > 6) {
    throw Error(ErrorKind::kInvalidArgument, "levels must be in [1, 6]");
  }
  if (!strides.empty() && strides.size() != levels) {
    throw Error(ErrorKind::kInvalidArgument, "strides needs one entry per level");
  }
  for (std::size_t s : strides) {
    if (s == 0) throw Error(ErrorKind::kInvalidArgument, "strides must be positive");
  }
}

void RunConfig::apply_seed(std::uint64_t seed) {
  scene.seed = seed;
  embedding.optimizer.seed = seed;
  detections.seed = seed;
}

RunConfig parse_run_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kConfig, "config:" + std::to_string(line_of(text, e.byte == 0 ? 0 : e.byte - 1)) +
                                        ": malformed JSON: " + e.what());
  }
  if (!root.is_object()) {
    throw Error(ErrorKind::kConfig, "config:1: top level must be an object");
  }
  static const std::set<std::string> kSections = {
      "scene", "loss", "optimizer", "cluster", "metrics", "detections", "trace", "output_dir"};
  for (const auto& [key, value] : root.items()) {
    if (!kSections.contains(key)) {
      const std::size_t pos = find_key(text, key, 0);
      throw Error(ErrorKind::kConfig, "config:" + std::to_string(line_of(text, pos)) +
                                          ": unknown section '" + key + "'");
    }
  }

  RunConfig cfg;

  Section scene(text, root, "scene");
  scene.read("width", cfg.scene.width);
  scene.read("height", cfg.scene.height);
  scene.read("num_instances", cfg.scene.num_instances);
  read_enum(scene, "layout", cfg.scene.layout, layout_from_string);
  scene.read("gap_pixels", cfg.scene.gap_pixels);
  scene.read("seed", cfg.scene.seed);
  scene.read("lane_thickness", cfg.scene.lane_thickness);
  scene.finish();
  scene.check([&] { cfg.scene.validate(); });

  Section loss(text, root, "loss");
  loss.read("alpha", cfg.loss.alpha);
  loss.read("beta", cfg.loss.beta);
  loss.read("gamma", cfg.loss.gamma);
  loss.read("delta_v", cfg.loss.delta_v);
  loss.read("delta_d", cfg.loss.delta_d);
  loss.read("dice_smooth", cfg.seg_loss.dice_smooth);
  loss.read("bce_clamp", cfg.seg_loss.bce_clamp);
  loss.finish();
  loss.check([&] {
    cfg.loss.validate();
    cfg.seg_loss.validate();
  });

  Section opt(text, root, "optimizer");
  auto& o = cfg.embedding.optimizer;
  opt.read("dim", cfg.embedding.dim);
  opt.read("step_size", o.step_size);
  opt.read("max_steps", o.max_steps);
  opt.read("loss_tolerance", o.loss_tolerance);
  opt.read("seed", o.seed);
  opt.read("init_scale", o.init_scale);
  read_enum(opt, "manifold", o.manifold, manifold_from_string);
  opt.finish();
  opt.check([&] {
    if (cfg.embedding.dim < 1 || cfg.embedding.dim > 64) {
      throw Error(ErrorKind::kInvalidArgument, "dim must be in [1, 64]");
    }
    o.validate();
  });

  Section cl(text, root, "cluster");
  cl.read("kappa", cfg.cluster.kappa);
  cl.read("max_iters", cfg.cluster.max_iters);
  cl.read("shift_tolerance", cfg.cluster.shift_tolerance);
  cl.read("merge_tolerance", cfg.cluster.merge_tolerance);
  cl.read("seed_stride", cfg.cluster.seed_stride);
  cl.read("min_cluster_pixels", cfg.cluster.min_cluster_pixels);
  cl.read("parallel", cfg.cluster.parallel);
  cl.finish();
  cl.check([&] { cfg.cluster.validate(); });

  Section met(text, root, "metrics");
  met.read("classes", cfg.metrics.classes);
  met.read("iou_threshold", cfg.metrics.iou_threshold);
  met.read("score_threshold", cfg.metrics.score_threshold);
  met.finish();
  met.check([&] { cfg.metrics.validate(); });

  Section det(text, root, "detections");
  auto& n = cfg.detections.noise;
  det.read("shift_px", n.shift_px);
  det.read("drop_prob", n.drop_prob);
  det.read("spurious_count", n.spurious_count);
  read_enum(det, "score_model", n.score_model, score_model_from_string);
  det.read("seed", cfg.detections.seed);
  det.finish();
  n.width = cfg.scene.width;
  n.height = cfg.scene.height;
  det.check([&] { n.validate(); });

  Section tr(text, root, "trace");
  tr.read("kernel_size", cfg.trace.kernel_size);
  tr.read("levels", cfg.trace.levels);
  tr.read("strides", cfg.trace.strides);
  tr.read("origin", cfg.trace.origin);
  tr.finish();
  tr.check([&] { cfg.trace.validate(); });

  if (const auto it = root.find("output_dir"); it != root.end()) {
    if (!it->is_string() || it->get<std::string>().empty()) {
      throw Error(ErrorKind::kConfig,
                  "config:" + std::to_string(line_of(text, find_key(text, "output_dir", 0))) +
                      ": output_dir must be a non-empty string");
    }
    cfg.output_dir = it->get<std::string>();
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  try {
    return parse_run_config(text);
  } catch (const Error& e) {
    // Prefix the file name: "config:12: ..." -> "path:12: ...".
    std::string msg = e.what();
    if (msg.rfind("config", 0) == 0) msg = path.string() + msg.substr(6);
    throw Error(e.kind(), msg);
  }
}

json to_json(const RunConfig& cfg) {
  json trace = {{"kernel_size", cfg.trace.kernel_size},
                {"levels", cfg.trace.levels},
                {"strides", cfg.trace.strides}};
  if (cfg.trace.origin) trace["origin"] = {cfg.trace.origin->y, cfg.trace.origin->x};
  const auto& o = cfg.embedding.optimizer;
  const auto& n = cfg.detections.noise;
  return {
      {"scene",
       {{"width", cfg.scene.width},
        {"height", cfg.scene.height},
        {"num_instances", cfg.scene.num_instances},
        {"layout", to_string(cfg.scene.layout)},
        {"gap_pixels", cfg.scene.gap_pixels},
        {"seed", cfg.scene.seed},
        {"lane_thickness", cfg.scene.lane_thickness}}},
      {"loss",
       {{"alpha", cfg.loss.alpha},
        {"beta", cfg.loss.beta},
        {"gamma", cfg.loss.gamma},
        {"delta_v", cfg.loss.delta_v},
        {"delta_d", cfg.loss.delta_d},
        {"dice_smooth", cfg.seg_loss.dice_smooth},
        {"bce_clamp", cfg.seg_loss.bce_clamp}}},
      {"optimizer",
       {{"dim", cfg.embedding.dim},
        {"step_size", o.step_size},
        {"max_steps", o.max_steps},
        {"loss_tolerance", o.loss_tolerance},
        {"seed", o.seed},
        {"init_scale", o.init_scale},
        {"manifold", to_string(o.manifold)}}},
      {"cluster",
       {{"kappa", cfg.cluster.kappa},
        {"max_iters", cfg.cluster.max_iters},
        {"shift_tolerance", cfg.cluster.shift_tolerance},
        {"merge_tolerance", cfg.cluster.merge_tolerance},
        {"seed_stride", cfg.cluster.seed_stride},
        {"min_cluster_pixels", cfg.cluster.min_cluster_pixels},
        {"parallel", cfg.cluster.parallel}}},
      {"metrics",
       {{"classes", cfg.metrics.classes},
        {"iou_threshold", cfg.metrics.iou_threshold},
        {"score_threshold", cfg.metrics.score_threshold}}},
      {"detections",
       {{"shift_px", n.shift_px},
        {"drop_prob", n.drop_prob},
        {"spurious_count", n.spurious_count},
        {"score_model", to_string(n.score_model)},
        {"seed", cfg.detections.seed}}},
      {"trace", trace},
  };
}

}  // namespace instseg
