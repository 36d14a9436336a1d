// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "instseg/commands.hpp"

#include <cstdlib>
#include <iostream>
#include <numeric>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "instseg/deform_sample.hpp"
#include "instseg/embed_opt.hpp"
#include "instseg/io.hpp"
#include "instseg/metrics.hpp"
#include "instseg/scenegen.hpp"
#include "instseg/vmf_cluster.hpp"

namespace instseg::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path prepare_output(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec || !fs::is_directory(cfg.output_dir)) {
    throw Error(ErrorKind::kIo, "cannot create output directory " +
                                    cfg.output_dir.string());
  }
  return cfg.output_dir;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, e.what());
  }
}

json read_json(const fs::path& path) {
  const std::string text = io::read_file(path);
  try {
    return parse_json(text);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::vector<DetectionSet> detections_from_text(const std::string& text) {
  return io::detections_from_json(parse_json(text));
}

// Decode helpers that name the offending file in parse errors.
template <typename F>
auto decode_file(const fs::path& path, F decode) {
  const std::string bytes = io::read_file(path);
  try {
    return decode(bytes);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIo) throw;
    throw Error(e.kind() == ErrorKind::kParse ? ErrorKind::kParse : e.kind(),
                path.string() + ": " + e.what());
  }
}

json mask_report(const BinaryMask& pred, const BinaryMask& gt) {
  const ConfusionCounts c = pixel_confusion(pred, gt);
  const MetricValue iou = seg_iou(c);
  return {{"iou", iou.value}, {"iou_empty", iou.empty_convention},
          {"accuracy", pixel_accuracy(c)}};
}

json detection_report(const RunConfig& cfg, const std::vector<DetectionSet>& preds,
                      const std::vector<DetectionSet>& gts) {
  const MetricValue m = map_50_95(preds, gts, cfg.metrics.classes);
  json out = {{"map_50_95", m.value}, {"map_empty", m.empty_convention}};
  try {
    out["recall"] = detection_recall(preds, gts, cfg.metrics.classes,
                                     cfg.metrics.iou_threshold,
                                     cfg.metrics.score_threshold);
    out["recall_empty"] = false;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNoGroundTruth) throw;
    out["recall"] = nullptr;
    out["recall_empty"] = true;
  }
  return out;
}

json instance_report(const Grid2D<std::int32_t>& assignment, const LabelMap& gt) {
  const MetricValue m = instance_map50(assignment, gt);
  const std::vector<double> ious = best_instance_ious(assignment, gt);
  const double mean = ious.empty() ? 1.0
                                   : std::accumulate(ious.begin(), ious.end(), 0.0) /
                                         static_cast<double>(ious.size());
  std::int32_t max_index = -1;
  for (std::int32_t a : assignment.values()) max_index = std::max(max_index, a);
  return {{"map50", m.value},
          {"map50_empty", m.empty_convention},
          {"num_predicted", max_index + 1},
          {"num_ground_truth", gt.num_instances()},
          {"instance_ious", ious},
          {"mean_iou", mean}};
}

void set_log_level() {
  auto logger = spdlog::get("instseg");
  if (!logger) logger = spdlog::stderr_logger_st("instseg");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("INSTANCE_EMBED_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") {
      spdlog::warn("INSTANCE_EMBED_LOG={} is not one of error, info, debug", level);
    }
  }
}

}  // namespace

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo:
      return kExitIo;
    case ErrorKind::kNonFiniteLoss:
    case ErrorKind::kDegenerateVector:
    case ErrorKind::kDegenerateShift:
      return kExitNumerical;
    case ErrorKind::kEmptyForeground:
    case ErrorKind::kEmptyInstance:
    case ErrorKind::kNoGroundTruth:
      return kExitEmptyInput;
    default:
      return kExitConfig;
  }
}

void cmd_gen(const RunConfig& cfg) {
  const fs::path out = prepare_output(cfg);
  const Scene scene = gen_scene(cfg.scene);
  io::write_file(out / "labels.pgm", io::encode_labels(scene.labels));
  io::write_file(out / "drivable.pgm", io::encode_mask(scene.drivable_mask));
  io::write_file(out / "lanes.pgm", io::encode_mask(scene.lane_mask));
  io::write_file(out / "boxes.json", io::dump(io::to_json({scene.gt_boxes})));

  std::vector<std::size_t> pixels(scene.labels.num_instances(), 0);
  for (std::int32_t id : scene.labels.grid().values()) {
    if (id > 0) ++pixels[static_cast<std::size_t>(id - 1)];
  }
  const json info = {{"scene", to_json(cfg)["scene"]},
                     {"num_instances", scene.labels.num_instances()},
                     {"instance_pixels", pixels},
                     {"lane_pixels", scene.lane_mask.count()}};
  io::write_file(out / "scene.json", io::dump(info));
  spdlog::info("gen: {} instances, {}x{}", scene.labels.num_instances(),
               cfg.scene.width, cfg.scene.height);
}

void cmd_optimize(const RunConfig& cfg, const fs::path& labels_path) {
  const LabelMap labels = decode_file(labels_path, io::decode_labels);
  const fs::path out = prepare_output(cfg);
  const OptimizationTrace trace = optimize_embeddings(
      labels, cfg.embedding.dim, cfg.loss, cfg.embedding.optimizer);
  io::write_file(out / "embeddings.embf", io::encode_embeddings(trace.final_field));
  io::write_file(out / "trace.json", io::dump(io::to_json(trace)));
  const double final_total = trace.steps.empty() ? 0.0 : trace.steps.back().total;
  spdlog::info("optimize: {} steps, final loss {}", trace.steps_taken, final_total);
}

void cmd_cluster(const RunConfig& cfg, const fs::path& embeddings_path,
                 const fs::path& mask_path) {
  const VectorField raw = decode_file(embeddings_path, io::decode_embeddings);
  const BinaryMask mask = decode_file(mask_path, io::decode_mask);
  validate_pair(raw, mask);
  if (mask.count() == 0) {
    throw Error(ErrorKind::kEmptyForeground, "drivable mask is empty");
  }
  const fs::path out = prepare_output(cfg);
  const EmbeddingField emb(raw.shape(), raw.dim(),
                           std::vector<double>(raw.data().begin(), raw.data().end()));
  const ClusterResult result = cluster_field(normalize_field(emb, mask), mask, cfg.cluster);
  io::write_file(out / "instances.pgm", io::encode_instances(result.assignment));
  io::write_file(out / "modes.json", io::dump(io::to_json(result)));
  spdlog::info("cluster: {} clusters", result.num_clusters);
}

void cmd_eval(const RunConfig& cfg, const EvalInputs& in) {
  const auto pair_given = [](const auto& a, const auto& b, const char* what) {
    if (a.has_value() != b.has_value()) {
      throw Error(ErrorKind::kConfig,
                  std::string("eval needs both prediction and ground truth for ") + what);
    }
    return a.has_value();
  };
  json report = json::object();
  if (pair_given(in.pred_drivable, in.gt_drivable, "drivable")) {
    report["drivable"] = mask_report(decode_file(*in.pred_drivable, io::decode_mask),
                                     decode_file(*in.gt_drivable, io::decode_mask));
  }
  if (pair_given(in.pred_lanes, in.gt_lanes, "lanes")) {
    report["lanes"] = mask_report(decode_file(*in.pred_lanes, io::decode_mask),
                                  decode_file(*in.gt_lanes, io::decode_mask));
  }
  if (pair_given(in.pred_boxes, in.gt_boxes, "boxes")) {
    const auto preds = decode_file(*in.pred_boxes, detections_from_text);
    const auto gts = decode_file(*in.gt_boxes, detections_from_text);
    report["detection"] = detection_report(cfg, preds, gts);
  }
  if (pair_given(in.pred_instances, in.gt_labels, "instances")) {
    report["instances"] =
        instance_report(decode_file(*in.pred_instances, io::decode_instances),
                        decode_file(*in.gt_labels, io::decode_labels));
  }
  if (report.empty()) {
    throw Error(ErrorKind::kConfig, "eval needs at least one prediction/ground-truth pair");
  }
  const fs::path out = prepare_output(cfg);
  io::write_file(out / "metrics.json", io::dump(report));
  spdlog::info("eval: {} metric groups", report.size());
}

void cmd_trace(const RunConfig& cfg, const std::vector<fs::path>& offsets) {
  const KernelGrid kernel(cfg.trace.kernel_size);
  std::vector<OffsetField> stack;
  Shape shape{cfg.scene.width, cfg.scene.height};
  if (offsets.empty()) {
    for (std::size_t l = 0; l < cfg.trace.levels; ++l) {
      stack.push_back(OffsetField::zeros(shape, kernel));
    }
  } else {
    for (const auto& p : offsets) {
      stack.emplace_back(kernel, decode_file(p, io::decode_embeddings));
    }
    shape = stack.front().shape();
  }
  const PixelCoord origin = cfg.trace.origin.value_or(
      PixelCoord{static_cast<std::int64_t>(shape.height / 2),
                 static_cast<std::int64_t>(shape.width / 2)});
  const ReceptiveTrace trace =
      trace_receptive_field(stack, kernel, origin, cfg.trace.strides);
  const fs::path out = prepare_output(cfg);
  io::write_file(out / "trace.csv", io::trace_to_csv(trace));
  spdlog::info("trace: {} leaves over {} levels", trace.points.size(), trace.levels);
}

void cmd_pipeline(const RunConfig& cfg) {
  const fs::path out = prepare_output(cfg);
  cmd_gen(cfg);
  cmd_optimize(cfg, out / "labels.pgm");
  cmd_cluster(cfg, out / "embeddings.embf", out / "drivable.pgm");

  const auto gts = io::detections_from_json(read_json(out / "boxes.json"));
  const DetectionSet preds =
      perturb_detections(gts.at(0), cfg.detections.noise, cfg.detections.seed);
  io::write_file(out / "detections.json", io::dump(io::to_json({preds})));

  // The predicted drivable area is the clustered foreground.
  const auto instances = decode_file(out / "instances.pgm", io::decode_instances);
  std::vector<std::uint8_t> fg(instances.size());
  for (std::size_t i = 0; i < fg.size(); ++i) fg[i] = instances[i] >= 0 ? 1 : 0;
  io::write_file(out / "pred_drivable.pgm",
                 io::encode_mask(BinaryMask(Grid2D<std::uint8_t>(
                     instances.width(), instances.height(), std::move(fg)))));

  EvalInputs in;
  in.pred_drivable = out / "pred_drivable.pgm";
  in.gt_drivable = out / "drivable.pgm";
  in.pred_boxes = out / "detections.json";
  in.gt_boxes = out / "boxes.json";
  in.pred_instances = out / "instances.pgm";
  in.gt_labels = out / "labels.pgm";
  cmd_eval(cfg, in);
}

int run_cli(const std::vector<std::string>& args) {
  set_log_level();

  CLI::App app{"Drivable-area instance embedding toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Run configuration (JSON)");
    sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "Seed for scene, optimizer and detections");
  };

  auto* gen = app.add_subcommand("gen", "Generate a synthetic scene");
  common(gen);

  std::string labels_path;
  auto* optimize = app.add_subcommand("optimize", "Optimize embeddings for a label map");
  common(optimize);
  optimize->add_option("--labels", labels_path, "Label map (PGM)")->required();

  std::string embeddings_path;
  std::string mask_path;
  auto* cluster = app.add_subcommand("cluster", "Cluster embeddings into instances");
  common(cluster);
  cluster->add_option("--embeddings", embeddings_path, "Embedding field (EMBF)")->required();
  cluster->add_option("--mask", mask_path, "Drivable mask (PGM)")->required();

  std::string pd, gd, pl, gl, pb, gb, pi, gi;
  auto* eval = app.add_subcommand("eval", "Evaluate predictions against ground truth");
  common(eval);
  eval->add_option("--pred-drivable", pd, "Predicted drivable mask (PGM)");
  eval->add_option("--gt-drivable", gd, "Ground-truth drivable mask (PGM)");
  eval->add_option("--pred-lanes", pl, "Predicted lane mask (PGM)");
  eval->add_option("--gt-lanes", gl, "Ground-truth lane mask (PGM)");
  eval->add_option("--pred-boxes", pb, "Predicted detections (JSON)");
  eval->add_option("--gt-boxes", gb, "Ground-truth boxes (JSON)");
  eval->add_option("--pred-instances", pi, "Predicted instance map (PGM)");
  eval->add_option("--gt-labels", gi, "Ground-truth label map (PGM)");

  std::vector<std::string> offset_paths;
  std::vector<std::int64_t> origin;
  std::size_t levels = 0;
  auto* trace = app.add_subcommand("trace", "Trace the receptive field of one pixel");
  common(trace);
  trace->add_option("--offsets", offset_paths,
                    "Offset fields (EMBF), one per level, input side first");
  trace->add_option("--origin", origin, "Origin pixel as y x")->expected(2);
  trace->add_option("--levels", levels, "Number of levels for zero offsets");

  auto* pipeline = app.add_subcommand("pipeline", "Run gen, optimize, cluster and eval");
  common(pipeline);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed) cfg.apply_seed(*seed);

    if (*gen) {
      cmd_gen(cfg);
    } else if (*optimize) {
      cmd_optimize(cfg, labels_path);
    } else if (*cluster) {
      cmd_cluster(cfg, embeddings_path, mask_path);
    } else if (*eval) {
      const auto opt = [](const std::string& s) {
        return s.empty() ? std::nullopt : std::optional<fs::path>(s);
      };
      cmd_eval(cfg, {opt(pd), opt(gd), opt(pl), opt(gl), opt(pb), opt(gb), opt(pi), opt(gi)});
    } else if (*trace) {
      if (!origin.empty()) cfg.trace.origin = PixelCoord{origin[0], origin[1]};
      if (levels > 0) {
        cfg.trace.levels = levels;
        cfg.trace.validate();
      }
      std::vector<fs::path> paths(offset_paths.begin(), offset_paths.end());
      cmd_trace(cfg, paths);
    } else if (*pipeline) {
      cmd_pipeline(cfg);
    }
  } catch (const Error& e) {
    spdlog::error("{} ({})", e.what(), to_string(e.kind()));
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace instseg::cli
