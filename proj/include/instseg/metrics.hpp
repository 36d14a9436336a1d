// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Segmentation IoU / accuracy, box AP at one IoU threshold, mAP averaged
// over 0.50:0.05:0.95, recall, and mask AP at IoU 0.5 for instance maps.
//
// Matching is greedy: predictions in descending score order (ties keep
// insertion order) each take the unmatched same-class ground truth of
// highest IoU >= threshold. AP integrates the monotone precision envelope
// over recall (all-point interpolation).

#ifndef INSTSEG_METRICS_HPP_
#define INSTSEG_METRICS_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "instseg/core.hpp"
#include "instseg/vmf_cluster.hpp"

namespace instseg {

struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double area() const { return (x2 - x1) * (y2 - y1); }
  bool operator==(const Box&) const = default;
};

struct Detection {
  Box box;
  std::int32_t class_id = 0;
  std::optional<double> score;  // absent for ground truth

  void validate() const;
  bool operator==(const Detection&) const = default;
};

struct DetectionSet {
  std::int64_t image_id = 0;
  std::vector<Detection> detections;

  bool operator==(const DetectionSet&) const = default;
};

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionCounts&) const = default;
};

// A metric value plus whether an empty-vs-empty convention produced it.
struct MetricValue {
  double value = 0.0;
  bool empty_convention = false;
};

ConfusionCounts pixel_confusion(const BinaryMask& pred, const BinaryMask& gt);

// tp / (tp + fp + fn); 1.0 flagged when both masks are empty.
MetricValue seg_iou(const ConfusionCounts& counts);

double pixel_accuracy(const ConfusionCounts& counts);

double box_iou(const Box& a, const Box& b);

inline constexpr std::array<double, 10> kCocoThresholds = {
    0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};

// Predictions and ground truth are paired by image_id. No ground truth and
// no predictions gives 1.0 flagged; predictions without ground truth give 0.
MetricValue detection_ap(const std::vector<DetectionSet>& preds,
                         const std::vector<DetectionSet>& gts,
                         std::int32_t class_id, double iou_thr);

// Mean over classes of the mean AP over kCocoThresholds.
MetricValue map_50_95(const std::vector<DetectionSet>& preds,
                      const std::vector<DetectionSet>& gts,
                      const std::vector<std::int32_t>& classes);

// Matched ground truth over all ground truth of the listed classes, using
// predictions with score >= score_thr. Throws NoGroundTruth when there is
// none.
double detection_recall(const std::vector<DetectionSet>& preds,
                        const std::vector<DetectionSet>& gts,
                        const std::vector<std::int32_t>& classes,
                        double iou_thr, double score_thr);

// Mask AP at IoU 0.5. Predicted instances are the non-negative indices of
// `assignment`, scored by pixel population; equal scores form one PR
// cutoff so the result does not depend on how tied clusters are numbered.
MetricValue instance_map50(const Grid2D<std::int32_t>& assignment,
                           const LabelMap& gt);
MetricValue instance_map50(const ClusterResult& pred, const LabelMap& gt);

// Per ground-truth instance, the best mask IoU over predicted instances.
std::vector<double> best_instance_ious(const Grid2D<std::int32_t>& assignment,
                                       const LabelMap& gt);

}  // namespace instseg

#endif  // INSTSEG_METRICS_HPP_
