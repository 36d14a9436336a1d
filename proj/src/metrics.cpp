// Copyright 2026 The instseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "instseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace instseg {
namespace {

// All-point interpolated AP. `hits` is in rank order; `cutoff` marks the
// ranks after which a precision/recall point is taken.
double all_point_ap(const std::vector<bool>& hits,
                    const std::vector<bool>& cutoff, std::size_t num_gt) {
  std::vector<double> precision;
  std::vector<double> recall;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits[i]) ++tp;
    if (!cutoff[i]) continue;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
  }
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

struct RankedPrediction {
  std::int64_t image_id;
  const Detection* det;
};

struct ClassMatch {
  std::vector<bool> hits;  // rank order
  std::size_t num_gt = 0;
};

ClassMatch greedy_match(const std::vector<DetectionSet>& preds,
                        const std::vector<DetectionSet>& gts,
                        std::int32_t class_id, double iou_thr,
                        double score_thr) {
  std::map<std::int64_t, std::vector<const Box*>> gt_boxes;
  ClassMatch out;
  for (const auto& set : gts) {
    auto& boxes = gt_boxes[set.image_id];
    for (const auto& d : set.detections) {
      if (d.class_id != class_id) continue;
      boxes.push_back(&d.box);
      ++out.num_gt;
    }
  }
  std::vector<RankedPrediction> ranked;
  for (const auto& set : preds) {
    for (const auto& d : set.detections) {
      if (d.class_id != class_id) continue;
      if (!d.score) {
        throw Error(ErrorKind::kInvalidArgument, "prediction without a score");
      }
      if (*d.score < score_thr) continue;
      ranked.push_back({set.image_id, &d});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedPrediction& a, const RankedPrediction& b) {
                     return *a.det->score > *b.det->score;
                   });

  std::map<std::int64_t, std::vector<bool>> taken;
  for (const auto& [image, boxes] : gt_boxes) {
    taken[image].assign(boxes.size(), false);
  }
  for (const auto& p : ranked) {
    bool hit = false;
    const auto it = gt_boxes.find(p.image_id);
    if (it != gt_boxes.end()) {
      auto& used = taken[p.image_id];
      std::int64_t best = -1;
      double best_iou = -1.0;
      for (std::size_t g = 0; g < it->second.size(); ++g) {
        if (used[g]) continue;
        const double iou = box_iou(p.det->box, *it->second[g]);
        if (iou >= iou_thr && iou > best_iou) {
          best_iou = iou;
          best = static_cast<std::int64_t>(g);
        }
      }
      if (best >= 0) {
        used[static_cast<std::size_t>(best)] = true;
        hit = true;
      }
    }
    out.hits.push_back(hit);
  }
  return out;
}

struct InstanceTable {
  std::vector<std::size_t> pred_pixels;
  std::vector<std::size_t> gt_pixels;
  std::vector<std::vector<std::size_t>> inter;  // [pred][gt]

  double iou(std::size_t p, std::size_t g) const {
    const double i = static_cast<double>(inter[p][g]);
    const double u = static_cast<double>(pred_pixels[p] + gt_pixels[g]) - i;
    return u > 0.0 ? i / u : 0.0;
  }
};

InstanceTable tabulate(const Grid2D<std::int32_t>& assignment,
                       const LabelMap& gt) {
  validate_pair(assignment, gt);
  std::int32_t max_pred = -1;
  for (std::int32_t a : assignment.values()) {
    if (a < -1) {
      throw Error(ErrorKind::kInvalidArgument, "assignment index below -1");
    }
    max_pred = std::max(max_pred, a);
  }
  InstanceTable t;
  const std::size_t num_pred = static_cast<std::size_t>(max_pred + 1);
  t.pred_pixels.assign(num_pred, 0);
  t.gt_pixels.assign(gt.num_instances(), 0);
  t.inter.assign(num_pred, std::vector<std::size_t>(gt.num_instances(), 0));
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const std::int32_t p = assignment[i];
    const std::int32_t g = gt[i];
    if (p >= 0) ++t.pred_pixels[static_cast<std::size_t>(p)];
    if (g > 0) ++t.gt_pixels[static_cast<std::size_t>(g - 1)];
    if (p >= 0 && g > 0) {
      ++t.inter[static_cast<std::size_t>(p)][static_cast<std::size_t>(g - 1)];
    }
  }
  return t;
}

}  // namespace

void Detection::validate() const {
  if (!(std::isfinite(box.x1) && std::isfinite(box.y1) &&
        std::isfinite(box.x2) && std::isfinite(box.y2))) {
    throw Error(ErrorKind::kInvalidArgument, "box has non-finite corners");
  }
  if (!(box.x1 < box.x2 && box.y1 < box.y2)) {
    throw Error(ErrorKind::kInvalidArgument, "box corners are not ordered");
  }
  if (score && !(*score >= 0.0 && *score <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "score outside [0,1]");
  }
}

ConfusionCounts pixel_confusion(const BinaryMask& pred, const BinaryMask& gt) {
  validate_pair(pred, gt);
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.shape().size(); ++i) {
    const bool p = pred[i] != 0;
    const bool g = gt[i] != 0;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

MetricValue seg_iou(const ConfusionCounts& counts) {
  const std::uint64_t denom = counts.tp + counts.fp + counts.fn;
  if (denom == 0) return {1.0, true};
  return {static_cast<double>(counts.tp) / static_cast<double>(denom), false};
}

double pixel_accuracy(const ConfusionCounts& counts) {
  if (counts.total() == 0) {
    throw Error(ErrorKind::kInvalidArgument, "accuracy of zero pixels");
  }
  return static_cast<double>(counts.tp + counts.tn) /
         static_cast<double>(counts.total());
}

double box_iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

MetricValue detection_ap(const std::vector<DetectionSet>& preds,
                         const std::vector<DetectionSet>& gts,
                         std::int32_t class_id, double iou_thr) {
  const ClassMatch m = greedy_match(preds, gts, class_id, iou_thr, -INFINITY);
  if (m.num_gt == 0) {
    return m.hits.empty() ? MetricValue{1.0, true} : MetricValue{0.0, false};
  }
  return {all_point_ap(m.hits, std::vector<bool>(m.hits.size(), true), m.num_gt),
          false};
}

MetricValue map_50_95(const std::vector<DetectionSet>& preds,
                      const std::vector<DetectionSet>& gts,
                      const std::vector<std::int32_t>& classes) {
  if (classes.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "mAP needs at least one class");
  }
  MetricValue out;
  for (std::int32_t c : classes) {
    double class_sum = 0.0;
    for (double thr : kCocoThresholds) {
      const MetricValue ap = detection_ap(preds, gts, c, thr);
      class_sum += ap.value;
      out.empty_convention = out.empty_convention || ap.empty_convention;
    }
    out.value += class_sum / static_cast<double>(kCocoThresholds.size());
  }
  out.value /= static_cast<double>(classes.size());
  return out;
}

double detection_recall(const std::vector<DetectionSet>& preds,
                        const std::vector<DetectionSet>& gts,
                        const std::vector<std::int32_t>& classes,
                        double iou_thr, double score_thr) {
  std::size_t tp = 0;
  std::size_t num_gt = 0;
  for (std::int32_t c : classes) {
    const ClassMatch m = greedy_match(preds, gts, c, iou_thr, score_thr);
    tp += static_cast<std::size_t>(std::count(m.hits.begin(), m.hits.end(), true));
    num_gt += m.num_gt;
  }
  if (num_gt == 0) {
    throw Error(ErrorKind::kNoGroundTruth, "recall without ground truth");
  }
  return static_cast<double>(tp) / static_cast<double>(num_gt);
}

MetricValue instance_map50(const Grid2D<std::int32_t>& assignment,
                           const LabelMap& gt) {
  const InstanceTable t = tabulate(assignment, gt);
  std::vector<std::size_t> order;
  for (std::size_t p = 0; p < t.pred_pixels.size(); ++p) {
    if (t.pred_pixels[p] > 0) order.push_back(p);
  }
  const std::size_t num_gt = t.gt_pixels.size();
  if (num_gt == 0) {
    return order.empty() ? MetricValue{1.0, true} : MetricValue{0.0, false};
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return t.pred_pixels[a] > t.pred_pixels[b];
  });
  std::vector<bool> used(num_gt, false);
  std::vector<bool> hits;
  std::vector<bool> cutoff;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t p = order[r];
    std::int64_t best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < num_gt; ++g) {
      if (used[g]) continue;
      const double iou = t.iou(p, g);
      if (iou >= 0.5 && iou > best_iou) {
        best_iou = iou;
        best = static_cast<std::int64_t>(g);
      }
    }
    if (best >= 0) used[static_cast<std::size_t>(best)] = true;
    hits.push_back(best >= 0);
    cutoff.push_back(r + 1 == order.size() ||
                     t.pred_pixels[order[r + 1]] != t.pred_pixels[p]);
  }
  return {all_point_ap(hits, cutoff, num_gt), false};
}

MetricValue instance_map50(const ClusterResult& pred, const LabelMap& gt) {
  return instance_map50(pred.assignment, gt);
}

std::vector<double> best_instance_ious(const Grid2D<std::int32_t>& assignment,
                                       const LabelMap& gt) {
  const InstanceTable t = tabulate(assignment, gt);
  std::vector<double> best(t.gt_pixels.size(), 0.0);
  for (std::size_t g = 0; g < best.size(); ++g) {
    for (std::size_t p = 0; p < t.pred_pixels.size(); ++p) {
      best[g] = std::max(best[g], t.iou(p, g));
    }
  }
  return best;
}

}  // namespace instseg
