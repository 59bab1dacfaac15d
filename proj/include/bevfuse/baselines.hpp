#pragma once

#include <map>
#include <span>
#include <vector>

#include "bevfuse/assoc.hpp"
#include "bevfuse/noise.hpp"

namespace bevfuse {

/// Detection plus the ranking confidence NMS-style methods need. The noise
/// protocol produces no classifier score, so the default confidence is
/// certainty-derived: 1 / (1 + sigma_x + sigma_y).
struct ScoredDetection {
  Detection det;
  double score{1.0};  // in (0, 1]
};

double detection_confidence(const Detection& det);

std::vector<ScoredDetection> make_scored(std::span<const Detection> dets);

/// Box-overlap convention for the IoU-gated baselines; rotated is the
/// default, axis-aligned is the cheaper alternative some pipelines use.
using OverlapFn = double (*)(const BEVBox&, const BEVBox&);

/// Classical NMS over the pooled set: keep the highest score, suppress
/// overlaps with iou >= threshold, repeat. Survivors pass through unmodified.
std::vector<ScoredDetection> nms_std(std::vector<ScoredDetection> dets, double iou_threshold,
                                     OverlapFn overlap = &iou_bev);

/// NMS with GIoU as the suppression predicate.
std::vector<ScoredDetection> nms_giou(std::vector<ScoredDetection> dets, double giou_threshold);

/// Weighted Box Fusion: cluster by IoU against running cluster means; each
/// cluster emits the score-weighted average box (circular mean for yaw).
std::vector<ScoredDetection> wbf(std::vector<ScoredDetection> dets, double iou_threshold,
                                 OverlapFn overlap = &iou_bev);

/// Promote-Suppress Aggregation: cluster by IoU, promote each cluster's best
/// member, suppress the rest, boost the promoted score by supporter count.
std::vector<ScoredDetection> psa(std::vector<ScoredDetection> dets, double iou_threshold,
                                 OverlapFn overlap = &iou_bev);

/// Distance-gated late fusion (InfraDet3D/DAIR-V2X style): Hungarian matching
/// on center distance, per-pair unweighted component average, pass-through of
/// unmatched detections.
std::vector<Detection> distance_late(std::span<const Detection> a, std::span<const Detection> b,
                                     double dist_threshold_m);

struct WlsFused {
  double x{0.0}, y{0.0}, w{0.0}, d{0.0}, theta{0.0};
  double var_x{0.0}, var_y{0.0}, var_w{0.0}, var_d{0.0}, var_theta{0.0};
};

/// Inverse-variance weighted least squares over an associated group; yaw is
/// fused on wrapped residuals about the first member. A zero-variance member
/// dominates its component exactly.
WlsFused wls_fuse(std::span<const Detection> group);

/// Buckets detections into fixed windows by t_meas (tick = t_meas / window);
/// every detection lands in exactly one tick.
std::map<Micros, std::vector<Detection>> sliding_window_sync(
    std::span<const std::vector<Detection>> streams, Micros window_us);

}  // namespace bevfuse
