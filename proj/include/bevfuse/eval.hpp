#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "bevfuse/scene.hpp"

namespace bevfuse {

/// A fused prediction carrying the ground-truth lineage of its constituents.
/// lineage_flagged marks boxes whose members disagreed on identity.
struct FusedPred {
  BEVBox box;
  std::int64_t gt_id{-1};
  ObjectClass cls{ObjectClass::Car};
  bool lineage_flagged{false};
};

/// Which ground truth an FP's error is measured against.
enum class FpReference { Lineage, NearestGt };

struct MatchedPred {
  FusedPred pred;
  GtObject gt;  // reference ground truth for error terms
};

struct MatchOutcome {
  std::vector<MatchedPred> tp;
  std::vector<MatchedPred> fp;
  std::vector<GtObject> fn;
  int unknown_id_fps{0};  // predictions whose lineage id is absent from the frame
};

/// Identifier-based matching: per gt_id the closest prediction is the TP,
/// surplus predictions are FPs, unmatched ground truths are FNs.
MatchOutcome match_by_id(std::span<const FusedPred> preds, const SceneFrame& frame,
                         FpReference fp_ref = FpReference::Lineage);

// FP-aware errors over TP+FP (0 when there are no predictions).
double ate_frame(const MatchOutcome& outcome);
double aoe_frame(const MatchOutcome& outcome);
double ade_frame(const MatchOutcome& outcome);

// precision = TP/(TP+FP), recall = TP/(TP+FN); both 1 for 0/0.
std::pair<double, double> precision_recall(const MatchOutcome& outcome);

/// TP-only metric variants; absent when the frame has no true positives.
struct SotaMetrics {
  std::optional<double> ate;
  std::optional<double> aoe;
  std::optional<double> ade;
};

SotaMetrics sota_metrics(const MatchOutcome& outcome);

struct FrameMetrics {
  Micros t_us{0};
  double ate{0.0};
  double aoe{0.0};
  double ade{0.0};
  int tp{0};
  int fp{0};
  int fn{0};
  double precision{1.0};
  double recall{1.0};
  SotaMetrics sota;
};

FrameMetrics metrics_from_outcome(const MatchOutcome& outcome, Micros t_us);

FrameMetrics evaluate_frame(std::span<const FusedPred> preds, const SceneFrame& frame,
                            FpReference fp_ref = FpReference::Lineage);

/// Per-class error accumulator (sums over TP+FP, keyed by the reference gt's
/// class) used for the per-class report series.
struct ClassErrorSums {
  std::array<double, kNumClasses> ate_sum{};
  std::array<double, kNumClasses> aoe_sum{};
  std::array<std::int64_t, kNumClasses> count{};

  void add(const MatchOutcome& outcome);
  void merge(const ClassErrorSums& other);
};

struct TrialMetrics {
  double m_ate{0.0};
  double m_aoe{0.0};
  double m_ade{0.0};
  double precision{1.0};  // pooled over frames
  double recall{1.0};
  std::optional<double> sota_m_ate;
  std::optional<double> sota_m_aoe;
  std::optional<double> sota_m_ade;
  std::int64_t tp{0}, fp{0}, fn{0};
  int frames{0};
  ClassErrorSums by_class;
};

/// Frame means within one trial; sota means skip frames without TPs.
TrialMetrics summarize_trial(std::span<const FrameMetrics> frames);

struct MeanStd {
  double mean{0.0};
  double stddev{0.0};  // sample std (N-1); 0 for a single trial
};

struct RunSummary {
  int trials{0};
  MeanStd m_ate;
  MeanStd m_aoe;  // radians; converted to degrees at the report layer
  MeanStd m_ade;
  MeanStd precision;
  MeanStd recall;
  MeanStd sota_m_ate;
  MeanStd sota_m_aoe;
  MeanStd sota_m_ade;
  bool sota_defined{false};  // false when some trial had no TPs at all
  ClassErrorSums by_class;   // pooled over trials
};

/// Across-trial aggregation: mean +/- sample std of the per-trial frame means.
RunSummary aggregate(std::span<const TrialMetrics> trials);

MeanStd mean_std(std::span<const double> values);

}  // namespace bevfuse
