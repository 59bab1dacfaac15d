#include "bevfuse/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace bevfuse {

namespace {

double translation_error(const FusedPred& pred, const GtObject& gt) {
  return center_distance(pred.box, gt.box);
}

double orientation_error(const FusedPred& pred, const GtObject& gt) {
  return angular_distance(pred.box.theta, gt.box.theta);
}

double dimension_error(const FusedPred& pred, const GtObject& gt) {
  return std::hypot(pred.box.w - gt.box.w, pred.box.d - gt.box.d);
}

const GtObject* nearest_gt(const FusedPred& pred, const SceneFrame& frame) {
  const GtObject* best = nullptr;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto& gt : frame.objects) {
    const double dist = center_distance(pred.box, gt.box);
    if (dist < best_dist) {
      best_dist = dist;
      best = &gt;
    }
  }
  return best;
}

}  // namespace

MatchOutcome match_by_id(std::span<const FusedPred> preds, const SceneFrame& frame,
                         FpReference fp_ref) {
  MatchOutcome outcome;

  std::map<std::int64_t, const GtObject*> gt_by_id;
  for (const auto& gt : frame.objects) gt_by_id[gt.gt_id] = &gt;

  // predictions per claimed identity, in input order
  std::map<std::int64_t, std::vector<const FusedPred*>> preds_by_id;
  for (const auto& pred : preds) preds_by_id[pred.gt_id].push_back(&pred);

  std::map<std::int64_t, const FusedPred*> tp_by_id;
  for (auto& [id, claimants] : preds_by_id) {
    const auto it = gt_by_id.find(id);
    if (it == gt_by_id.end()) {
      // unknown identity: every claimant is an FP
      for (const FusedPred* pred : claimants) {
        ++outcome.unknown_id_fps;
        const GtObject* ref = nearest_gt(*pred, frame);
        outcome.fp.push_back({*pred, ref != nullptr ? *ref : GtObject{}});
      }
      continue;
    }
    const GtObject& gt = *it->second;
    const FusedPred* best = nullptr;
    double best_dist = std::numeric_limits<double>::infinity();
    for (const FusedPred* pred : claimants) {
      const double dist = center_distance(pred->box, gt.box);
      if (dist < best_dist) {
        best_dist = dist;
        best = pred;
      }
    }
    for (const FusedPred* pred : claimants) {
      if (pred == best) {
        outcome.tp.push_back({*pred, gt});
        continue;
      }
      if (fp_ref == FpReference::Lineage) {
        outcome.fp.push_back({*pred, gt});
      } else {
        const GtObject* ref = nearest_gt(*pred, frame);
        outcome.fp.push_back({*pred, ref != nullptr ? *ref : gt});
      }
    }
    tp_by_id[id] = best;
  }

  for (const auto& gt : frame.objects) {
    if (tp_by_id.find(gt.gt_id) == tp_by_id.end()) outcome.fn.push_back(gt);
  }
  return outcome;
}

namespace {

template <typename ErrorFn>
double fp_aware_mean(const MatchOutcome& outcome, ErrorFn&& err) {
  const std::size_t n = outcome.tp.size() + outcome.fp.size();
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (const auto& m : outcome.tp) sum += err(m.pred, m.gt);
  for (const auto& m : outcome.fp) sum += err(m.pred, m.gt);
  return sum / static_cast<double>(n);
}

}  // namespace

double ate_frame(const MatchOutcome& outcome) { return fp_aware_mean(outcome, translation_error); }
double aoe_frame(const MatchOutcome& outcome) { return fp_aware_mean(outcome, orientation_error); }
double ade_frame(const MatchOutcome& outcome) { return fp_aware_mean(outcome, dimension_error); }

std::pair<double, double> precision_recall(const MatchOutcome& outcome) {
  const double tp = static_cast<double>(outcome.tp.size());
  const double fp = static_cast<double>(outcome.fp.size());
  const double fn = static_cast<double>(outcome.fn.size());
  const double precision = (tp + fp) == 0.0 ? 1.0 : tp / (tp + fp);
  const double recall = (tp + fn) == 0.0 ? 1.0 : tp / (tp + fn);
  return {precision, recall};
}

SotaMetrics sota_metrics(const MatchOutcome& outcome) {
  SotaMetrics out;
  if (outcome.tp.empty()) return out;
  double ate = 0.0, aoe = 0.0, ade = 0.0;
  for (const auto& m : outcome.tp) {
    ate += translation_error(m.pred, m.gt);
    aoe += orientation_error(m.pred, m.gt);
    ade += dimension_error(m.pred, m.gt);
  }
  const double n = static_cast<double>(outcome.tp.size());
  out.ate = ate / n;
  out.aoe = aoe / n;
  out.ade = ade / n;
  return out;
}

void ClassErrorSums::add(const MatchOutcome& outcome) {
  const auto tally = [this](const MatchedPred& m) {
    const int c = static_cast<int>(m.gt.cls);
    ate_sum[c] += translation_error(m.pred, m.gt);
    aoe_sum[c] += orientation_error(m.pred, m.gt);
    ++count[c];
  };
  for (const auto& m : outcome.tp) tally(m);
  for (const auto& m : outcome.fp) tally(m);
}

void ClassErrorSums::merge(const ClassErrorSums& other) {
  for (int c = 0; c < kNumClasses; ++c) {
    ate_sum[c] += other.ate_sum[c];
    aoe_sum[c] += other.aoe_sum[c];
    count[c] += other.count[c];
  }
}

FrameMetrics metrics_from_outcome(const MatchOutcome& outcome, Micros t_us) {
  FrameMetrics fm;
  fm.t_us = t_us;
  fm.ate = ate_frame(outcome);
  fm.aoe = aoe_frame(outcome);
  fm.ade = ade_frame(outcome);
  fm.tp = static_cast<int>(outcome.tp.size());
  fm.fp = static_cast<int>(outcome.fp.size());
  fm.fn = static_cast<int>(outcome.fn.size());
  std::tie(fm.precision, fm.recall) = precision_recall(outcome);
  fm.sota = sota_metrics(outcome);
  return fm;
}

FrameMetrics evaluate_frame(std::span<const FusedPred> preds, const SceneFrame& frame,
                            FpReference fp_ref) {
  return metrics_from_outcome(match_by_id(preds, frame, fp_ref), frame.t_us);
}

TrialMetrics summarize_trial(std::span<const FrameMetrics> frames) {
  TrialMetrics tm;
  tm.frames = static_cast<int>(frames.size());
  if (frames.empty()) return tm;

  double sum_ate = 0.0, sum_aoe = 0.0, sum_ade = 0.0;
  double sota_ate = 0.0, sota_aoe = 0.0, sota_ade = 0.0;
  int sota_frames = 0;
  for (const auto& fm : frames) {
    sum_ate += fm.ate;
    sum_aoe += fm.aoe;
    sum_ade += fm.ade;
    tm.tp += fm.tp;
    tm.fp += fm.fp;
    tm.fn += fm.fn;
    if (fm.sota.ate.has_value()) {
      sota_ate += *fm.sota.ate;
      sota_aoe += *fm.sota.aoe;
      sota_ade += *fm.sota.ade;
      ++sota_frames;
    }
  }
  const double n = static_cast<double>(frames.size());
  tm.m_ate = sum_ate / n;
  tm.m_aoe = sum_aoe / n;
  tm.m_ade = sum_ade / n;
  tm.precision = (tm.tp + tm.fp) == 0 ? 1.0
                                      : static_cast<double>(tm.tp) /
                                            static_cast<double>(tm.tp + tm.fp);
  tm.recall = (tm.tp + tm.fn) == 0 ? 1.0
                                   : static_cast<double>(tm.tp) /
                                         static_cast<double>(tm.tp + tm.fn);
  if (sota_frames > 0) {
    tm.sota_m_ate = sota_ate / sota_frames;
    tm.sota_m_aoe = sota_aoe / sota_frames;
    tm.sota_m_ade = sota_ade / sota_frames;
  }
  return tm;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

RunSummary aggregate(std::span<const TrialMetrics> trials) {
  RunSummary summary;
  summary.trials = static_cast<int>(trials.size());
  if (trials.empty()) return summary;

  std::vector<double> ate, aoe, ade, prec, rec, s_ate, s_aoe, s_ade;
  summary.sota_defined = true;
  for (const auto& tm : trials) {
    ate.push_back(tm.m_ate);
    aoe.push_back(tm.m_aoe);
    ade.push_back(tm.m_ade);
    prec.push_back(tm.precision);
    rec.push_back(tm.recall);
    if (tm.sota_m_ate.has_value()) {
      s_ate.push_back(*tm.sota_m_ate);
      s_aoe.push_back(*tm.sota_m_aoe);
      s_ade.push_back(*tm.sota_m_ade);
    } else {
      summary.sota_defined = false;
    }
    summary.by_class.merge(tm.by_class);
  }
  summary.m_ate = mean_std(ate);
  summary.m_aoe = mean_std(aoe);
  summary.m_ade = mean_std(ade);
  summary.precision = mean_std(prec);
  summary.recall = mean_std(rec);
  if (summary.sota_defined) {
    summary.sota_m_ate = mean_std(s_ate);
    summary.sota_m_aoe = mean_std(s_aoe);
    summary.sota_m_ade = mean_std(s_ade);
  }
  return summary;
}

}  // namespace bevfuse
