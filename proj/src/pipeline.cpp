#include "bevfuse/pipeline.hpp"

#include <algorithm>
#include <map>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "bevfuse/errors.hpp"

namespace bevfuse {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::UniKF: return "unikf";
    case Method::Wls: return "wls";
    case Method::NmsStd: return "nms-std";
    case Method::NmsGiou: return "nms-giou";
    case Method::Wbf: return "wbf";
    case Method::Psa: return "psa";
    case Method::DistLate: return "dist-late";
    case Method::None: return "none";
  }
  return "none";
}

std::optional<Method> method_from_name(std::string_view name) {
  for (Method m : kAllMethods) {
    if (method_name(m) == name) return m;
  }
  return std::nullopt;
}

std::string known_method_names() {
  std::string names;
  for (Method m : kAllMethods) {
    if (!names.empty()) names += ", ";
    names += method_name(m);
  }
  return names;
}

std::pair<std::int64_t, bool> group_lineage(std::span<const Detection* const> members) {
  std::map<std::int64_t, int> votes;
  for (const Detection* det : members) ++votes[det->gt_id];
  std::int64_t best_id = members.front()->gt_id;
  int best_votes = 0;
  for (const Detection* det : members) {  // earliest member wins ties
    const int v = votes[det->gt_id];
    if (v > best_votes) {
      best_votes = v;
      best_id = det->gt_id;
    }
  }
  return {best_id, votes.size() > 1};
}

Track* TrackTable::find(std::int64_t lineage) {
  for (auto& [id, track] : tracks_) {
    if (id == lineage) return &track;
  }
  return nullptr;
}

void TrackTable::ingest_group(std::span<const Detection* const> members,
                              DispositionCounts& counts) {
  if (members.empty()) return;
  const auto [lineage, flagged] = group_lineage(members);

  std::size_t first = 0;
  Track* track = find(lineage);
  if (track == nullptr) {
    Track fresh;
    fresh.state = init_track(*members[0], params_, next_track_id_++);
    fresh.state.last_gt_id = lineage;
    tracks_.emplace_back(lineage, std::move(fresh));
    track = &tracks_.back().second;
    first = 1;
  }
  track->flagged = track->flagged || flagged;
  track->state.last_gt_id = lineage;

  for (std::size_t i = first; i < members.size(); ++i) {
    const IngestResult res = ingest(track->state, to_measurement(*members[i]), params_);
    switch (res.disposition) {
      case Disposition::Synchronous: ++counts.synchronous; break;
      case Disposition::OutOfSequence: ++counts.out_of_sequence; break;
      case Disposition::Asynchronous: ++counts.asynchronous; break;
      case Disposition::Discarded: ++counts.discarded; break;
    }
  }
}

void TrackTable::retire_stale(Micros now_us) {
  std::erase_if(tracks_, [&](const auto& entry) {
    return now_us - entry.second.state.last_accept_us > params_.staleness_us;
  });
}

std::vector<FusedPred> TrackTable::emit(Micros t_us) const {
  std::vector<FusedPred> preds;
  preds.reserve(tracks_.size());
  for (const auto& [lineage, track] : tracks_) {
    const auto state = state_at(track.state, t_us);
    if (!state.has_value()) continue;
    preds.push_back({state->box, lineage, track.state.cls, track.flagged});
  }
  return preds;
}

namespace {

using DetPtrs = std::vector<const Detection*>;

// detections measured at exactly t, per source stream
DetPtrs at_time(const std::vector<Detection>& stream, Micros t) {
  DetPtrs out;
  for (const auto& det : stream) {
    if (det.t_meas_us == t) out.push_back(&det);
  }
  return out;
}

std::vector<Detection> deref(const DetPtrs& ptrs) {
  std::vector<Detection> out;
  out.reserve(ptrs.size());
  for (const Detection* p : ptrs) out.push_back(*p);
  return out;
}

FusedPred to_pred(const Detection& det, bool flagged = false) {
  return {det.box, det.gt_id, det.cls, flagged};
}

template <typename Fn>
void for_each_class(const std::vector<Detection>& dets, Fn&& fn) {
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<Detection> of_class;
    for (const auto& det : dets) {
      if (static_cast<int>(det.cls) == c) of_class.push_back(det);
    }
    if (!of_class.empty()) fn(of_class);
  }
}

// pooled suppression/fusion baselines operate per class on the union of sources
std::vector<FusedPred> run_pooled_method(Method method, const std::vector<Detection>& pooled,
                                         const PipelineConfig& config) {
  std::vector<FusedPred> preds;
  const OverlapFn overlap = config.axis_aligned_iou ? &iou_bev_axis_aligned : &iou_bev;
  for_each_class(pooled, [&](const std::vector<Detection>& of_class) {
    std::vector<ScoredDetection> result;
    switch (method) {
      case Method::NmsStd:
        result = nms_std(make_scored(of_class), config.iou_threshold, overlap);
        break;
      case Method::NmsGiou: result = nms_giou(make_scored(of_class), config.iou_threshold); break;
      case Method::Wbf: result = wbf(make_scored(of_class), config.iou_threshold, overlap); break;
      case Method::Psa: result = psa(make_scored(of_class), config.iou_threshold, overlap); break;
      default: break;
    }
    for (const auto& sd : result) preds.push_back(to_pred(sd.det));
  });
  return preds;
}

void distance_late_per_class(const std::vector<Detection>& a, const std::vector<Detection>& b,
                             const PipelineConfig& config, std::vector<Detection>& out) {
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<Detection> ac, bc;
    for (const auto& det : a) {
      if (static_cast<int>(det.cls) == c) ac.push_back(det);
    }
    for (const auto& det : b) {
      if (static_cast<int>(det.cls) == c) bc.push_back(det);
    }
    if (ac.empty() && bc.empty()) continue;
    auto fused = distance_late(ac, bc, config.dist_threshold);
    out.insert(out.end(), std::make_move_iterator(fused.begin()),
               std::make_move_iterator(fused.end()));
  }
}

std::vector<FusedPred> run_dist_late(const std::vector<DetPtrs>& per_source,
                                     const PipelineConfig& config) {
  // fold sources pairwise; the running result acts as list A
  std::vector<FusedPred> preds;
  std::vector<Detection> acc = deref(per_source[0]);
  for (std::size_t s = 1; s < per_source.size(); ++s) {
    const std::vector<Detection> next = deref(per_source[s]);
    std::vector<Detection> merged;
    distance_late_per_class(acc, next, config, merged);
    acc = std::move(merged);
  }
  for (const auto& det : acc) preds.push_back(to_pred(det));
  return preds;
}

// CSBA grouping across sources: start one group per first-source detection,
// then match each further source against group representatives.
std::vector<DetPtrs> csba_groups(const std::vector<DetPtrs>& per_source,
                                 const CsbaParams& params) {
  std::vector<DetPtrs> groups;
  bool seeded = false;
  for (const auto& source_list : per_source) {
    if (source_list.empty()) continue;
    if (!seeded) {
      for (const Detection* det : source_list) groups.push_back({det});
      seeded = true;
      continue;
    }
    std::vector<Detection> reps;
    reps.reserve(groups.size());
    for (const auto& group : groups) reps.push_back(*group.front());
    const std::vector<Detection> incoming = deref(source_list);
    const AssociationResult assoc = csba_associate(reps, incoming, params);
    for (const auto& pair : assoc.pairs) groups[pair.a].push_back(source_list[pair.b]);
    for (int j : assoc.unmatched_b) groups.push_back({source_list[j]});
  }
  return groups;
}

std::vector<DetPtrs> csba_groups_per_class(const std::vector<DetPtrs>& per_source,
                                           const CsbaParams& params) {
  std::vector<DetPtrs> all_groups;
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<DetPtrs> filtered(per_source.size());
    bool any = false;
    for (std::size_t s = 0; s < per_source.size(); ++s) {
      for (const Detection* det : per_source[s]) {
        if (static_cast<int>(det->cls) == c) {
          filtered[s].push_back(det);
          any = true;
        }
      }
    }
    if (!any) continue;
    auto groups = csba_groups(filtered, params);
    all_groups.insert(all_groups.end(), std::make_move_iterator(groups.begin()),
                      std::make_move_iterator(groups.end()));
  }
  return all_groups;
}

std::vector<FusedPred> run_wls_tick(const std::vector<Detection>& tick_dets,
                                    const PipelineConfig& config) {
  // split back into per-source lists to preserve the cross-source grouping
  std::vector<std::string> sources;
  for (const auto& det : tick_dets) {
    if (std::find(sources.begin(), sources.end(), det.source) == sources.end()) {
      sources.push_back(det.source);
    }
  }
  std::sort(sources.begin(), sources.end());
  std::vector<DetPtrs> per_source(sources.size());
  for (const auto& det : tick_dets) {
    const auto idx = static_cast<std::size_t>(
        std::find(sources.begin(), sources.end(), det.source) - sources.begin());
    per_source[idx].push_back(&det);
  }

  std::vector<FusedPred> preds;
  for (const auto& group : csba_groups_per_class(per_source, config.csba)) {
    const auto [lineage, flagged] = group_lineage(group);
    const std::vector<Detection> members = deref(group);
    const WlsFused fused = wls_fuse(members);
    FusedPred pred;
    pred.box = make_box(fused.x, fused.y, fused.w, fused.d, fused.theta);
    pred.gt_id = lineage;
    pred.cls = members.front().cls;
    pred.lineage_flagged = flagged;
    preds.push_back(std::move(pred));
  }
  return preds;
}

struct ArrivalBatch {
  Micros t_recv{0};
  std::vector<const Detection*> dets;
};

std::vector<ArrivalBatch> arrival_batches(const std::vector<std::vector<Detection>>& streams) {
  std::vector<const Detection*> all;
  for (const auto& stream : streams) {
    for (const auto& det : stream) all.push_back(&det);
  }
  std::sort(all.begin(), all.end(), [](const Detection* a, const Detection* b) {
    if (a->t_recv_us != b->t_recv_us) return a->t_recv_us < b->t_recv_us;
    if (a->t_meas_us != b->t_meas_us) return a->t_meas_us < b->t_meas_us;
    return a->source < b->source;
  });
  std::vector<ArrivalBatch> batches;
  for (const Detection* det : all) {
    if (batches.empty() || batches.back().t_recv != det->t_recv_us) {
      batches.push_back({det->t_recv_us, {}});
    }
    batches.back().dets.push_back(det);
  }
  return batches;
}

MethodPredictions run_unikf(const Scene& scene,
                            const std::vector<std::vector<Detection>>& streams,
                            const PipelineConfig& config, DispositionCounts& counts) {
  MethodPredictions preds(scene.frames.size());
  TrackTable table(config.filter);
  const std::vector<ArrivalBatch> batches = arrival_batches(streams);

  std::size_t next_batch = 0;
  for (std::size_t f = 0; f < scene.frames.size(); ++f) {
    const Micros t_eval = scene.frames[f].t_us;
    while (next_batch < batches.size() && batches[next_batch].t_recv <= t_eval) {
      const ArrivalBatch& batch = batches[next_batch];
      std::vector<DetPtrs> per_source;
      std::vector<std::string> sources;
      for (const Detection* det : batch.dets) {
        const auto it = std::find(sources.begin(), sources.end(), det->source);
        if (it == sources.end()) {
          sources.push_back(det->source);
          per_source.push_back({det});
        } else {
          per_source[static_cast<std::size_t>(it - sources.begin())].push_back(det);
        }
      }
      for (const auto& group : csba_groups_per_class(per_source, config.csba)) {
        table.ingest_group(group, counts);
      }
      ++next_batch;
    }
    table.retire_stale(t_eval);
    preds[f] = table.emit(t_eval);
  }
  return preds;
}

}  // namespace

TrialPredictions run_trial_predictions(const Scene& scene, const PipelineConfig& config,
                                       std::span<const Method> methods, std::uint64_t seed,
                                       int trial) {
  if (config.sensors.empty()) throw ValidationError("pipeline: at least one sensor required");

  std::vector<std::vector<Detection>> streams;
  streams.reserve(config.sensors.size());
  for (std::size_t s = 0; s < config.sensors.size(); ++s) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(trial), s);
    streams.push_back(realize_detections(scene, config.sensors[s], rng));
  }

  TrialPredictions out;
  out.per_method.resize(methods.size());

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const Method method = methods[mi];
    MethodPredictions preds(scene.frames.size());

    switch (method) {
      case Method::None: {
        for (std::size_t f = 0; f < scene.frames.size(); ++f) {
          for (const Detection* det : at_time(streams[0], scene.frames[f].t_us)) {
            preds[f].push_back(to_pred(*det));
          }
        }
        break;
      }
      case Method::NmsStd:
      case Method::NmsGiou:
      case Method::Wbf:
      case Method::Psa: {
        for (std::size_t f = 0; f < scene.frames.size(); ++f) {
          std::vector<Detection> pooled;
          for (const auto& stream : streams) {
            for (const Detection* det : at_time(stream, scene.frames[f].t_us)) {
              pooled.push_back(*det);
            }
          }
          preds[f] = run_pooled_method(method, pooled, config);
        }
        break;
      }
      case Method::DistLate: {
        for (std::size_t f = 0; f < scene.frames.size(); ++f) {
          std::vector<DetPtrs> per_source;
          per_source.reserve(streams.size());
          for (const auto& stream : streams) {
            per_source.push_back(at_time(stream, scene.frames[f].t_us));
          }
          preds[f] = run_dist_late(per_source, config);
        }
        break;
      }
      case Method::Wls: {
        const auto ticks = sliding_window_sync(streams, config.wls_window_us);
        std::map<Micros, std::size_t> frame_index;
        for (std::size_t f = 0; f < scene.frames.size(); ++f) {
          frame_index[scene.frames[f].t_us] = f;
        }
        for (const auto& [tick, dets] : ticks) {
          // representative output timestamp: the most frequent t_meas in the tick
          std::map<Micros, int> times;
          for (const auto& det : dets) ++times[det.t_meas_us];
          Micros t_out = dets.front().t_meas_us;
          int best = 0;
          for (const auto& [t, n] : times) {
            if (n > best) {
              best = n;
              t_out = t;
            }
          }
          const auto it = frame_index.find(t_out);
          if (it == frame_index.end()) continue;  // off-grid tick, not evaluable
          preds[it->second] = run_wls_tick(dets, config);
        }
        break;
      }
      case Method::UniKF: {
        preds = run_unikf(scene, streams, config, out.dispositions);
        break;
      }
    }
    out.per_method[mi] = std::move(preds);
  }
  return out;
}

EvaluatedTrial evaluate_predictions(const Scene& scene, const MethodPredictions& preds,
                                    FpReference fp_ref) {
  EvaluatedTrial out;
  out.frames.reserve(scene.frames.size());
  ClassErrorSums class_sums;
  for (std::size_t f = 0; f < scene.frames.size(); ++f) {
    const MatchOutcome outcome = match_by_id(preds[f], scene.frames[f], fp_ref);
    out.frames.push_back(metrics_from_outcome(outcome, scene.frames[f].t_us));
    class_sums.add(outcome);
  }
  out.metrics = summarize_trial(out.frames);
  out.metrics.by_class = class_sums;
  return out;
}

const MethodResult& ExperimentResult::result_for(Method m) const {
  for (const auto& result : methods) {
    if (result.method == m) return result;
  }
  throw ValidationError("no result for method '" + std::string(method_name(m)) + "'");
}

namespace {

ExperimentResult assemble(const ExperimentSpec& spec,
                          std::vector<std::vector<EvaluatedTrial>>&& evaluated) {
  // evaluated[trial][method]
  ExperimentResult result;
  result.methods.resize(spec.methods.size());
  for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
    MethodResult& mr = result.methods[mi];
    mr.method = spec.methods[mi];
    for (int trial = 0; trial < spec.trials; ++trial) {
      mr.trial_frames.push_back(std::move(evaluated[trial][mi].frames));
      mr.trial_metrics.push_back(evaluated[trial][mi].metrics);
    }
    mr.summary = aggregate(mr.trial_metrics);
  }
  return result;
}

std::vector<EvaluatedTrial> evaluate_one_trial(const ExperimentSpec& spec, int trial) {
  const TrialPredictions preds =
      run_trial_predictions(spec.scene, spec.pipeline, spec.methods, spec.seed, trial);
  std::vector<EvaluatedTrial> evaluated;
  evaluated.reserve(spec.methods.size());
  for (const auto& method_preds : preds.per_method) {
    evaluated.push_back(evaluate_predictions(spec.scene, method_preds, spec.pipeline.fp_ref));
  }
  return evaluated;
}

}  // namespace

ExperimentResult run_experiment_serial(const ExperimentSpec& spec) {
  if (spec.trials < 1) throw ValidationError("experiment: trials must be >= 1");
  std::vector<std::vector<EvaluatedTrial>> evaluated(static_cast<std::size_t>(spec.trials));
  for (int trial = 0; trial < spec.trials; ++trial) {
    evaluated[static_cast<std::size_t>(trial)] = evaluate_one_trial(spec, trial);
  }
  return assemble(spec, std::move(evaluated));
}

ExperimentResult run_experiment(const ExperimentSpec& spec, int jobs) {
  if (jobs <= 1) return run_experiment_serial(spec);
  if (spec.trials < 1) throw ValidationError("experiment: trials must be >= 1");

  std::vector<std::vector<EvaluatedTrial>> evaluated(static_cast<std::size_t>(spec.trials));
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
#endif
  for (int trial = 0; trial < spec.trials; ++trial) {
    evaluated[static_cast<std::size_t>(trial)] = evaluate_one_trial(spec, trial);
  }
  return assemble(spec, std::move(evaluated));
}

}  // namespace bevfuse
