#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "bevfuse/assoc.hpp"
#include "bevfuse/baselines.hpp"
#include "bevfuse/eval.hpp"
#include "bevfuse/io.hpp"
#include "bevfuse/unikf.hpp"

namespace bevfuse {

enum class Method {
  UniKF,     // CSBA association + Kalman fusion
  Wls,       // CSBA association + inverse-variance fusion, sliding-window sync
  NmsStd,
  NmsGiou,
  Wbf,
  Psa,
  DistLate,  // distance matching + pairwise averaging
  None,      // single-detector pass-through (first sensor)
};

constexpr std::array<Method, 8> kAllMethods = {Method::UniKF,   Method::Wls,  Method::NmsStd,
                                               Method::NmsGiou, Method::Wbf,  Method::Psa,
                                               Method::DistLate, Method::None};

std::string_view method_name(Method m);
std::optional<Method> method_from_name(std::string_view name);
std::string known_method_names();

struct PipelineConfig {
  std::vector<SensorSpec> sensors;
  CsbaParams csba;
  FilterParams filter;
  double iou_threshold{0.5};
  bool axis_aligned_iou{false};  // gate NMS/WBF/PSA and IoU association on AABB overlap
  double dist_threshold{3.0};
  Micros wls_window_us{100'000};
  FpReference fp_ref{FpReference::Lineage};
};

/// Predictions aligned with the scene frames (index i belongs to frame i).
using MethodPredictions = std::vector<std::vector<FusedPred>>;

struct DispositionCounts {
  std::int64_t synchronous{0};
  std::int64_t out_of_sequence{0};
  std::int64_t asynchronous{0};
  std::int64_t discarded{0};

  std::int64_t total() const { return synchronous + out_of_sequence + asynchronous + discarded; }
};

struct TrialPredictions {
  std::vector<MethodPredictions> per_method;  // parallel to the requested method list
  DispositionCounts dispositions;             // UniKF ingest accounting
};

/// One noisy realization of the scene processed by every requested method.
/// Deterministic in (seed, trial); trials are mutually independent streams.
TrialPredictions run_trial_predictions(const Scene& scene, const PipelineConfig& config,
                                       std::span<const Method> methods, std::uint64_t seed,
                                       int trial);

struct EvaluatedTrial {
  std::vector<FrameMetrics> frames;
  TrialMetrics metrics;
};

EvaluatedTrial evaluate_predictions(const Scene& scene, const MethodPredictions& preds,
                                    FpReference fp_ref);

struct ExperimentSpec {
  Scene scene;
  PipelineConfig pipeline;
  std::vector<Method> methods;
  int trials{5};
  std::uint64_t seed{0};
};

struct MethodResult {
  Method method{Method::None};
  std::vector<std::vector<FrameMetrics>> trial_frames;
  std::vector<TrialMetrics> trial_metrics;
  RunSummary summary;
};

struct ExperimentResult {
  std::vector<MethodResult> methods;

  const MethodResult& result_for(Method m) const;
};

/// Serial reference runner; the parallel runner must reproduce it exactly.
ExperimentResult run_experiment_serial(const ExperimentSpec& spec);

/// OpenMP runner, parallel across trials. jobs <= 1 falls back to the serial
/// path; any jobs value yields identical results.
ExperimentResult run_experiment(const ExperimentSpec& spec, int jobs);

// ---- UniKF track management (exposed for tests) ----

struct Track {
  TrackState state;
  bool flagged{false};  // some ingested group disagreed on identity
};

/// Per-object track table keyed by ground-truth lineage; owns ingest order and
/// retirement. Single-owner mutable, one instance per trial.
class TrackTable {
 public:
  explicit TrackTable(FilterParams params) : params_(params) {}

  /// Ingests one associated detection group (members of one physical object)
  /// in arrival order, creating the track on first sight.
  void ingest_group(std::span<const Detection* const> members, DispositionCounts& counts);

  void retire_stale(Micros now_us);

  /// One fused box per live track whose history reaches back to t_us.
  std::vector<FusedPred> emit(Micros t_us) const;

  const std::vector<std::pair<std::int64_t, Track>>& tracks() const { return tracks_; }

 private:
  Track* find(std::int64_t lineage);

  FilterParams params_;
  std::vector<std::pair<std::int64_t, Track>> tracks_;  // insertion-ordered
  std::int64_t next_track_id_{1};
};

/// Majority identity of a detection group (ties resolved by the earliest
/// member); second element is true when members disagreed.
std::pair<std::int64_t, bool> group_lineage(std::span<const Detection* const> members);

}  // namespace bevfuse
