#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bevfuse/noise.hpp"

namespace bevfuse {

using Vec5 = Eigen::Matrix<double, 5, 1>;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat7 = Eigen::Matrix<double, 7, 7>;

// state layout: [x y vx vy w d theta]
enum StateIndex : int { kSx = 0, kSy, kSvx, kSvy, kSw, kSd, kStheta };

struct FilterParams {
  Micros epsilon_s_us{10'000};    // synchrony tolerance
  Micros delta_max_us{500'000};   // maximum accepted latency
  double accel_density{1.0};      // m^2/s^3, white-noise acceleration on (x,vx),(y,vy)
  double size_walk{0.05};         // m/sqrt(s) random walk on w, d
  double theta_walk{0.05};        // rad/sqrt(s) random walk on theta
  double p0_meas_scale{1.0};      // initial covariance multiplier on observed components
  double p0_velocity_std{10.0};   // m/s initial velocity prior
  Micros staleness_us{1'000'000}; // retire tracks unobserved this long (2 * delta_max)
};

void validate(const FilterParams& params);

/// Observation of the five measured components (x, y, w, d, theta) with a
/// diagonal covariance derived from the detection's noise level.
struct Measurement {
  Vec5 z;
  Vec5 r_diag;  // variances, strictly positive
  Micros t_meas_us{0};
  std::string source;
};

Measurement to_measurement(const Detection& det);

enum class Disposition { Synchronous, OutOfSequence, Asynchronous, Discarded };
enum class DiscardReason { None, LatencyExceeded, HistoryUnderflow };

struct IngestResult {
  Disposition disposition{Disposition::Discarded};
  DiscardReason reason{DiscardReason::None};
};

struct Snapshot {
  Micros t_us{0};
  Vec7 x;
  Mat7 P;
};

struct TrackState {
  Vec7 x_state{Vec7::Zero()};
  Mat7 P{Mat7::Zero()};
  Micros t_filter_us{0};
  std::vector<Snapshot> history;          // strictly increasing timestamps
  std::vector<Measurement> meas_buffer;   // accepted measurements, sorted by (t_meas, source)
  std::int64_t track_id{0};
  ObjectClass cls{ObjectClass::Car};
  std::int64_t last_gt_id{-1};            // evaluation bookkeeping only
  Micros last_accept_us{0};               // newest accepted measurement time
};

TrackState init_track(const Detection& det, const FilterParams& params, std::int64_t track_id);

/// Constant-velocity transport of mean and covariance over a signed interval.
/// Throws std::out_of_range when |dt| exceeds delta_max.
void predict(TrackState& track, Micros dt_us, const FilterParams& params);

/// Joseph-form Kalman update at the filter clock; the yaw innovation is
/// wrapped before the gain is applied.
void update(TrackState& track, const Measurement& m);

/// Time-sensitive ingestion: synchronous update, out-of-sequence
/// rollback-replay against the snapshot history, asynchronous forward
/// prediction, or discard beyond delta_max.
///
/// Measurements are identified by (t_meas, source); each identity may be
/// ingested at most once per track (replay order between two measurements
/// sharing an identity is unspecified).
IngestResult ingest(TrackState& track, const Measurement& m, const FilterParams& params);

struct FusedState {
  BEVBox box;
  double vx{0.0};
  double vy{0.0};
  double pos_var{0.0};    // trace of the (x, y) covariance block
  double theta_var{0.0};
};

/// Read-out of the current 7-D state; no mutation.
FusedState fused_box(const TrackState& track);

/// State reported at an output timestamp: nearest history snapshot at or
/// before t, with the mean transported forward to t. Empty when the track has
/// no snapshot that early.
std::optional<FusedState> state_at(const TrackState& track, Micros t_us);

}  // namespace bevfuse
