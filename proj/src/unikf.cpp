#include "bevfuse/unikf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bevfuse/errors.hpp"

namespace bevfuse {

namespace {

using Mat57 = Eigen::Matrix<double, 5, 7>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

constexpr double kMinMeasVariance = 1e-12;  // keeps R invertible for noise-free fixtures

Mat57 measurement_matrix() {
  Mat57 h = Mat57::Zero();
  h(0, kSx) = 1.0;
  h(1, kSy) = 1.0;
  h(2, kSw) = 1.0;
  h(3, kSd) = 1.0;
  h(4, kStheta) = 1.0;
  return h;
}

const Mat57 kH = measurement_matrix();

void symmetrize(Mat7& p) { p = 0.5 * (p + p.transpose()).eval(); }

// Latest snapshot with timestamp <= t; -1 when none.
int snapshot_at_or_before(const TrackState& track, Micros t) {
  int found = -1;
  for (int i = 0; i < static_cast<int>(track.history.size()); ++i) {
    if (track.history[i].t_us <= t) found = i;
    else break;
  }
  return found;
}

// Insert or replace the snapshot at the current filter clock. The history is
// only ever extended at the tail (replay truncates it first), so timestamps
// stay strictly increasing.
void snapshot_upsert(TrackState& track) {
  if (!track.history.empty() && track.history.back().t_us == track.t_filter_us) {
    track.history.back().x = track.x_state;
    track.history.back().P = track.P;
    return;
  }
  track.history.push_back({track.t_filter_us, track.x_state, track.P});
}

bool buffer_less(const Measurement& a, const Measurement& b) {
  if (a.t_meas_us != b.t_meas_us) return a.t_meas_us < b.t_meas_us;
  return a.source < b.source;
}

void buffer_insert(TrackState& track, const Measurement& m) {
  const auto pos =
      std::upper_bound(track.meas_buffer.begin(), track.meas_buffer.end(), m, buffer_less);
  track.meas_buffer.insert(pos, m);
}

void prune_horizon(TrackState& track, const FilterParams& params) {
  const Micros cutoff = track.t_filter_us - params.delta_max_us;
  std::erase_if(track.history, [cutoff](const Snapshot& s) { return s.t_us < cutoff; });
  std::erase_if(track.meas_buffer,
                [cutoff](const Measurement& m) { return m.t_meas_us < cutoff; });
}

// One step of in-order processing: measurements must be fed with
// non-decreasing t_meas relative to the filter clock.
void apply_in_order(TrackState& track, const Measurement& m, const FilterParams& params) {
  const Micros dt = m.t_meas_us - track.t_filter_us;
  if (dt > params.epsilon_s_us) {
    predict(track, dt, params);
    track.t_filter_us = m.t_meas_us;
  }
  update(track, m);
  snapshot_upsert(track);
}

}  // namespace

void validate(const FilterParams& params) {
  if (params.epsilon_s_us < 0) throw ValidationError("FilterParams: epsilon_s must be >= 0");
  if (params.delta_max_us <= params.epsilon_s_us) {
    throw ValidationError("FilterParams: delta_max must exceed epsilon_s");
  }
  if (params.accel_density < 0 || params.size_walk < 0 || params.theta_walk < 0) {
    throw ValidationError("FilterParams: noise densities must be >= 0");
  }
}

Measurement to_measurement(const Detection& det) {
  Measurement m;
  m.z << det.box.x, det.box.y, det.box.w, det.box.d, det.box.theta;
  m.r_diag << det.sigma.x * det.sigma.x, det.sigma.y * det.sigma.y, det.sigma.w * det.sigma.w,
      det.sigma.d * det.sigma.d, det.sigma.theta * det.sigma.theta;
  m.r_diag = m.r_diag.cwiseMax(kMinMeasVariance);
  m.t_meas_us = det.t_meas_us;
  m.source = det.source;
  return m;
}

TrackState init_track(const Detection& det, const FilterParams& params, std::int64_t track_id) {
  const Measurement m = to_measurement(det);
  TrackState track;
  track.x_state << det.box.x, det.box.y, 0.0, 0.0, det.box.w, det.box.d, det.box.theta;
  track.P.setZero();
  track.P(kSx, kSx) = params.p0_meas_scale * m.r_diag(0);
  track.P(kSy, kSy) = params.p0_meas_scale * m.r_diag(1);
  track.P(kSvx, kSvx) = params.p0_velocity_std * params.p0_velocity_std;
  track.P(kSvy, kSvy) = params.p0_velocity_std * params.p0_velocity_std;
  track.P(kSw, kSw) = params.p0_meas_scale * m.r_diag(2);
  track.P(kSd, kSd) = params.p0_meas_scale * m.r_diag(3);
  track.P(kStheta, kStheta) = params.p0_meas_scale * m.r_diag(4);
  track.t_filter_us = det.t_meas_us;
  track.track_id = track_id;
  track.cls = det.cls;
  track.last_gt_id = det.gt_id;
  track.last_accept_us = det.t_meas_us;
  track.history.push_back({track.t_filter_us, track.x_state, track.P});
  return track;
}

void predict(TrackState& track, Micros dt_us, const FilterParams& params) {
  if (std::llabs(dt_us) > params.delta_max_us) {
    throw std::out_of_range("predict: |dt| exceeds delta_max");
  }
  if (dt_us == 0) return;

  const double dt = static_cast<double>(dt_us) * 1e-6;
  const double adt = std::fabs(dt);

  Mat7 f = Mat7::Identity();
  f(kSx, kSvx) = dt;
  f(kSy, kSvy) = dt;

  const double q = params.accel_density;
  Mat7 qm = Mat7::Zero();
  qm(kSx, kSx) = qm(kSy, kSy) = q * adt * adt * adt / 3.0;
  qm(kSx, kSvx) = qm(kSvx, kSx) = q * adt * adt / 2.0;
  qm(kSy, kSvy) = qm(kSvy, kSy) = q * adt * adt / 2.0;
  qm(kSvx, kSvx) = qm(kSvy, kSvy) = q * adt;
  qm(kSw, kSw) = qm(kSd, kSd) = params.size_walk * params.size_walk * adt;
  qm(kStheta, kStheta) = params.theta_walk * params.theta_walk * adt;

  track.x_state = (f * track.x_state).eval();
  track.P = (f * track.P * f.transpose() + qm).eval();
  symmetrize(track.P);
}

void update(TrackState& track, const Measurement& m) {
  Vec5 innovation = m.z - kH * track.x_state;
  innovation(4) = wrap_angle(innovation(4));

  Mat5 s = kH * track.P * kH.transpose();
  s.diagonal() += m.r_diag;

  const Eigen::LLT<Mat5> llt(s);
  if (llt.info() != Eigen::Success) {
    throw FilterDegenerateError("update: innovation covariance not positive definite");
  }

  const Eigen::Matrix<double, 7, 5> gain = track.P * kH.transpose() * llt.solve(Mat5::Identity());
  track.x_state += gain * innovation;
  track.x_state(kStheta) = wrap_angle(track.x_state(kStheta));

  const Mat7 i_kh = Mat7::Identity() - gain * kH;
  track.P = (i_kh * track.P * i_kh.transpose() + gain * m.r_diag.asDiagonal() * gain.transpose())
                .eval();
  symmetrize(track.P);
}

IngestResult ingest(TrackState& track, const Measurement& m, const FilterParams& params) {
  const Micros dt = m.t_meas_us - track.t_filter_us;
  if (std::llabs(dt) > params.delta_max_us) {
    return {Disposition::Discarded, DiscardReason::LatencyExceeded};
  }

  if (std::llabs(dt) <= params.epsilon_s_us) {
    update(track, m);
    buffer_insert(track, m);
    snapshot_upsert(track);
    prune_horizon(track, params);
    track.last_accept_us = std::max(track.last_accept_us, m.t_meas_us);
    return {Disposition::Synchronous, DiscardReason::None};
  }

  if (dt > 0) {
    predict(track, dt, params);
    track.t_filter_us = m.t_meas_us;
    update(track, m);
    buffer_insert(track, m);
    snapshot_upsert(track);
    prune_horizon(track, params);
    track.last_accept_us = std::max(track.last_accept_us, m.t_meas_us);
    return {Disposition::Asynchronous, DiscardReason::None};
  }

  // Out of sequence: roll back to the newest snapshot at or before t_meas,
  // fold the late measurement in, then replay everything after it.
  const int snap = snapshot_at_or_before(track, m.t_meas_us);
  if (snap < 0) {
    return {Disposition::Discarded, DiscardReason::HistoryUnderflow};
  }

  buffer_insert(track, m);
  const Micros rollback_t = track.history[snap].t_us;
  track.x_state = track.history[snap].x;
  track.P = track.history[snap].P;
  track.t_filter_us = rollback_t;
  track.history.resize(static_cast<std::size_t>(snap) + 1);

  if (m.t_meas_us == rollback_t) {
    // the snapshot already covers this timestamp; fold the newcomer in first
    update(track, m);
    snapshot_upsert(track);
  }
  for (const auto& buffered : track.meas_buffer) {
    if (buffered.t_meas_us <= rollback_t) continue;
    apply_in_order(track, buffered, params);
  }

  prune_horizon(track, params);
  track.last_accept_us = std::max(track.last_accept_us, m.t_meas_us);
  return {Disposition::OutOfSequence, DiscardReason::None};
}

FusedState fused_box(const TrackState& track) {
  FusedState out;
  out.box = BEVBox{track.x_state(kSx), track.x_state(kSy), track.x_state(kSw), track.x_state(kSd),
                   wrap_angle(track.x_state(kStheta))};
  out.vx = track.x_state(kSvx);
  out.vy = track.x_state(kSvy);
  out.pos_var = track.P(kSx, kSx) + track.P(kSy, kSy);
  out.theta_var = track.P(kStheta, kStheta);
  return out;
}

std::optional<FusedState> state_at(const TrackState& track, Micros t_us) {
  const int snap = snapshot_at_or_before(track, t_us);
  if (snap < 0) return std::nullopt;
  const Snapshot& s = track.history[snap];
  const double dt = static_cast<double>(t_us - s.t_us) * 1e-6;
  FusedState out;
  out.box = BEVBox{s.x(kSx) + s.x(kSvx) * dt, s.x(kSy) + s.x(kSvy) * dt, s.x(kSw), s.x(kSd),
                   wrap_angle(s.x(kStheta))};
  out.vx = s.x(kSvx);
  out.vy = s.x(kSvy);
  out.pos_var = s.P(kSx, kSx) + s.P(kSy, kSy);
  out.theta_var = s.P(kStheta, kStheta);
  return out;
}

}  // namespace bevfuse
