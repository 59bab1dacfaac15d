#include "bevfuse/noise.hpp"

#include <cmath>
#include <stdexcept>

#include "bevfuse/errors.hpp"

namespace bevfuse {

void validate(const NoiseConfig& cfg) {
  if (cfg.sigma_x0 < 0 || cfg.sigma_y0 < 0 || cfg.sigma_theta0 < 0 || cfg.sigma_alpha < 0 ||
      cfg.sigma_beta < 0) {
    throw ValidationError("NoiseConfig: sigmas must be >= 0");
  }
  if (cfg.k_x < 0 || cfg.k_y < 0 || cfg.k_theta < 0) {
    throw ValidationError("NoiseConfig: growth rates must be >= 0");
  }
  if (!(0.0 < cfg.clip_lo && cfg.clip_lo < 1.0 && 1.0 < cfg.clip_hi)) {
    throw ValidationError("NoiseConfig: require 0 < clip_lo < 1 < clip_hi");
  }
}

void validate(const SensorSpec& spec) {
  if (spec.period_us <= 0) throw ValidationError("SensorSpec: period must be > 0");
  if (spec.latency_us < 0) throw ValidationError("SensorSpec: latency must be >= 0");
  validate(spec.noise);
}

double sigma_at_distance(double base, double rate, double dist) {
  if (dist < 0.0) throw std::invalid_argument("sigma_at_distance: negative distance");
  return base + rate * dist;
}

PerturbedPose perturb_pose(const BEVBox& box, Point2 sensor_origin, const NoiseConfig& cfg,
                           Rng& rng) {
  const double dist = std::hypot(box.x - sensor_origin.x, box.y - sensor_origin.y);
  PerturbedPose out;
  out.sigma_x = sigma_at_distance(cfg.sigma_x0, cfg.k_x, dist);
  out.sigma_y = sigma_at_distance(cfg.sigma_y0, cfg.k_y, dist);
  out.sigma_theta = sigma_at_distance(cfg.sigma_theta0, cfg.k_theta, dist);
  out.x = box.x + rng.gaussian(0.0, out.sigma_x);
  out.y = box.y + rng.gaussian(0.0, out.sigma_y);
  out.theta = wrap_angle(box.theta + rng.gaussian(0.0, out.sigma_theta));
  return out;
}

std::pair<double, double> perturb_size(double w, double d, const NoiseConfig& cfg, Rng& rng) {
  const double alpha = rng.truncated_gaussian(1.0, cfg.sigma_alpha, cfg.clip_lo, cfg.clip_hi);
  const double beta = rng.truncated_gaussian(1.0, cfg.sigma_beta, cfg.clip_lo, cfg.clip_hi);
  return {alpha * w, beta * d};
}

Point2 place_secondary_sensor(const SceneFrame& frame, Rng& rng, double r_min, double r_max) {
  Point2 centroid{0.0, 0.0};
  if (frame.objects.empty()) return centroid;
  for (const auto& obj : frame.objects) {
    centroid.x += obj.box.x;
    centroid.y += obj.box.y;
  }
  centroid.x /= static_cast<double>(frame.objects.size());
  centroid.y /= static_cast<double>(frame.objects.size());

  // uniform over the annulus area
  const double u = rng.uniform01();
  const double r = std::sqrt(r_min * r_min + u * (r_max * r_max - r_min * r_min));
  const double phi = rng.uniform(0.0, 2.0 * M_PI);
  return {centroid.x + r * std::cos(phi), centroid.y + r * std::sin(phi)};
}

std::vector<Detection> realize_detections(const Scene& scene, const SensorSpec& sensor, Rng& rng) {
  validate(sensor);
  std::vector<Detection> dets;
  for (const auto& frame : scene.frames) {
    const Micros offset = frame.t_us - sensor.phase_us;
    if (offset < 0 || offset % sensor.period_us != 0) continue;

    const Point2 origin =
        sensor.random_placement ? place_secondary_sensor(frame, rng) : sensor.origin;
    for (const auto& obj : frame.objects) {
      const PerturbedPose pose = perturb_pose(obj.box, origin, sensor.noise, rng);
      const auto [w, d] = perturb_size(obj.box.w, obj.box.d, sensor.noise, rng);
      Detection det;
      det.box = make_box(pose.x, pose.y, w, d, pose.theta);
      det.source = sensor.sensor_id;
      det.t_meas_us = frame.t_us;
      det.t_recv_us = frame.t_us + sensor.latency_us;
      det.gt_id = obj.gt_id;
      det.cls = obj.cls;
      det.sigma = {pose.sigma_x, pose.sigma_y, pose.sigma_theta,
                   sensor.noise.sigma_alpha * obj.box.w, sensor.noise.sigma_beta * obj.box.d};
      dets.push_back(std::move(det));
    }
  }
  return dets;
}

namespace {

struct ClassProfile {
  ObjectClass cls;
  double weight;
  double w_m;
  double d_m;
  double speed_lo;
  double speed_hi;
  double parked_prob;  // chance a mover stands still, as parked cars do
};

// rough nuScenes-style dimensions, urban speeds and standing fractions
constexpr ClassProfile kProfiles[] = {
    {ObjectClass::Car, 0.40, 1.95, 4.60, 3.0, 10.0, 0.15},
    {ObjectClass::Truck, 0.10, 2.50, 7.00, 3.0, 8.0, 0.15},
    {ObjectClass::Bus, 0.05, 2.90, 11.0, 3.0, 8.0, 0.1},
    {ObjectClass::Pedestrian, 0.20, 0.67, 0.73, 0.5, 2.0, 0.1},
    {ObjectClass::Bicycle, 0.10, 0.60, 1.70, 1.0, 6.0, 0.1},
    {ObjectClass::Motorcycle, 0.05, 0.77, 2.10, 3.0, 10.0, 0.15},
    {ObjectClass::Barrier, 0.10, 2.30, 0.55, 0.0, 0.0, 1.0},
};

const ClassProfile& draw_profile(Rng& rng) {
  double u = rng.uniform01();
  for (const auto& p : kProfiles) {
    if (u < p.weight) return p;
    u -= p.weight;
  }
  return kProfiles[0];
}

// Movers step frame to frame (exact CV/arc segments) inside a bounded arena
// so sensor distances stay bounded over long scenes. Speed eases toward a
// target that is occasionally redrawn (stop-and-go traffic).
struct Mover {
  std::int64_t gt_id;
  ObjectClass cls;
  double w, d;
  double x, y;
  double heading;
  double speed;
  double turn_rate;  // rad/s; 0 for straight movers and statics
  bool parked{false};
  int dwell_frames{0};  // stopped at the arena edge before backing out
  double target_speed{0.0};
  double speed_lo{0.0}, speed_hi{0.0};
  static constexpr double kAccel = 3.0;  // m/s^2 toward the target speed

  GtObject snapshot() const {
    GtObject obj;
    obj.gt_id = gt_id;
    obj.cls = cls;
    obj.box = BEVBox{x, y, w, d, wrap_angle(heading)};
    obj.vx = speed * std::cos(heading);
    obj.vy = speed * std::sin(heading);
    return obj;
  }

  // Returns true when the mover just stopped at the arena edge; the caller
  // schedules the dwell-and-back-out. Heading never jumps, so yaw stays
  // continuous through every boundary interaction.
  bool advance(double dt_s, double wall) {
    if (parked || dwell_frames > 0) {
      if (dwell_frames > 0) --dwell_frames;
      return false;
    }
    if (speed != 0.0) {
      double nx, ny, npsi;
      if (turn_rate == 0.0) {
        nx = x + speed * std::cos(heading) * dt_s;
        ny = y + speed * std::sin(heading) * dt_s;
        npsi = heading;
      } else {
        npsi = heading + turn_rate * dt_s;
        nx = x + (speed / turn_rate) * (std::sin(npsi) - std::sin(heading));
        ny = y + (speed / turn_rate) * (std::cos(heading) - std::cos(npsi));
      }
      if (std::fabs(nx) > wall || std::fabs(ny) > wall) {
        speed = 0.0;
        target_speed = 0.0;
        return true;
      }
      x = nx;
      y = ny;
      heading = npsi;
    }
    // speed updates at step boundaries so each segment is exactly CV/CT
    const double gap = target_speed - speed;
    const double step = kAccel * dt_s;
    if (std::fabs(gap) <= step) {
      speed = target_speed;
    } else {
      speed += gap > 0.0 ? step : -step;
    }
    return false;
  }
};

}  // namespace

Scene synth_scene(const SceneGenSpec& spec, Rng& rng) {
  if (spec.objects < 1) throw ValidationError("SceneGenSpec: objects must be >= 1");
  if (spec.duration_us < 0 || spec.period_us <= 0) {
    throw ValidationError("SceneGenSpec: bad duration/period");
  }
  const double wall = spec.extent_m + 15.0;

  std::vector<Mover> movers;
  movers.reserve(static_cast<std::size_t>(spec.objects));
  for (int i = 0; i < spec.objects; ++i) {
    const ClassProfile& p = draw_profile(rng);
    Mover mover;
    mover.gt_id = i;
    mover.cls = p.cls;
    mover.w = p.w_m * rng.uniform(0.9, 1.1);
    mover.d = p.d_m * rng.uniform(0.9, 1.1);
    for (int attempt = 0; attempt < 64; ++attempt) {
      mover.x = rng.uniform(-spec.extent_m, spec.extent_m);
      mover.y = rng.uniform(-spec.extent_m, spec.extent_m);
      bool clear = true;
      for (const auto& other : movers) {
        if (std::hypot(other.x - mover.x, other.y - mover.y) < 6.0) clear = false;
      }
      if (clear) break;
    }
    mover.heading = rng.uniform(-M_PI, M_PI);
    mover.parked = rng.uniform01() < p.parked_prob;
    mover.speed_lo = p.speed_lo;
    mover.speed_hi = p.speed_hi;
    mover.speed = mover.parked ? 0.0 : rng.uniform(p.speed_lo, p.speed_hi);
    mover.target_speed = mover.speed;
    mover.turn_rate = 0.0;
    if (!mover.parked && mover.speed > 0.0 && rng.uniform01() < spec.turn_fraction) {
      const double mag = rng.uniform(0.05, 0.15);
      mover.turn_rate = rng.uniform01() < 0.5 ? mag : -mag;
    }
    movers.push_back(mover);
  }

  Scene scene;
  scene.scene_id = spec.scene_id;
  const double dt_s = static_cast<double>(spec.period_us) * 1e-6;
  const double event_prob = 0.35;  // stop-and-go target redraw, per mover per frame
  for (Micros t = 0; t <= spec.duration_us; t += spec.period_us) {
    SceneFrame frame;
    frame.t_us = t;
    frame.objects.reserve(movers.size());
    for (auto& mover : movers) frame.objects.push_back(mover.snapshot());
    for (auto& mover : movers) {
      if (!mover.parked && mover.dwell_frames == 0 && rng.uniform01() < event_prob) {
        mover.target_speed =
            rng.uniform01() < 0.4 ? 0.0 : rng.uniform(mover.speed_lo, mover.speed_hi);
      }
      if (mover.advance(dt_s, wall)) {
        // wait at the edge, then back out the way we came
        mover.dwell_frames = 2 + static_cast<int>(rng.next_u64() % 8);
        mover.target_speed = -rng.uniform(1.0, 3.0);
      }
    }
    scene.frames.push_back(std::move(frame));
  }
  validate_scene(scene);
  return scene;
}

}  // namespace bevfuse
