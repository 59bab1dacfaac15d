#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bevfuse/geometry.hpp"
#include "bevfuse/rng.hpp"
#include "bevfuse/scene.hpp"

namespace bevfuse {

/// Per-sensor error profile: base sigmas at the sensor location, linear growth
/// rates with object distance, and multiplicative size-noise parameters.
struct NoiseConfig {
  double sigma_x0{0.0};      // m
  double sigma_y0{0.0};      // m
  double sigma_theta0{0.0};  // rad
  double k_x{0.0};           // m per m of distance
  double k_y{0.0};           // m per m
  double k_theta{0.0};       // rad per m
  double sigma_alpha{0.0};   // width scale factor std
  double sigma_beta{0.0};    // depth scale factor std
  double clip_lo{0.3};       // size factor truncation bounds
  double clip_hi{3.0};
};

void validate(const NoiseConfig& cfg);

struct SensorSpec {
  std::string sensor_id;
  Point2 origin{};               // global frame; redrawn per frame when random_placement
  bool random_placement{false};  // uniform annulus about the frame centroid
  Micros period_us{500'000};
  Micros phase_us{0};
  Micros latency_us{0};
  NoiseConfig noise;
};

void validate(const SensorSpec& spec);

/// Per-component standard deviations attached to a detection; these feed the
/// measurement covariance downstream.
struct SigmaVector {
  double x{0.0};
  double y{0.0};
  double theta{0.0};
  double w{0.0};
  double d{0.0};
};

struct Detection {
  BEVBox box;
  std::string source;
  Micros t_meas_us{0};
  Micros t_recv_us{0};  // t_meas + latency
  std::int64_t gt_id{-1};
  ObjectClass cls{ObjectClass::Car};
  SigmaVector sigma;
};

// sigma(d) = base + rate * dist. Throws std::invalid_argument for dist < 0.
double sigma_at_distance(double base, double rate, double dist);

struct PerturbedPose {
  double x{0.0};
  double y{0.0};
  double theta{0.0};
  double sigma_x{0.0};
  double sigma_y{0.0};
  double sigma_theta{0.0};
};

/// Draws zero-mean Gaussian position/yaw errors at the distance-scaled sigmas
/// and returns both the perturbed pose and the sigmas used.
PerturbedPose perturb_pose(const BEVBox& box, Point2 sensor_origin, const NoiseConfig& cfg,
                           Rng& rng);

/// Multiplicative size noise: factors from N(1, sigma^2) truncated to
/// [clip_lo, clip_hi], so outputs stay strictly positive.
std::pair<double, double> perturb_size(double w, double d, const NoiseConfig& cfg, Rng& rng);

constexpr double kSensorAnnulusMin = 10.0;  // m
constexpr double kSensorAnnulusMax = 50.0;  // m

/// Uniform-area draw on the annulus [r_min, r_max] about the frame's object
/// centroid; falls back to the origin for an empty frame.
Point2 place_secondary_sensor(const SceneFrame& frame, Rng& rng,
                              double r_min = kSensorAnnulusMin,
                              double r_max = kSensorAnnulusMax);

/// One noisy detection per ground-truth object for every frame on the sensor's
/// period/phase grid, time-ordered by t_meas.
std::vector<Detection> realize_detections(const Scene& scene, const SensorSpec& sensor, Rng& rng);

struct SceneGenSpec {
  std::string scene_id{"scene0"};
  int objects{18};
  Micros duration_us{30'000'000};
  Micros period_us{500'000};
  double extent_m{45.0};      // objects start within [-extent, extent]^2
  double turn_fraction{0.5};  // fraction of movers on constant-turn trajectories
};

/// Synthetic stand-in scene: constant-velocity and constant-turn movers with
/// class-typical dimensions plus static barriers.
Scene synth_scene(const SceneGenSpec& spec, Rng& rng);

}  // namespace bevfuse
