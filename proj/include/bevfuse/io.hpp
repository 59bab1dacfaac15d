#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bevfuse/eval.hpp"
#include "bevfuse/noise.hpp"

namespace bevfuse {

// Scene persistence: one frame-object row per line of self-describing
// key=value fields. Round-trips are lossless; yaw is normalized on load.
void save_scene(const Scene& scene, const std::filesystem::path& path);
Scene load_scene(const std::filesystem::path& path);

void save_detections(std::span<const Detection> dets, const std::filesystem::path& path);
std::vector<Detection> load_detections(const std::filesystem::path& path);

/// Table-driven noise presets ("noise1", "noise2", "noise3"). Angles are
/// degrees in the preset table and radians in the returned config.
NoiseConfig resolve_noise_preset(const std::string& name);

/// Baseline gating thresholds paired with each preset.
double preset_iou_threshold(const std::string& name);
double preset_dist_threshold(const std::string& name);

const std::vector<std::string>& known_noise_presets();

/// Flat key=value config file; '#' starts a comment. Values keep their raw
/// string form (method lists stay comma-separated).
std::map<std::string, std::string> load_config(const std::filesystem::path& path);

/// Fused predictions as written by the fuse command: one row per box per
/// trial, preceded by a '#' metadata header.
struct FusedRecord {
  int trial{0};
  Micros t_us{0};
  FusedPred pred;
};

struct FusedFile {
  std::string method;
  std::string noise_label;
  int trials{0};
  std::vector<FusedRecord> records;
};

void save_fused(const FusedFile& file, const std::filesystem::path& path);
FusedFile load_fused(const std::filesystem::path& path);

/// One benchmark cell: a method evaluated under one sensor noise pairing.
struct ResultBlock {
  std::string method;
  std::string noise_label;  // e.g. "noise1+noise3"
  RunSummary summary;
  // frame rows per trial, in trial order
  std::vector<std::vector<FrameMetrics>> trial_frames;
};

/// Emits summary.txt (mean +/- std per metric per block), frames.txt (the
/// per-frame table) and plotdata.txt (metric-vs-noise series plus per-class
/// breakdowns). Field order and float formatting are deterministic.
void write_results(std::span<const ResultBlock> blocks, const std::filesystem::path& dir);

/// Human-readable comparison table (mAOE in degrees), one row per block.
std::string render_report(std::span<const ResultBlock> blocks);

// Full-precision float formatting shared by every writer (%.17g).
std::string fmt_full(double v);

constexpr double kRadToDeg = 180.0 / M_PI;
constexpr double kDegToRad = M_PI / 180.0;

}  // namespace bevfuse
