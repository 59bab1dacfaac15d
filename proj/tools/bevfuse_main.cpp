#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "bevfuse/errors.hpp"
#include "bevfuse/pipeline.hpp"

namespace fs = std::filesystem;
using namespace bevfuse;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

Micros parse_duration_us(const std::string& text) {
  std::size_t used = 0;
  const double value = std::stod(text, &used);
  const std::string unit = text.substr(used);
  if (unit.empty() || unit == "s") return static_cast<Micros>(value * 1e6);
  if (unit == "ms") return static_cast<Micros>(value * 1e3);
  if (unit == "us") return static_cast<Micros>(value);
  throw ValidationError("bad duration '" + text + "' (use s, ms or us)");
}

std::vector<std::string> split_list(const std::string& text, char sep = ',') {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> methods;
  for (const auto& name : split_list(list)) {
    const auto m = method_from_name(name);
    if (!m.has_value()) {
      throw ValidationError("unknown method '" + name + "' (valid: " + known_method_names() + ")");
    }
    methods.push_back(*m);
  }
  return methods;
}

struct SensorFlags {
  std::string noise{"noise1,noise1"};
  std::string periods;    // per-sensor durations, empty = scene frame period
  std::string latencies;  // empty = 0
  std::string phases;     // empty = 0
};

std::string noise_label(const std::vector<std::string>& presets) {
  std::string label;
  for (const auto& p : presets) {
    if (!label.empty()) label += "+";
    label += p;
  }
  return label;
}

// sensor 0 sits at the ego (origin); the others are re-placed randomly per frame
std::vector<SensorSpec> build_sensors(const Scene& scene, const std::vector<std::string>& presets,
                                      const SensorFlags& flags) {
  if (scene.frames.size() < 2 && flags.periods.empty()) {
    throw ValidationError("scene too short to infer a sensor period; pass --sensor-periods");
  }
  const Micros default_period = scene.frames.size() >= 2
                                    ? scene.frames[1].t_us - scene.frames[0].t_us
                                    : 500'000;

  const auto periods = flags.periods.empty() ? std::vector<std::string>{} : split_list(flags.periods);
  const auto latencies =
      flags.latencies.empty() ? std::vector<std::string>{} : split_list(flags.latencies);
  const auto phases = flags.phases.empty() ? std::vector<std::string>{} : split_list(flags.phases);

  auto nth = [](const std::vector<std::string>& list, std::size_t i) -> std::string {
    if (list.empty()) return "";
    return list[std::min(i, list.size() - 1)];
  };

  std::vector<SensorSpec> sensors;
  for (std::size_t i = 0; i < presets.size(); ++i) {
    SensorSpec spec;
    spec.sensor_id = "s" + std::to_string(i);
    spec.origin = {0.0, 0.0};
    spec.random_placement = i > 0;
    spec.noise = resolve_noise_preset(presets[i]);
    const std::string p = nth(periods, i);
    spec.period_us = p.empty() ? default_period : parse_duration_us(p);
    const std::string l = nth(latencies, i);
    spec.latency_us = l.empty() ? 0 : parse_duration_us(l);
    const std::string ph = nth(phases, i);
    spec.phase_us = ph.empty() ? 0 : parse_duration_us(ph);
    sensors.push_back(std::move(spec));
  }
  return sensors;
}

PipelineConfig build_pipeline(const Scene& scene, const std::vector<std::string>& presets,
                              const SensorFlags& flags, double iou_th, double dist_th,
                              double gate, Micros window_us, bool aabb_iou) {
  PipelineConfig config;
  config.sensors = build_sensors(scene, presets, flags);
  config.csba.gate = gate;
  config.wls_window_us = window_us;
  config.axis_aligned_iou = aabb_iou;

  if (iou_th > 0) {
    config.iou_threshold = iou_th;
  } else {
    // the noisiest preset's threshold governs mixed runs
    double th = 1.0;
    for (const auto& p : presets) th = std::min(th, preset_iou_threshold(p));
    config.iou_threshold = th;
  }
  if (dist_th > 0) {
    config.dist_threshold = dist_th;
  } else {
    double th = 0.0;
    for (const auto& p : presets) th = std::max(th, preset_dist_threshold(p));
    config.dist_threshold = th;
  }
  return config;
}

// Flat key=value config: values apply only where the command line stayed
// silent, so flags always win.
class ConfigOverlay {
 public:
  ConfigOverlay(CLI::App* cmd, const std::string& path) : cmd_(cmd) {
    if (!path.empty()) values_ = load_config(path);
  }

  template <typename T>
  void apply(const std::string& key, T& var) {
    const auto it = values_.find(key);
    if (it == values_.end()) return;
    consumed_.insert(key);
    const CLI::Option* opt = cmd_->get_option_no_throw("--" + key);
    if (opt != nullptr && opt->count() > 0) return;
    std::istringstream iss(it->second);
    if constexpr (std::is_same_v<T, std::string>) {
      var = it->second;
    } else {
      if (!(iss >> var) || !iss.eof()) {
        throw ValidationError("config: bad value for '" + key + "': " + it->second);
      }
    }
  }

  void finish() const {
    for (const auto& [key, value] : values_) {
      if (consumed_.find(key) == consumed_.end()) {
        throw ValidationError("config: unknown key '" + key + "'");
      }
    }
  }

 private:
  CLI::App* cmd_;
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

void require_fusible(const std::vector<Method>& methods, std::size_t sensor_count) {
  for (Method m : methods) {
    if (m != Method::None && sensor_count < 2) {
      throw ValidationError("method '" + std::string(method_name(m)) +
                            "' needs at least two sensors (--noise list)");
    }
  }
}

int cmd_synth(const std::string& out_path, int objects, const std::string& duration,
              const std::string& period, double extent, double turn_frac, std::uint64_t seed,
              bool force) {
  if (fs::exists(out_path) && !force) {
    throw ValidationError("refusing to overwrite '" + out_path + "' (use --force)");
  }
  SceneGenSpec spec;
  spec.objects = objects;
  spec.duration_us = parse_duration_us(duration);
  spec.period_us = parse_duration_us(period);
  spec.extent_m = extent;
  spec.turn_fraction = turn_frac;
  Rng rng = Rng::stream(seed, 0, 1000);  // lane separate from the trial/sensor streams
  const Scene scene = synth_scene(spec, rng);
  save_scene(scene, out_path);

  std::size_t total = 0;
  for (const auto& frame : scene.frames) total += frame.objects.size();
  std::cout << "scene '" << scene.scene_id << "': " << scene.frames.size() << " frames, "
            << spec.objects << " objects, " << total << " frame-objects -> " << out_path << "\n";
  return kExitOk;
}

int cmd_fuse(const std::string& scene_path, const std::string& methods_csv,
             const SensorFlags& sflags, int trials, std::uint64_t seed, const std::string& out_dir,
             int jobs, double iou_th, double dist_th, double gate, const std::string& window,
             bool aabb_iou, bool dump_detections) {
  const Scene scene = load_scene(scene_path);
  const auto presets = split_list(sflags.noise);
  const auto methods = parse_methods(methods_csv);
  require_fusible(methods, presets.size());
  const PipelineConfig config = build_pipeline(scene, presets, sflags, iou_th, dist_th, gate,
                                               parse_duration_us(window), aabb_iou);

  std::vector<TrialPredictions> trials_out(static_cast<std::size_t>(trials));
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, jobs))
#endif
  for (int t = 0; t < trials; ++t) {
    trials_out[static_cast<std::size_t>(t)] =
        run_trial_predictions(scene, config, methods, seed, t);
  }

  fs::create_directories(out_dir);
  if (dump_detections) {
    for (int t = 0; t < trials; ++t) {
      for (std::size_t s = 0; s < config.sensors.size(); ++s) {
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(t), s);
        const auto dets = realize_detections(scene, config.sensors[s], rng);
        const fs::path path = fs::path(out_dir) / ("detections_trial" + std::to_string(t) + "_" +
                                                   config.sensors[s].sensor_id + ".txt");
        save_detections(dets, path);
      }
    }
  }
  const std::string label = noise_label(presets);
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    FusedFile file;
    file.method = method_name(methods[mi]);
    file.noise_label = label;
    file.trials = trials;
    for (int t = 0; t < trials; ++t) {
      const MethodPredictions& preds = trials_out[static_cast<std::size_t>(t)].per_method[mi];
      for (std::size_t f = 0; f < preds.size(); ++f) {
        for (const auto& pred : preds[f]) {
          file.records.push_back({t, scene.frames[f].t_us, pred});
        }
      }
    }
    const fs::path path = fs::path(out_dir) / ("fused_" + file.method + ".txt");
    save_fused(file, path);
    std::cout << "wrote " << file.records.size() << " boxes -> " << path.string() << "\n";
  }
  return kExitOk;
}

ResultBlock evaluate_fused_file(const Scene& scene, const FusedFile& file, FpReference fp_ref) {
  std::map<Micros, std::size_t> frame_index;
  for (std::size_t f = 0; f < scene.frames.size(); ++f) frame_index[scene.frames[f].t_us] = f;

  ResultBlock block;
  block.method = file.method;
  block.noise_label = file.noise_label;
  std::vector<TrialMetrics> trial_metrics;
  for (int t = 0; t < file.trials; ++t) {
    MethodPredictions preds(scene.frames.size());
    for (const auto& rec : file.records) {
      if (rec.trial != t) continue;
      const auto it = frame_index.find(rec.t_us);
      if (it == frame_index.end()) {
        throw ValidationError("fused record at t_us=" + std::to_string(rec.t_us) +
                              " does not match any scene frame");
      }
      preds[it->second].push_back(rec.pred);
    }
    EvaluatedTrial evaluated = evaluate_predictions(scene, preds, fp_ref);
    block.trial_frames.push_back(std::move(evaluated.frames));
    trial_metrics.push_back(evaluated.metrics);
  }
  block.summary = aggregate(trial_metrics);
  return block;
}

int cmd_eval(const std::string& scene_path, const std::string& fused_dir,
             const std::string& out_dir, bool nearest_gt) {
  const Scene scene = load_scene(scene_path);
  const FpReference fp_ref = nearest_gt ? FpReference::NearestGt : FpReference::Lineage;

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(fused_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("fused_", 0) == 0 && entry.path().extension() == ".txt") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("no fused_*.txt files under '" + fused_dir + "'");

  std::vector<ResultBlock> blocks;
  for (const auto& path : files) {
    blocks.push_back(evaluate_fused_file(scene, load_fused(path), fp_ref));
  }
  write_results(blocks, out_dir);
  std::cout << render_report(blocks);
  std::cout << "results -> " << out_dir << "\n";
  return kExitOk;
}

int cmd_bench(const std::string& scene_path, const std::string& methods_csv,
              const std::string& noise_configs, int trials, std::uint64_t seed,
              const std::string& out_dir, int jobs, const SensorFlags& base_flags,
              bool aabb_iou) {
  const Scene scene = load_scene(scene_path);
  const auto methods = parse_methods(methods_csv);

  std::vector<ResultBlock> blocks;
  for (const auto& config_text : split_list(noise_configs)) {
    // "noise1" means both sensors at that level; "noise1:noise3" is heterogeneous
    std::vector<std::string> presets = split_list(config_text, ':');
    if (presets.size() == 1) presets.push_back(presets[0]);
    require_fusible(methods, presets.size());

    SensorFlags flags = base_flags;
    flags.noise.clear();
    ExperimentSpec spec;
    spec.scene = scene;
    spec.pipeline =
        build_pipeline(scene, presets, flags, 0, 0, CsbaParams{}.gate, 100'000, aabb_iou);
    spec.methods = methods;
    spec.trials = trials;
    spec.seed = seed;

    const ExperimentResult result = run_experiment(spec, jobs);
    for (const auto& mr : result.methods) {
      ResultBlock block;
      block.method = method_name(mr.method);
      block.noise_label = noise_label(presets);
      block.summary = mr.summary;
      block.trial_frames = mr.trial_frames;
      blocks.push_back(std::move(block));
    }
  }
  write_results(blocks, out_dir);
  std::cout << render_report(blocks);
  std::cout << "results -> " << out_dir << "\n";
  return kExitOk;
}

int cmd_report(const std::string& summary_path) {
  // re-render the machine summary as the human table
  auto in = std::ifstream(summary_path);
  if (!in) throw ParseError("cannot open: " + summary_path);
  std::vector<ResultBlock> blocks;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::map<std::string, std::string> fields;
    std::istringstream iss(line);
    std::string token;
    while (iss >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) throw ParseError(summary_path + ": bad token " + token);
      fields[token.substr(0, eq)] = token.substr(eq + 1);
    }
    auto num = [&](const std::string& key) {
      const auto it = fields.find(key);
      if (it == fields.end()) {
        throw ParseError(summary_path + ":" + std::to_string(line_no) + ": missing " + key);
      }
      return std::stod(it->second);
    };
    ResultBlock block;
    block.method = fields["method"];
    block.noise_label = fields["noise"];
    block.summary.trials = static_cast<int>(num("trials"));
    block.summary.m_ate = {num("m_ate"), num("m_ate_std")};
    block.summary.m_ade = {num("m_ade"), num("m_ade_std")};
    block.summary.m_aoe = {num("m_aoe_deg") * kDegToRad, num("m_aoe_deg_std") * kDegToRad};
    block.summary.precision = {num("precision"), num("precision_std")};
    block.summary.recall = {num("recall"), num("recall_std")};
    blocks.push_back(std::move(block));
  }
  std::cout << render_report(blocks);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BEV late-fusion evaluation pipeline"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene");
  const SceneGenSpec scene_defaults;
  std::string synth_out;
  int synth_objects = scene_defaults.objects;
  std::string synth_duration = "30s", synth_period = "500ms";
  double synth_extent = scene_defaults.extent_m, synth_turn = scene_defaults.turn_fraction;
  std::uint64_t synth_seed = 1;
  bool synth_force = false;
  synth->add_option("--out", synth_out, "output scene file")->required();
  synth->add_option("--objects", synth_objects, "object count");
  synth->add_option("--duration", synth_duration, "scene duration (s/ms/us)");
  synth->add_option("--period", synth_period, "frame period (s/ms/us)");
  synth->add_option("--extent", synth_extent, "half-size of the spawn square, m");
  synth->add_option("--turn-frac", synth_turn, "fraction of movers on turning paths");
  synth->add_option("--seed", synth_seed, "random seed");
  synth->add_flag("--force", synth_force, "overwrite existing output");

  // shared fuse/bench flags
  std::string scene_path, methods_csv = "unikf", out_dir = "out";
  SensorFlags sflags;
  int trials = 5, jobs = 0;
  std::uint64_t seed = 1;
  double iou_th = 0.0, dist_th = 0.0, gate = CsbaParams{}.gate;
  std::string window = "100ms";

  auto* fuse = app.add_subcommand("fuse", "perturb, associate and fuse over N trials");
  std::string fuse_config;
  fuse->add_option("--config", fuse_config, "flat key=value config file");
  fuse->add_option("--scene", scene_path, "scene file");
  fuse->add_option("--methods", methods_csv, "comma list of methods");
  fuse->add_option("--noise", sflags.noise, "per-sensor noise presets, e.g. noise1,noise3");
  fuse->add_option("--sensor-periods", sflags.periods, "per-sensor sample periods");
  fuse->add_option("--sensor-latencies", sflags.latencies, "per-sensor link latencies");
  fuse->add_option("--sensor-phases", sflags.phases, "per-sensor phase offsets");
  fuse->add_option("--trials", trials, "number of noise trials");
  fuse->add_option("--seed", seed, "master seed");
  fuse->add_option("--out", out_dir, "output directory")->envname("BEVFUSE_OUT");
  fuse->add_option("--jobs", jobs, "parallel trial workers (0 = all cores)");
  fuse->add_option("--iou-th", iou_th, "IoU threshold override");
  fuse->add_option("--dist-th", dist_th, "distance threshold override, m");
  fuse->add_option("--gate", gate, "CSBA score gate");
  fuse->add_option("--window", window, "WLS sliding window");
  bool dump_detections = false;
  fuse->add_flag("--dump-detections", dump_detections, "also write per-sensor detection files");
  bool aabb_iou = false;
  fuse->add_flag("--aabb-iou", aabb_iou, "gate IoU baselines on axis-aligned boxes");

  auto* eval = app.add_subcommand("eval", "score fused outputs against the scene");
  std::string eval_scene, eval_fused, eval_out = "out";
  bool eval_nearest = false;
  eval->add_option("--scene", eval_scene, "scene file")->required();
  eval->add_option("--fused", eval_fused, "directory with fused_*.txt")->required();
  eval->add_option("--out", eval_out, "output directory")->envname("BEVFUSE_OUT");
  eval->add_flag("--nearest-gt", eval_nearest, "measure FP errors against the nearest gt");

  auto* bench = app.add_subcommand("bench", "full method x noise matrix");
  std::string bench_scene, bench_methods = "unikf,wls,nms-std,nms-giou,wbf,psa,dist-late,none";
  std::string bench_noise = "noise1,noise2,noise3";
  std::string bench_out = "out";
  std::string bench_config;
  int bench_trials = 5, bench_jobs = 0;
  std::uint64_t bench_seed = 1;
  SensorFlags bench_flags;
  bench->add_option("--config", bench_config, "flat key=value config file");
  bench->add_option("--scene", bench_scene, "scene file");
  bench->add_option("--methods", bench_methods, "comma list of methods");
  bench->add_option("--noise-configs", bench_noise,
                    "comma list; 'noise1' = both sensors, 'noise1:noise3' = heterogeneous");
  bench->add_option("--trials", bench_trials, "number of noise trials");
  bench->add_option("--seed", bench_seed, "master seed");
  bench->add_option("--out", bench_out, "output directory")->envname("BEVFUSE_OUT");
  bench->add_option("--jobs", bench_jobs, "parallel trial workers (0 = all cores)");
  bench->add_option("--sensor-periods", bench_flags.periods, "per-sensor sample periods");
  bench->add_option("--sensor-latencies", bench_flags.latencies, "per-sensor link latencies");
  bench->add_option("--sensor-phases", bench_flags.phases, "per-sensor phase offsets");
  bool bench_aabb_iou = false;
  bench->add_flag("--aabb-iou", bench_aabb_iou, "gate IoU baselines on axis-aligned boxes");

  auto* report = app.add_subcommand("report", "render a summary file as a table");
  std::string report_summary;
  report->add_option("--summary", report_summary, "summary.txt path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    const int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (synth->parsed()) {
      return cmd_synth(synth_out, synth_objects, synth_duration, synth_period, synth_extent,
                       synth_turn, synth_seed, synth_force);
    }
    if (fuse->parsed()) {
      ConfigOverlay overlay(fuse, fuse_config);
      overlay.apply("scene", scene_path);
      overlay.apply("methods", methods_csv);
      overlay.apply("noise", sflags.noise);
      overlay.apply("sensor-periods", sflags.periods);
      overlay.apply("sensor-latencies", sflags.latencies);
      overlay.apply("sensor-phases", sflags.phases);
      overlay.apply("trials", trials);
      overlay.apply("seed", seed);
      overlay.apply("out", out_dir);
      overlay.apply("jobs", jobs);
      overlay.apply("iou-th", iou_th);
      overlay.apply("dist-th", dist_th);
      overlay.apply("gate", gate);
      overlay.apply("window", window);
      overlay.finish();
      if (scene_path.empty()) throw ValidationError("fuse: --scene (or config key) required");
      return cmd_fuse(scene_path, methods_csv, sflags, trials, seed, out_dir,
                      jobs > 0 ? jobs : hw, iou_th, dist_th, gate, window, aabb_iou,
                      dump_detections);
    }
    if (eval->parsed()) return cmd_eval(eval_scene, eval_fused, eval_out, eval_nearest);
    if (bench->parsed()) {
      ConfigOverlay overlay(bench, bench_config);
      overlay.apply("scene", bench_scene);
      overlay.apply("methods", bench_methods);
      overlay.apply("noise-configs", bench_noise);
      overlay.apply("sensor-periods", bench_flags.periods);
      overlay.apply("sensor-latencies", bench_flags.latencies);
      overlay.apply("sensor-phases", bench_flags.phases);
      overlay.apply("trials", bench_trials);
      overlay.apply("seed", bench_seed);
      overlay.apply("out", bench_out);
      overlay.apply("jobs", bench_jobs);
      overlay.finish();
      if (bench_scene.empty()) throw ValidationError("bench: --scene (or config key) required");
      return cmd_bench(bench_scene, bench_methods, bench_noise, bench_trials, bench_seed,
                       bench_out, bench_jobs > 0 ? bench_jobs : hw, bench_flags, bench_aabb_iou);
    }
    if (report->parsed()) return cmd_report(report_summary);
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
