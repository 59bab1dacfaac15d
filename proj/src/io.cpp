#include "bevfuse/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bevfuse/errors.hpp"

namespace bevfuse {

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::string fmt2(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// key=value tokens separated by whitespace
std::map<std::string, std::string> parse_record(const std::string& line) {
  std::map<std::string, std::string> fields;
  std::istringstream iss(line);
  std::string token;
  while (iss >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ParseError("malformed token '" + token + "'");
    }
    fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return fields;
}

class RecordReader {
 public:
  RecordReader(const std::map<std::string, std::string>& fields, const std::string& path, int line)
      : fields_(fields), path_(path), line_(line) {}

  const std::string& str(const std::string& key) const {
    const auto it = fields_.find(key);
    if (it == fields_.end()) {
      throw ParseError(path_ + ":" + std::to_string(line_) + ": missing field '" + key + "'");
    }
    return it->second;
  }

  double num(const std::string& key) const {
    const std::string& raw = str(key);
    try {
      std::size_t used = 0;
      const double v = std::stod(raw, &used);
      if (used != raw.size()) throw std::invalid_argument(raw);
      return v;
    } catch (const std::exception&) {
      throw ParseError(path_ + ":" + std::to_string(line_) + ": field '" + key +
                       "' is not a number: '" + raw + "'");
    }
  }

  std::int64_t integer(const std::string& key) const {
    const std::string& raw = str(key);
    try {
      std::size_t used = 0;
      const std::int64_t v = std::stoll(raw, &used);
      if (used != raw.size()) throw std::invalid_argument(raw);
      return v;
    } catch (const std::exception&) {
      throw ParseError(path_ + ":" + std::to_string(line_) + ": field '" + key +
                       "' is not an integer: '" + raw + "'");
    }
  }

  ObjectClass object_class(const std::string& key) const {
    const auto cls = class_from_name(str(key));
    if (!cls.has_value()) {
      throw ParseError(path_ + ":" + std::to_string(line_) + ": unknown class '" + str(key) + "'");
    }
    return *cls;
  }

 private:
  const std::map<std::string, std::string>& fields_;
  const std::string& path_;
  int line_;
};

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path.string());
  return in;
}

bool skippable(const std::string& line) {
  for (char c : line) {
    if (c == '#') return true;
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

}  // namespace

void save_scene(const Scene& scene, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& frame : scene.frames) {
    for (const auto& obj : frame.objects) {
      out << "scene_id=" << scene.scene_id << " t_us=" << frame.t_us << " gt_id=" << obj.gt_id
          << " class=" << class_name(obj.cls) << " x=" << fmt_full(obj.box.x)
          << " y=" << fmt_full(obj.box.y) << " w=" << fmt_full(obj.box.w)
          << " d=" << fmt_full(obj.box.d) << " yaw_rad=" << fmt_full(obj.box.theta)
          << " vx=" << fmt_full(obj.vx) << " vy=" << fmt_full(obj.vy) << "\n";
    }
  }
}

Scene load_scene(const std::filesystem::path& path) {
  auto in = open_in(path);
  Scene scene;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skippable(line)) continue;
    const auto fields = parse_record(line);
    const RecordReader rec(fields, path.string(), line_no);

    if (scene.scene_id.empty()) scene.scene_id = rec.str("scene_id");
    const Micros t = rec.integer("t_us");
    if (scene.frames.empty() || scene.frames.back().t_us != t) {
      if (!scene.frames.empty() && t < scene.frames.back().t_us) {
        throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                              ": non-monotone frame timestamp");
      }
      scene.frames.push_back({t, {}});
    }
    GtObject obj;
    obj.gt_id = rec.integer("gt_id");
    obj.cls = rec.object_class("class");
    obj.box = make_box(rec.num("x"), rec.num("y"), rec.num("w"), rec.num("d"), rec.num("yaw_rad"));
    obj.vx = rec.num("vx");
    obj.vy = rec.num("vy");
    scene.frames.back().objects.push_back(std::move(obj));
  }
  validate_scene(scene);
  return scene;
}

void save_detections(std::span<const Detection> dets, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& det : dets) {
    out << "source=" << det.source << " t_meas_us=" << det.t_meas_us
        << " t_recv_us=" << det.t_recv_us << " gt_id=" << det.gt_id
        << " class=" << class_name(det.cls) << " x=" << fmt_full(det.box.x)
        << " y=" << fmt_full(det.box.y) << " w=" << fmt_full(det.box.w)
        << " d=" << fmt_full(det.box.d) << " yaw_rad=" << fmt_full(det.box.theta)
        << " sx=" << fmt_full(det.sigma.x) << " sy=" << fmt_full(det.sigma.y)
        << " stheta=" << fmt_full(det.sigma.theta) << " sw=" << fmt_full(det.sigma.w)
        << " sd=" << fmt_full(det.sigma.d) << "\n";
  }
}

std::vector<Detection> load_detections(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<Detection> dets;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skippable(line)) continue;
    const auto fields = parse_record(line);
    const RecordReader rec(fields, path.string(), line_no);
    Detection det;
    det.source = rec.str("source");
    det.t_meas_us = rec.integer("t_meas_us");
    det.t_recv_us = rec.integer("t_recv_us");
    det.gt_id = rec.integer("gt_id");
    det.cls = rec.object_class("class");
    det.box = make_box(rec.num("x"), rec.num("y"), rec.num("w"), rec.num("d"), rec.num("yaw_rad"));
    det.sigma = {rec.num("sx"), rec.num("sy"), rec.num("stheta"), rec.num("sw"), rec.num("sd")};
    if (det.t_recv_us < det.t_meas_us) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": t_recv < t_meas");
    }
    dets.push_back(std::move(det));
  }
  return dets;
}

namespace {

struct PresetRow {
  const char* name;
  double sigma_xy;      // m
  double sigma_theta0;  // deg
  double sigma_ab;      // size factor std
  double iou_th;
  double dist_th;  // m
};

// noise level table: position/yaw/size sigmas with the matching baseline thresholds
constexpr PresetRow kPresets[] = {
    {"noise1", 0.2, 0.2, 0.2, 0.5, 3.0},
    {"noise2", 0.5, 5.0, 0.5, 0.5, 3.0},
    {"noise3", 1.0, 10.0, 1.0, 0.3, 3.0},
};

constexpr double kPositionRate = 0.01;  // m per m
constexpr double kThetaRateDeg = 0.1;   // deg per m

const PresetRow& preset_row(const std::string& name) {
  for (const auto& row : kPresets) {
    if (name == row.name) return row;
  }
  std::string valid;
  for (const auto& row : kPresets) {
    if (!valid.empty()) valid += ", ";
    valid += row.name;
  }
  throw ValidationError("unknown noise preset '" + name + "' (valid: " + valid + ")");
}

}  // namespace

NoiseConfig resolve_noise_preset(const std::string& name) {
  const PresetRow& row = preset_row(name);
  NoiseConfig cfg;
  cfg.sigma_x0 = row.sigma_xy;
  cfg.sigma_y0 = row.sigma_xy;
  cfg.sigma_theta0 = row.sigma_theta0 * kDegToRad;
  cfg.k_x = kPositionRate;
  cfg.k_y = kPositionRate;
  cfg.k_theta = kThetaRateDeg * kDegToRad;
  cfg.sigma_alpha = row.sigma_ab;
  cfg.sigma_beta = row.sigma_ab;
  cfg.clip_lo = 0.3;
  cfg.clip_hi = 3.0;
  return cfg;
}

double preset_iou_threshold(const std::string& name) { return preset_row(name).iou_th; }
double preset_dist_threshold(const std::string& name) { return preset_row(name).dist_th; }

const std::vector<std::string>& known_noise_presets() {
  static const std::vector<std::string> names = {"noise1", "noise2", "noise3"};
  return names;
}

std::map<std::string, std::string> load_config(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::map<std::string, std::string> config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skippable(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    config[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return config;
}

void save_fused(const FusedFile& file, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "# method=" << file.method << " noise=" << file.noise_label << " trials=" << file.trials
      << "\n";
  for (const auto& rec : file.records) {
    out << "trial=" << rec.trial << " t_us=" << rec.t_us << " gt_id=" << rec.pred.gt_id
        << " class=" << class_name(rec.pred.cls) << " x=" << fmt_full(rec.pred.box.x)
        << " y=" << fmt_full(rec.pred.box.y) << " w=" << fmt_full(rec.pred.box.w)
        << " d=" << fmt_full(rec.pred.box.d) << " yaw_rad=" << fmt_full(rec.pred.box.theta)
        << " flagged=" << (rec.pred.lineage_flagged ? 1 : 0) << "\n";
  }
}

FusedFile load_fused(const std::filesystem::path& path) {
  auto in = open_in(path);
  FusedFile file;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.rfind("# ", 0) == 0) {
      const auto meta = parse_record(line.substr(2));
      const RecordReader rec(meta, path.string(), line_no);
      file.method = rec.str("method");
      file.noise_label = rec.str("noise");
      file.trials = static_cast<int>(rec.integer("trials"));
      continue;
    }
    if (skippable(line)) continue;
    const auto fields = parse_record(line);
    const RecordReader rec(fields, path.string(), line_no);
    FusedRecord record;
    record.trial = static_cast<int>(rec.integer("trial"));
    record.t_us = rec.integer("t_us");
    record.pred.gt_id = rec.integer("gt_id");
    record.pred.cls = rec.object_class("class");
    record.pred.box =
        make_box(rec.num("x"), rec.num("y"), rec.num("w"), rec.num("d"), rec.num("yaw_rad"));
    record.pred.lineage_flagged = rec.integer("flagged") != 0;
    file.records.push_back(std::move(record));
  }
  if (file.trials <= 0) {
    throw ParseError(path.string() + ": missing or invalid '# method=... trials=...' header");
  }
  return file;
}

void write_results(std::span<const ResultBlock> blocks, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  {
    auto out = open_out(dir / "summary.txt");
    for (const auto& block : blocks) {
      const RunSummary& s = block.summary;
      out << "method=" << block.method << " noise=" << block.noise_label
          << " trials=" << s.trials << " m_ate=" << fmt_full(s.m_ate.mean)
          << " m_ate_std=" << fmt_full(s.m_ate.stddev)
          << " m_ade=" << fmt_full(s.m_ade.mean) << " m_ade_std=" << fmt_full(s.m_ade.stddev)
          << " m_aoe_deg=" << fmt_full(s.m_aoe.mean * kRadToDeg)
          << " m_aoe_deg_std=" << fmt_full(s.m_aoe.stddev * kRadToDeg)
          << " precision=" << fmt_full(s.precision.mean)
          << " precision_std=" << fmt_full(s.precision.stddev)
          << " recall=" << fmt_full(s.recall.mean) << " recall_std=" << fmt_full(s.recall.stddev);
      if (s.sota_defined) {
        out << " sota_m_ate=" << fmt_full(s.sota_m_ate.mean)
            << " sota_m_ade=" << fmt_full(s.sota_m_ade.mean)
            << " sota_m_aoe_deg=" << fmt_full(s.sota_m_aoe.mean * kRadToDeg);
      } else {
        out << " sota_m_ate=nan sota_m_ade=nan sota_m_aoe_deg=nan";
      }
      out << "\n";
    }
  }

  {
    auto out = open_out(dir / "frames.txt");
    for (const auto& block : blocks) {
      for (std::size_t trial = 0; trial < block.trial_frames.size(); ++trial) {
        for (const auto& fm : block.trial_frames[trial]) {
          out << "method=" << block.method << " noise=" << block.noise_label
              << " trial=" << trial << " t_us=" << fm.t_us << " ate=" << fmt_full(fm.ate)
              << " aoe_rad=" << fmt_full(fm.aoe) << " ade=" << fmt_full(fm.ade)
              << " tp=" << fm.tp << " fp=" << fm.fp << " fn=" << fm.fn
              << " precision=" << fmt_full(fm.precision) << " recall=" << fmt_full(fm.recall)
              << "\n";
        }
      }
    }
  }

  {
    auto out = open_out(dir / "plotdata.txt");
    const char* series[] = {"m_ate", "m_ade", "m_aoe_deg", "precision", "recall"};
    for (const char* name : series) {
      for (const auto& block : blocks) {
        const RunSummary& s = block.summary;
        MeanStd v;
        if (std::string(name) == "m_ate") v = s.m_ate;
        else if (std::string(name) == "m_ade") v = s.m_ade;
        else if (std::string(name) == "m_aoe_deg") v = {s.m_aoe.mean * kRadToDeg, s.m_aoe.stddev * kRadToDeg};
        else if (std::string(name) == "precision") v = s.precision;
        else v = s.recall;
        out << "series=" << name << " method=" << block.method << " noise=" << block.noise_label
            << " value=" << fmt_full(v.mean) << " std=" << fmt_full(v.stddev) << "\n";
      }
    }
    for (const auto& block : blocks) {
      const ClassErrorSums& cs = block.summary.by_class;
      for (int c = 0; c < kNumClasses; ++c) {
        if (cs.count[c] == 0) continue;
        const double n = static_cast<double>(cs.count[c]);
        out << "series=class_errors method=" << block.method << " noise=" << block.noise_label
            << " class=" << class_name(static_cast<ObjectClass>(c))
            << " ate=" << fmt_full(cs.ate_sum[c] / n)
            << " aoe_deg=" << fmt_full(cs.aoe_sum[c] / n * kRadToDeg) << " n=" << cs.count[c]
            << "\n";
      }
    }
  }
}

std::string render_report(std::span<const ResultBlock> blocks) {
  std::ostringstream out;
  out << "method            noise              mATE (m)        mADE (m)        mAOE (deg)      "
         "precision  recall\n";
  for (const auto& block : blocks) {
    const RunSummary& s = block.summary;
    char line[256];
    std::snprintf(line, sizeof(line), "%-17s %-18s %6s +- %-5s %6s +- %-5s %6s +- %-5s %9s  %6s\n",
                  block.method.c_str(), block.noise_label.c_str(), fmt2(s.m_ate.mean).c_str(),
                  fmt2(s.m_ate.stddev).c_str(), fmt2(s.m_ade.mean).c_str(),
                  fmt2(s.m_ade.stddev).c_str(), fmt2(s.m_aoe.mean * kRadToDeg).c_str(),
                  fmt2(s.m_aoe.stddev * kRadToDeg).c_str(),
                  fmt2(100.0 * s.precision.mean).c_str(), fmt2(100.0 * s.recall.mean).c_str());
    out << line;
  }
  return out.str();
}

}  // namespace bevfuse
