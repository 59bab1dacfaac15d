#include "bevfuse/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace bevfuse {

namespace {

// score desc, then source asc, then t_meas asc
bool ranked_before(const ScoredDetection& a, const ScoredDetection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.det.source != b.det.source) return a.det.source < b.det.source;
  return a.det.t_meas_us < b.det.t_meas_us;
}

template <typename KeepPredicate>
std::vector<ScoredDetection> greedy_suppress(std::vector<ScoredDetection> dets,
                                             KeepPredicate&& suppresses) {
  std::sort(dets.begin(), dets.end(), ranked_before);
  std::vector<ScoredDetection> survivors;
  std::vector<char> gone(dets.size(), 0);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (gone[i]) continue;
    survivors.push_back(dets[i]);
    for (std::size_t j = i + 1; j < dets.size(); ++j) {
      if (!gone[j] && suppresses(dets[i], dets[j])) gone[j] = 1;
    }
  }
  return survivors;
}

double circular_mean(std::span<const double> angles, std::span<const double> weights) {
  double s = 0.0, c = 0.0;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    s += weights[i] * std::sin(angles[i]);
    c += weights[i] * std::cos(angles[i]);
  }
  return std::atan2(s, c);
}

}  // namespace

double detection_confidence(const Detection& det) {
  return 1.0 / (1.0 + det.sigma.x + det.sigma.y);
}

std::vector<ScoredDetection> make_scored(std::span<const Detection> dets) {
  std::vector<ScoredDetection> scored;
  scored.reserve(dets.size());
  for (const auto& det : dets) scored.push_back({det, detection_confidence(det)});
  return scored;
}

std::vector<ScoredDetection> nms_std(std::vector<ScoredDetection> dets, double iou_threshold,
                                     OverlapFn overlap) {
  return greedy_suppress(std::move(dets), [=](const ScoredDetection& kept,
                                              const ScoredDetection& other) {
    return overlap(kept.det.box, other.det.box) >= iou_threshold;
  });
}

std::vector<ScoredDetection> nms_giou(std::vector<ScoredDetection> dets, double giou_threshold) {
  return greedy_suppress(std::move(dets), [=](const ScoredDetection& kept,
                                              const ScoredDetection& other) {
    return giou_bev(kept.det.box, other.det.box) >= giou_threshold;
  });
}

std::vector<ScoredDetection> wbf(std::vector<ScoredDetection> dets, double iou_threshold,
                                 OverlapFn overlap) {
  std::sort(dets.begin(), dets.end(), ranked_before);

  struct Cluster {
    std::vector<ScoredDetection> members;
    BEVBox mean;  // running score-weighted mean, used for matching

    void refresh() {
      double wsum = 0.0, x = 0.0, y = 0.0, w = 0.0, d = 0.0;
      std::vector<double> thetas, weights;
      for (const auto& m : members) {
        wsum += m.score;
        x += m.score * m.det.box.x;
        y += m.score * m.det.box.y;
        w += m.score * m.det.box.w;
        d += m.score * m.det.box.d;
        thetas.push_back(m.det.box.theta);
        weights.push_back(m.score);
      }
      mean = BEVBox{x / wsum, y / wsum, w / wsum, d / wsum,
                    wrap_angle(circular_mean(thetas, weights))};
    }
  };

  std::vector<Cluster> clusters;
  for (auto& det : dets) {
    Cluster* best = nullptr;
    double best_iou = iou_threshold;
    for (auto& cluster : clusters) {
      const double v = overlap(cluster.mean, det.det.box);
      if (v >= best_iou) {
        best_iou = v;
        best = &cluster;
      }
    }
    if (best != nullptr) {
      best->members.push_back(std::move(det));
      best->refresh();
    } else {
      Cluster fresh;
      fresh.members.push_back(std::move(det));
      fresh.refresh();
      clusters.push_back(std::move(fresh));
    }
  }

  std::vector<ScoredDetection> fused;
  fused.reserve(clusters.size());
  for (const auto& cluster : clusters) {
    ScoredDetection out = cluster.members.front();  // dominant member carries identity fields
    out.det.box = cluster.mean;
    double ssum = 0.0;
    for (const auto& m : cluster.members) ssum += m.score;
    out.score = ssum / static_cast<double>(cluster.members.size());
    fused.push_back(std::move(out));
  }
  return fused;
}

std::vector<ScoredDetection> psa(std::vector<ScoredDetection> dets, double iou_threshold,
                                 OverlapFn overlap) {
  std::sort(dets.begin(), dets.end(), ranked_before);
  std::vector<ScoredDetection> promoted;
  std::vector<char> gone(dets.size(), 0);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (gone[i]) continue;
    int supporters = 0;
    for (std::size_t j = i + 1; j < dets.size(); ++j) {
      if (gone[j]) continue;
      if (overlap(dets[i].det.box, dets[j].det.box) >= iou_threshold) {
        gone[j] = 1;
        ++supporters;
      }
    }
    ScoredDetection out = dets[i];
    out.score = std::min(1.0, out.score * (1.0 + supporters));
    promoted.push_back(std::move(out));
  }
  return promoted;
}

std::vector<Detection> distance_late(std::span<const Detection> a, std::span<const Detection> b,
                                     double dist_threshold_m) {
  const AssociationResult assoc = dist_associate(a, b, dist_threshold_m);
  std::vector<Detection> fused;
  fused.reserve(assoc.pairs.size() + assoc.unmatched_a.size() + assoc.unmatched_b.size());
  for (const auto& pair : assoc.pairs) {
    const Detection& da = a[pair.a];
    const Detection& db = b[pair.b];
    Detection out = da;
    out.box.x = 0.5 * (da.box.x + db.box.x);
    out.box.y = 0.5 * (da.box.y + db.box.y);
    out.box.w = 0.5 * (da.box.w + db.box.w);
    out.box.d = 0.5 * (da.box.d + db.box.d);
    out.box.theta = wrap_angle(da.box.theta + 0.5 * wrap_angle(db.box.theta - da.box.theta));
    fused.push_back(std::move(out));
  }
  for (int i : assoc.unmatched_a) fused.push_back(a[i]);
  for (int j : assoc.unmatched_b) fused.push_back(b[j]);
  return fused;
}

WlsFused wls_fuse(std::span<const Detection> group) {
  WlsFused out;
  if (group.empty()) return out;

  const auto fuse_linear = [&](auto value_of, auto sigma_of, double& fused, double& fused_var) {
    // exact dominance for zero-variance members
    for (const auto& det : group) {
      if (sigma_of(det) == 0.0) {
        fused = value_of(det);
        fused_var = 0.0;
        return;
      }
    }
    double wsum = 0.0, acc = 0.0;
    for (const auto& det : group) {
      const double s = sigma_of(det);
      const double w = 1.0 / (s * s);
      wsum += w;
      acc += w * value_of(det);
    }
    fused = acc / wsum;
    fused_var = 1.0 / wsum;
  };

  fuse_linear([](const Detection& d) { return d.box.x; },
              [](const Detection& d) { return d.sigma.x; }, out.x, out.var_x);
  fuse_linear([](const Detection& d) { return d.box.y; },
              [](const Detection& d) { return d.sigma.y; }, out.y, out.var_y);
  fuse_linear([](const Detection& d) { return d.box.w; },
              [](const Detection& d) { return d.sigma.w; }, out.w, out.var_w);
  fuse_linear([](const Detection& d) { return d.box.d; },
              [](const Detection& d) { return d.sigma.d; }, out.d, out.var_d);

  // yaw on wrapped residuals about the first member
  const double theta0 = group.front().box.theta;
  double fused_residual = 0.0;
  fuse_linear([&](const Detection& d) { return wrap_angle(d.box.theta - theta0); },
              [](const Detection& d) { return d.sigma.theta; }, fused_residual, out.var_theta);
  out.theta = wrap_angle(theta0 + fused_residual);
  return out;
}

std::map<Micros, std::vector<Detection>> sliding_window_sync(
    std::span<const std::vector<Detection>> streams, Micros window_us) {
  std::map<Micros, std::vector<Detection>> ticks;
  for (const auto& stream : streams) {
    for (const auto& det : stream) {
      Micros tick = det.t_meas_us / window_us;
      if (det.t_meas_us < 0 && det.t_meas_us % window_us != 0) --tick;  // floor
      ticks[tick].push_back(det);
    }
  }
  return ticks;
}

}  // namespace bevfuse
