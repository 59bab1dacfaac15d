#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bevfuse/assoc.hpp"
#include "bevfuse/io.hpp"

using namespace bevfuse;

namespace {

Detection make_det(double x, double y, double w, double d, double theta, double sigma = 0.5,
                   std::int64_t gt = -1) {
  Detection det;
  det.box = make_box(x, y, w, d, theta);
  det.sigma = {sigma, sigma, 0.1, 0.2, 0.2};
  det.gt_id = gt;
  return det;
}

// Exhaustive two-phase optimum over injections of the smaller list: pick the
// assignment maximizing the ungated score total, then dissolve sub-gate
// pairs. Returns the gated total of that assignment.
double brute_force_best(const std::vector<Detection>& a, const std::vector<Detection>& b,
                        const CsbaParams& params, std::vector<std::pair<int, int>>* best_pairs) {
  const bool swap = a.size() > b.size();
  const auto& small = swap ? b : a;
  const auto& large = swap ? a : b;

  std::vector<int> idx(large.size());
  std::iota(idx.begin(), idx.end(), 0);

  double best_ungated = -1.0;
  double best_gated = -1.0;
  std::vector<std::pair<int, int>> best_assignment;
  do {
    double ungated = 0.0, gated = 0.0;
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t i = 0; i < small.size(); ++i) {
      const Detection& da = swap ? large[idx[i]] : small[i];
      const Detection& db = swap ? small[i] : large[idx[i]];
      const double s = csba_score(da, db, params);
      ungated += s;
      if (s >= params.gate) {
        gated += s;
        pairs.emplace_back(swap ? idx[i] : static_cast<int>(i),
                           swap ? static_cast<int>(i) : idx[i]);
      }
    }
    if (ungated > best_ungated) {
      best_ungated = ungated;
      best_gated = gated;
      best_assignment = std::move(pairs);
    }
  } while (std::next_permutation(idx.begin(), idx.end()));

  if (best_pairs != nullptr) *best_pairs = best_assignment;
  return best_gated;
}

double gated_total(const AssociationResult& result, const std::vector<Detection>& a,
                   const std::vector<Detection>& b, const CsbaParams& params) {
  double total = 0.0;
  for (const auto& pair : result.pairs) total += csba_score(a[pair.a], b[pair.b], params);
  return total;
}

void check_partition(const AssociationResult& r, std::size_t na, std::size_t nb) {
  std::vector<int> seen_a(na, 0), seen_b(nb, 0);
  for (const auto& pair : r.pairs) {
    ++seen_a[pair.a];
    ++seen_b[pair.b];
  }
  for (int i : r.unmatched_a) ++seen_a[i];
  for (int j : r.unmatched_b) ++seen_b[j];
  for (int c : seen_a) CHECK(c == 1);
  for (int c : seen_b) CHECK(c == 1);
}

std::vector<Detection> random_frame(Rng& rng, int count, const NoiseConfig& noise,
                                    std::vector<Detection>* truth = nullptr) {
  std::vector<Detection> dets;
  for (int i = 0; i < count; ++i) {
    const BEVBox gt = make_box(rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(0.6, 3),
                               rng.uniform(0.6, 8), rng.uniform(-M_PI, M_PI));
    if (truth != nullptr) truth->push_back(make_det(gt.x, gt.y, gt.w, gt.d, gt.theta, 0.5, i));
    const auto pose = perturb_pose(gt, {0, 0}, noise, rng);
    const auto [w, d] = perturb_size(gt.w, gt.d, noise, rng);
    Detection det;
    det.box = make_box(pose.x, pose.y, w, d, pose.theta);
    det.sigma = {pose.sigma_x, pose.sigma_y, pose.sigma_theta, noise.sigma_alpha * gt.w,
                 noise.sigma_beta * gt.d};
    det.gt_id = i;
    dets.push_back(std::move(det));
  }
  return dets;
}

}  // namespace

TEST_CASE("csba_score fixtures") {
  const Detection a = make_det(1, 2, 2, 4, 0.3);

  SUBCASE("identical detections score 1") {
    CHECK(csba_score(a, a) == doctest::Approx(1.0));
  }

  SUBCASE("hand-computed orientation discount") {
    CsbaParams params;  // weights (0.5, 0.3, 0.2), scale_theta 0.5
    Detection b = a;
    b.box.theta = wrap_angle(a.box.theta + params.scale_theta);
    const double want = 0.5 + 0.3 + 0.2 * std::exp(-1.0);
    CHECK(csba_score(a, b, params) == doctest::Approx(want).epsilon(1e-9));
    CHECK(want == doctest::Approx(0.8736).epsilon(1e-4));
  }

  SUBCASE("center term collapses in the Gaussian tail") {
    CsbaParams center_only;
    center_only.w_center = 1.0;
    center_only.w_dim = 0.0;
    center_only.w_theta = 0.0;
    Detection b = a;
    b.box.x = a.box.x + 100.0 * a.sigma.x;
    CHECK(csba_score(a, b, center_only) < 1e-3);
  }

  SUBCASE("zero covariance with nonzero offset scores the center term 0") {
    Detection na = a, nb = a;
    na.sigma.x = na.sigma.y = 0.0;
    nb.sigma.x = nb.sigma.y = 0.0;
    nb.box.x += 0.5;
    CsbaParams center_only;
    center_only.w_center = 1.0;
    center_only.w_dim = 0.0;
    center_only.w_theta = 0.0;
    CHECK(csba_score(na, nb, center_only) == 0.0);
    nb.box.x = na.box.x;
    CHECK(csba_score(na, nb, center_only) == 1.0);
  }

  SUBCASE("symmetry") {
    Rng rng(8);
    const NoiseConfig noise = resolve_noise_preset("noise2");
    const auto dets = random_frame(rng, 20, noise);
    for (std::size_t i = 0; i + 1 < dets.size(); i += 2) {
      CHECK(csba_score(dets[i], dets[i + 1]) ==
            doctest::Approx(csba_score(dets[i + 1], dets[i])).epsilon(1e-12));
    }
  }
}

TEST_CASE("csba_associate") {
  const NoiseConfig noise3 = resolve_noise_preset("noise3");

  SUBCASE("zero-noise duplicates pair perfectly") {
    Rng rng(5);
    const auto dets = random_frame(rng, 8, NoiseConfig{});
    const auto result = csba_associate(dets, dets);
    CHECK(result.pairs.size() == 8);
    CHECK(result.unmatched_a.empty());
    CHECK(result.unmatched_b.empty());
    for (const auto& pair : result.pairs) CHECK(dets[pair.a].gt_id == dets[pair.b].gt_id);
  }

  SUBCASE("one empty list leaves the other unmatched") {
    Rng rng(6);
    const auto dets = random_frame(rng, 4, NoiseConfig{});
    const auto result = csba_associate(dets, {});
    CHECK(result.pairs.empty());
    CHECK(result.unmatched_a.size() == 4);
    const auto other = csba_associate({}, dets);
    CHECK(other.unmatched_b.size() == 4);
  }

  SUBCASE("matches the exhaustive permutation optimum (6 objects, noise3)") {
    Rng rng(42);
    const CsbaParams params;
    std::vector<Detection> gt;
    const auto a = random_frame(rng, 6, noise3, &gt);
    Rng rng2(43);
    const auto b = random_frame(rng2, 6, noise3);
    const auto result = csba_associate(a, b, params);
    check_partition(result, a.size(), b.size());

    std::vector<std::pair<int, int>> oracle_pairs;
    const double oracle = brute_force_best(a, b, params, &oracle_pairs);
    CHECK(gated_total(result, a, b, params) == doctest::Approx(oracle).epsilon(1e-9));
  }

  SUBCASE("gate monotonicity: raising the gate never creates pairs") {
    Rng rng(50);
    const auto a = random_frame(rng, 7, noise3);
    Rng rng2(51);
    const auto b = random_frame(rng2, 7, noise3);
    CsbaParams lo, hi;
    lo.gate = 0.2;
    hi.gate = 0.6;
    const auto r_lo = csba_associate(a, b, lo);
    const auto r_hi = csba_associate(a, b, hi);
    CHECK(r_hi.pairs.size() <= r_lo.pairs.size());
  }
}

TEST_CASE("iou_associate") {
  SUBCASE("identical lists fully match at threshold 0.5") {
    std::vector<Detection> dets = {make_det(0, 0, 2, 4, 0.1), make_det(8, 3, 1, 1, -0.4)};
    const auto result = iou_associate(dets, dets, 0.5);
    CHECK(result.pairs.size() == 2);
    CHECK(result.unmatched_a.empty());
  }

  SUBCASE("disjoint boxes never match") {
    std::vector<Detection> a = {make_det(0, 0, 1, 1, 0)};
    std::vector<Detection> b = {make_det(10, 0, 1, 1, 0)};
    const auto result = iou_associate(a, b, 0.3);
    CHECK(result.pairs.empty());
    CHECK(result.unmatched_a.size() == 1);
    CHECK(result.unmatched_b.size() == 1);
  }

  SUBCASE("IoU 1/3 sits between the table thresholds") {
    std::vector<Detection> a = {make_det(0, 0, 1, 1, 0)};
    std::vector<Detection> b = {make_det(0.5, 0, 1, 1, 0)};  // IoU = 1/3
    CHECK(iou_associate(a, b, 0.5).pairs.empty());
    CHECK(iou_associate(a, b, 0.3).pairs.size() == 1);
  }
}

TEST_CASE("dist_associate") {
  SUBCASE("threshold boundary") {
    const std::vector<Detection> a = {make_det(0, 0, 1, 1, 0)};
    const std::vector<Detection> near = {make_det(2.9, 0, 1, 1, 0)};
    const std::vector<Detection> far = {make_det(3.1, 0, 1, 1, 0)};
    const std::vector<Detection> coincident = {make_det(0, 0, 2, 2, 1)};
    CHECK(dist_associate(a, near, 3.0).pairs.size() == 1);
    CHECK(dist_associate(a, far, 3.0).pairs.empty());
    const auto same = dist_associate(a, coincident, 3.0);
    REQUIRE(same.pairs.size() == 1);
    CHECK(same.pairs[0].score == doctest::Approx(0.0));  // score = -distance
  }

  SUBCASE("prefers the globally optimal pairing") {
    // greedy nearest would pair a0-b0 (1.0) and leave a1 with b1 at 2.6;
    // the optimal assignment pairs a0-b1 and a1-b0
    std::vector<Detection> a = {make_det(0, 0, 1, 1, 0), make_det(1.4, 0, 1, 1, 0)};
    std::vector<Detection> b = {make_det(1.0, 0, 1, 1, 0), make_det(-0.2, 0, 1, 1, 0)};
    const auto result = dist_associate(a, b, 3.0);
    REQUIRE(result.pairs.size() == 2);
    double total = 0;
    for (const auto& pair : result.pairs) {
      total += center_distance(a[pair.a].box, b[pair.b].box);
    }
    CHECK(total == doctest::Approx(0.2 + 0.4));
  }
}

TEST_CASE("associators return exact partitions on random input") {
  Rng rng(60);
  const NoiseConfig noise = resolve_noise_preset("noise3");
  for (int trial = 0; trial < 20; ++trial) {
    const int na = 1 + static_cast<int>(rng.next_u64() % 9);
    const int nb = 1 + static_cast<int>(rng.next_u64() % 9);
    const auto a = random_frame(rng, na, noise);
    const auto b = random_frame(rng, nb, noise);
    check_partition(csba_associate(a, b), a.size(), b.size());
    check_partition(iou_associate(a, b, 0.3), a.size(), b.size());
    check_partition(dist_associate(a, b, 3.0), a.size(), b.size());
  }
}

TEST_CASE("solve_assignment handles rectangular costs") {
  // 2x3: optimal picks 1+2
  const std::vector<std::vector<double>> cost = {{9, 1, 4}, {2, 8, 6}};
  const auto assignment = solve_assignment(cost);
  REQUIRE(assignment.size() == 2);
  CHECK(assignment[0] == 1);
  CHECK(assignment[1] == 0);

  // 3x2: one row stays unassigned
  const std::vector<std::vector<double>> tall = {{1, 9}, {9, 1}, {5, 5}};
  const auto partial = solve_assignment(tall);
  REQUIRE(partial.size() == 3);
  CHECK(partial[0] == 0);
  CHECK(partial[1] == 1);
  CHECK(partial[2] == -1);
}
