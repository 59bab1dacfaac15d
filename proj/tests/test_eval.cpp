#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bevfuse/eval.hpp"
#include "bevfuse/rng.hpp"

using namespace bevfuse;

namespace {

GtObject gt(std::int64_t id, double x, double y, double w = 2, double d = 4, double theta = 0) {
  return {id, ObjectClass::Car, make_box(x, y, w, d, theta), 0, 0};
}

FusedPred pred(std::int64_t id, double x, double y, double w = 2, double d = 4,
               double theta = 0) {
  return {make_box(x, y, w, d, theta), id, ObjectClass::Car, false};
}

// direct transliteration of the FP-aware error formulas, with its own
// closest-per-identity matching; kept independent of the library path
struct BruteForceMetrics {
  double ate{0}, aoe{0}, ade{0};
  int tp{0}, fp{0}, fn{0};
};

BruteForceMetrics brute_force(const std::vector<FusedPred>& preds, const SceneFrame& frame) {
  BruteForceMetrics out;
  double sum_t = 0, sum_o = 0, sum_d = 0;
  int n = 0;

  std::vector<char> pred_is_tp(preds.size(), 0);
  for (const auto& g : frame.objects) {
    int best = -1;
    double best_dist = 1e300;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (preds[i].gt_id != g.gt_id) continue;
      const double dist = std::hypot(preds[i].box.x - g.box.x, preds[i].box.y - g.box.y);
      if (dist < best_dist) {
        best_dist = dist;
        best = static_cast<int>(i);
      }
    }
    if (best < 0) {
      ++out.fn;
    } else {
      pred_is_tp[static_cast<std::size_t>(best)] = 1;
      ++out.tp;
    }
  }

  for (std::size_t i = 0; i < preds.size(); ++i) {
    const GtObject* ref = nullptr;
    for (const auto& g : frame.objects) {
      if (g.gt_id == preds[i].gt_id) ref = &g;
    }
    if (ref == nullptr) continue;  // fixture never produces unknown ids
    if (!pred_is_tp[i]) ++out.fp;
    const double dt = std::hypot(preds[i].box.x - ref->box.x, preds[i].box.y - ref->box.y);
    double dth = std::fabs(preds[i].box.theta - ref->box.theta);
    dth = std::min(dth, 2.0 * M_PI - dth);
    const double dd = std::hypot(preds[i].box.w - ref->box.w, preds[i].box.d - ref->box.d);
    sum_t += dt;
    sum_o += dth;
    sum_d += dd;
    ++n;
  }
  if (n > 0) {
    out.ate = sum_t / n;
    out.aoe = sum_o / n;
    out.ade = sum_d / n;
  }
  return out;
}

}  // namespace

TEST_CASE("match_by_id") {
  SceneFrame frame{0, {gt(1, 0, 0), gt(2, 10, 0)}};

  SUBCASE("aligned ids are all TP") {
    std::vector<FusedPred> preds = {pred(1, 0.1, 0), pred(2, 10.1, 0)};
    const auto outcome = match_by_id(preds, frame);
    CHECK(outcome.tp.size() == 2);
    CHECK(outcome.fp.empty());
    CHECK(outcome.fn.empty());
  }

  SUBCASE("only the closest claimant is a TP") {
    std::vector<FusedPred> preds = {pred(1, 1.0, 0), pred(1, 0.2, 0)};
    const auto outcome = match_by_id(preds, frame);
    REQUIRE(outcome.tp.size() == 1);
    CHECK(outcome.tp[0].pred.box.x == doctest::Approx(0.2));
    REQUIRE(outcome.fp.size() == 1);
    CHECK(outcome.fp[0].pred.box.x == doctest::Approx(1.0));
    CHECK(outcome.fn.size() == 1);  // gt 2 has no prediction
  }

  SUBCASE("unseen ground truth becomes FN") {
    const auto outcome = match_by_id({}, frame);
    CHECK(outcome.fn.size() == 2);
    CHECK(outcome.tp.empty());
  }

  SUBCASE("unknown lineage counts as FP with a diagnostic") {
    std::vector<FusedPred> preds = {pred(99, 0.3, 0)};
    const auto outcome = match_by_id(preds, frame);
    CHECK(outcome.fp.size() == 1);
    CHECK(outcome.unknown_id_fps == 1);
  }

  SUBCASE("invariant to prediction order") {
    std::vector<FusedPred> preds = {pred(1, 1.0, 0), pred(1, 0.2, 0), pred(2, 10.4, 0)};
    auto shuffled = preds;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto a = match_by_id(preds, frame);
    const auto b = match_by_id(shuffled, frame);
    CHECK(a.tp.size() == b.tp.size());
    CHECK(ate_frame(a) == doctest::Approx(ate_frame(b)).epsilon(1e-15));
  }
}

TEST_CASE("frame metrics fixtures") {
  SceneFrame frame{0, {gt(1, 0, 0)}};

  SUBCASE("exact predictions score zero error") {
    std::vector<FusedPred> preds = {pred(1, 0, 0)};
    const auto outcome = match_by_id(preds, frame);
    CHECK(ate_frame(outcome) == 0.0);
    CHECK(aoe_frame(outcome) == 0.0);
    CHECK(ade_frame(outcome) == 0.0);
    const auto [precision, recall] = precision_recall(outcome);
    CHECK(precision == 1.0);
    CHECK(recall == 1.0);
  }

  SUBCASE("single TP at (3,4) offset gives ATE 5") {
    std::vector<FusedPred> preds = {pred(1, 3, 4)};
    CHECK(ate_frame(match_by_id(preds, frame)) == doctest::Approx(5.0));
  }

  SUBCASE("TP error 1 plus FP error 3 averages to 2 (N = TP+FP)") {
    std::vector<FusedPred> preds = {pred(1, 1, 0), pred(1, 3, 0)};
    const auto outcome = match_by_id(preds, frame);
    CHECK(ate_frame(outcome) == doctest::Approx(2.0));

    const auto sota = sota_metrics(outcome);
    REQUIRE(sota.ate.has_value());
    CHECK(*sota.ate == doctest::Approx(1.0));  // TP-only drops the FP term
  }

  SUBCASE("yaw error wraps: 350 degrees measures as 10") {
    const double deg = M_PI / 180.0;
    std::vector<FusedPred> preds = {pred(1, 0, 0, 2, 4, 350.0 * deg)};
    CHECK(aoe_frame(match_by_id(preds, frame)) == doctest::Approx(10.0 * deg));
  }

  SUBCASE("dimension error is the (dw, dd) norm") {
    std::vector<FusedPred> preds = {pred(1, 0, 0, 5, 8, 0)};  // dw=3, dd=4
    CHECK(ade_frame(match_by_id(preds, frame)) == doctest::Approx(5.0));
  }

  SUBCASE("empty frame conventions") {
    SceneFrame empty{0, {}};
    const auto outcome = match_by_id({}, empty);
    CHECK(ate_frame(outcome) == 0.0);
    const auto [precision, recall] = precision_recall(outcome);
    CHECK(precision == 1.0);
    CHECK(recall == 1.0);
    CHECK(!sota_metrics(outcome).ate.has_value());
  }
}

TEST_CASE("precision signatures") {
  SceneFrame frame{0, {gt(1, 0, 0), gt(2, 10, 0)}};

  SUBCASE("TP = FP gives the 50% no-fusion signature") {
    std::vector<FusedPred> preds = {pred(1, 0.1, 0), pred(1, 0.5, 0), pred(2, 10.1, 0),
                                    pred(2, 10.5, 0)};
    const auto [precision, recall] = precision_recall(match_by_id(preds, frame));
    CHECK(precision == doctest::Approx(0.5));
    CHECK(recall == doctest::Approx(1.0));
  }

  SUBCASE("recall with one miss") {
    SceneFrame ten{0, {}};
    for (int i = 0; i < 10; ++i) ten.objects.push_back(gt(i, 3.0 * i, 0));
    std::vector<FusedPred> preds;
    for (int i = 0; i < 9; ++i) preds.push_back(pred(i, 3.0 * i, 0));
    const auto [precision, recall] = precision_recall(match_by_id(preds, ten));
    CHECK(recall == doctest::Approx(0.9));
    CHECK(precision == doctest::Approx(1.0));
  }
}

TEST_CASE("aggregate across trials") {
  SUBCASE("sample std of {1,2,3} is 1") {
    std::vector<TrialMetrics> trials(3);
    trials[0].m_ate = 1.0;
    trials[1].m_ate = 2.0;
    trials[2].m_ate = 3.0;
    const RunSummary summary = aggregate(trials);
    CHECK(summary.m_ate.mean == doctest::Approx(2.0));
    CHECK(summary.m_ate.stddev == doctest::Approx(1.0));
  }

  SUBCASE("single trial has zero std") {
    std::vector<TrialMetrics> trials(1);
    trials[0].m_ate = 1.7;
    const RunSummary summary = aggregate(trials);
    CHECK(summary.m_ate.stddev == 0.0);
  }

  SUBCASE("identical trials have zero std") {
    std::vector<TrialMetrics> trials(5);
    for (auto& t : trials) t.m_aoe = 0.25;
    CHECK(aggregate(trials).m_aoe.stddev == doctest::Approx(0.0));
  }
}

TEST_CASE("metrics equal the brute-force transliteration on random frames") {
  Rng rng(314);
  for (int iteration = 0; iteration < 1000; ++iteration) {
    SceneFrame frame{0, {}};
    const int n_gt = 1 + static_cast<int>(rng.next_u64() % 8);
    for (int i = 0; i < n_gt; ++i) {
      frame.objects.push_back(gt(i, rng.uniform(-30, 30), rng.uniform(-30, 30),
                                 rng.uniform(0.5, 4), rng.uniform(0.5, 8),
                                 rng.uniform(-M_PI, M_PI)));
    }
    std::vector<FusedPred> preds;
    const int n_pred = static_cast<int>(rng.next_u64() % 12);
    for (int i = 0; i < n_pred; ++i) {
      const int id = static_cast<int>(rng.next_u64() % n_gt);
      preds.push_back(pred(id, rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(0.5, 4),
                           rng.uniform(0.5, 8), rng.uniform(-M_PI, M_PI)));
    }

    const auto outcome = match_by_id(preds, frame);
    const BruteForceMetrics ref = brute_force(preds, frame);

    CHECK(static_cast<int>(outcome.tp.size()) == ref.tp);
    CHECK(static_cast<int>(outcome.fp.size()) == ref.fp);
    CHECK(static_cast<int>(outcome.fn.size()) == ref.fn);
    CHECK(std::fabs(ate_frame(outcome) - ref.ate) <= 1e-12);
    CHECK(std::fabs(aoe_frame(outcome) - ref.aoe) <= 1e-12);
    CHECK(std::fabs(ade_frame(outcome) - ref.ade) <= 1e-12);
  }
}

TEST_CASE("sota vs FP-aware divergence mechanism") {
  // every FP error above the TP mean pushes the FP-aware metric up
  SceneFrame frame{0, {gt(1, 0, 0), gt(2, 20, 0)}};
  std::vector<FusedPred> preds = {pred(1, 0.5, 0), pred(1, 3.0, 0), pred(2, 20.5, 0),
                                  pred(2, 24.0, 0)};
  const auto outcome = match_by_id(preds, frame);
  const auto sota = sota_metrics(outcome);
  REQUIRE(sota.ate.has_value());
  CHECK(*sota.ate < ate_frame(outcome));

  // with no FPs the two coincide exactly
  std::vector<FusedPred> clean = {pred(1, 0.5, 0), pred(2, 20.5, 0)};
  const auto clean_outcome = match_by_id(clean, frame);
  const auto clean_sota = sota_metrics(clean_outcome);
  REQUIRE(clean_sota.ate.has_value());
  CHECK(*clean_sota.ate == ate_frame(clean_outcome));
}
