#include "bevfuse/assoc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace bevfuse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest-augmenting-path assignment for an n x m cost matrix with n <= m.
// row_to_col[i] is the column assigned to row i. O(n^2 m).
std::vector<int> assign_rows(const std::vector<std::vector<double>>& cost, int n, int m) {
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0);  // p[j]: row matched to column j (1-based; 0 = free)
  std::vector<int> way(m + 1, 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = -1;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

template <typename ScoreFn>
AssociationResult optimal_associate(std::span<const Detection> a, std::span<const Detection> b,
                                    ScoreFn&& pair_cost, double max_cost) {
  AssociationResult result;
  const int na = static_cast<int>(a.size());
  const int nb = static_cast<int>(b.size());
  std::vector<char> used_a(na, 0), used_b(nb, 0);

  if (na > 0 && nb > 0) {
    const bool transposed = na > nb;
    const int n = transposed ? nb : na;
    const int m = transposed ? na : nb;
    std::vector<std::vector<double>> cost(n, std::vector<double>(m));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        cost[i][j] = transposed ? pair_cost(a[j], b[i]) : pair_cost(a[i], b[j]);
      }
    }
    const std::vector<int> row_to_col = assign_rows(cost, n, m);
    for (int i = 0; i < n; ++i) {
      const int j = row_to_col[i];
      if (j < 0) continue;
      const int ia = transposed ? j : i;
      const int ib = transposed ? i : j;
      const double c = cost[i][j];
      if (c > max_cost) continue;  // gate: dissolve into unmatched
      result.pairs.push_back({ia, ib, c});
      used_a[ia] = 1;
      used_b[ib] = 1;
    }
  }

  for (int i = 0; i < na; ++i) {
    if (!used_a[i]) result.unmatched_a.push_back(i);
  }
  for (int j = 0; j < nb; ++j) {
    if (!used_b[j]) result.unmatched_b.push_back(j);
  }
  return result;
}

}  // namespace

std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
  if (cost.empty()) return {};
  const int n = static_cast<int>(cost.size());
  const int m = static_cast<int>(cost[0].size());
  if (n <= m) return assign_rows(cost, n, m);

  // transpose so rows <= cols, then invert the mapping
  std::vector<std::vector<double>> t(m, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) t[j][i] = cost[i][j];
  }
  const std::vector<int> col_to_row = assign_rows(t, m, n);
  std::vector<int> row_to_col(n, -1);
  for (int j = 0; j < m; ++j) {
    if (col_to_row[j] >= 0) row_to_col[col_to_row[j]] = j;
  }
  return row_to_col;
}

double csba_score(const Detection& a, const Detection& b, const CsbaParams& params) {
  const double var_x = a.sigma.x * a.sigma.x + b.sigma.x * b.sigma.x;
  const double var_y = a.sigma.y * a.sigma.y + b.sigma.y * b.sigma.y;
  const double dx = a.box.x - b.box.x;
  const double dy = a.box.y - b.box.y;

  double s_center;
  if (var_x == 0.0 || var_y == 0.0) {
    // no positional uncertainty: exact agreement or nothing
    s_center = (dx == 0.0 && dy == 0.0) ? 1.0 : 0.0;
  } else {
    const double m2 = dx * dx / var_x + dy * dy / var_y;
    s_center = std::exp(-0.5 * m2);
  }

  const double dim_gap = std::hypot(a.box.w - b.box.w, a.box.d - b.box.d);
  const double s_dim = std::exp(-dim_gap / params.scale_dim);
  const double s_orient =
      std::exp(-angular_distance(a.box.theta, b.box.theta) / params.scale_theta);

  return params.w_center * s_center + params.w_dim * s_dim + params.w_theta * s_orient;
}

AssociationResult csba_associate(std::span<const Detection> a, std::span<const Detection> b,
                                 const CsbaParams& params) {
  auto result = optimal_associate(
      a, b, [&](const Detection& x, const Detection& y) { return 1.0 - csba_score(x, y, params); },
      1.0 - params.gate);
  for (auto& pair : result.pairs) pair.score = 1.0 - pair.score;
  return result;
}

AssociationResult iou_associate(std::span<const Detection> a, std::span<const Detection> b,
                                double iou_threshold,
                                double (*overlap)(const BEVBox&, const BEVBox&)) {
  AssociationResult result;
  const int na = static_cast<int>(a.size());
  const int nb = static_cast<int>(b.size());

  struct Candidate {
    double iou;
    int ia, ib;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(static_cast<std::size_t>(na) * nb);
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nb; ++j) {
      const double v = overlap(a[i].box, b[j].box);
      if (v >= iou_threshold) candidates.push_back({v, i, j});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& l, const Candidate& r) { return l.iou > r.iou; });

  std::vector<char> used_a(na, 0), used_b(nb, 0);
  for (const auto& c : candidates) {
    if (used_a[c.ia] || used_b[c.ib]) continue;
    used_a[c.ia] = 1;
    used_b[c.ib] = 1;
    result.pairs.push_back({c.ia, c.ib, c.iou});
  }
  for (int i = 0; i < na; ++i) {
    if (!used_a[i]) result.unmatched_a.push_back(i);
  }
  for (int j = 0; j < nb; ++j) {
    if (!used_b[j]) result.unmatched_b.push_back(j);
  }
  return result;
}

AssociationResult dist_associate(std::span<const Detection> a, std::span<const Detection> b,
                                 double dist_threshold_m) {
  auto result = optimal_associate(
      a, b, [](const Detection& x, const Detection& y) { return center_distance(x.box, y.box); },
      dist_threshold_m);
  for (auto& pair : result.pairs) pair.score = -pair.score;
  return result;
}

}  // namespace bevfuse
