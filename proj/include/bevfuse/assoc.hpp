#pragma once

#include <span>
#include <vector>

#include "bevfuse/noise.hpp"

namespace bevfuse {

/// One-to-one cross-source matching outcome; pairs plus unmatched residues
/// form an exact partition of both input lists.
struct AssociationResult {
  struct Pair {
    int a{-1};
    int b{-1};
    double score{0.0};  // method-specific: CSBA score, IoU, or -distance
  };
  std::vector<Pair> pairs;
  std::vector<int> unmatched_a;
  std::vector<int> unmatched_b;
};

struct CsbaParams {
  double w_center{0.5};
  double w_dim{0.3};
  double w_theta{0.2};
  double scale_dim{1.0};    // m
  double scale_theta{0.5};  // rad
  double gate{0.3};         // combined-score threshold
};

/// Combined score in [0, 1]: weighted sum of a Mahalanobis center-alignment
/// term (under summed positional covariances), a dimension-similarity term,
/// and an orientation-consistency term.
double csba_score(const Detection& a, const Detection& b, const CsbaParams& params = {});

/// Optimal one-to-one assignment maximizing total CSBA score (Hungarian on
/// 1 - score); pairs scoring below the gate are dissolved into unmatched.
AssociationResult csba_associate(std::span<const Detection> a, std::span<const Detection> b,
                                 const CsbaParams& params = {});

/// Greedy descending-IoU matching; pairs under the threshold are rejected.
/// The overlap convention (rotated vs axis-aligned) is swappable.
AssociationResult iou_associate(std::span<const Detection> a, std::span<const Detection> b,
                                double iou_threshold,
                                double (*overlap)(const BEVBox&, const BEVBox&) = &iou_bev);

/// Hungarian assignment on center distance; pairs beyond the threshold are
/// dissolved.
AssociationResult dist_associate(std::span<const Detection> a, std::span<const Detection> b,
                                 double dist_threshold_m);

/// Minimum-cost rectangular assignment (Jonker-Volgenant shortest augmenting
/// path). Returns, for each row, the assigned column (every row of the smaller
/// side is assigned; -1 only when rows > cols).
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost);

}  // namespace bevfuse
