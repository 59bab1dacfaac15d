#pragma once

#include <cstdint>
#include <vector>

namespace bevfuse {

using Micros = std::int64_t;

constexpr double kEpsilonArea = 1e-9;  // m^2; intersections below this count as empty

struct Point2 {
  double x{0.0};
  double y{0.0};
};

/// Planar box in the global frame: center (x, y), width w along the box's
/// local x axis, depth d along local y, yaw theta about the vertical axis.
struct BEVBox {
  double x{0.0};
  double y{0.0};
  double w{1.0};
  double d{1.0};
  double theta{0.0};  // radians, wrapped to (-pi, pi]
};

/// Convex polygon with counter-clockwise vertex order (signed area > 0).
/// An empty vertex list denotes the empty polygon.
struct ConvexPolygon {
  std::vector<Point2> vertices;

  bool empty() const { return vertices.empty(); }
};

// Wraps an angle into (-pi, pi]. Throws std::invalid_argument on non-finite input.
double wrap_angle(double theta);

// Smallest absolute angular difference, in [0, pi].
double angular_distance(double a, double b);

// Validating constructor: requires w > 0, d > 0, finite fields; wraps theta.
BEVBox make_box(double x, double y, double w, double d, double theta);

// Corner polygon of a box, counter-clockwise.
ConvexPolygon box_corners(const BEVBox& b);

double polygon_area(const ConvexPolygon& p);

// Exact convex intersection (Sutherland-Hodgman). Results with area below
// kEpsilonArea are reported as empty.
ConvexPolygon polygon_intersection(const ConvexPolygon& a, const ConvexPolygon& b);

// Convex hull of a point set (monotone chain), counter-clockwise.
ConvexPolygon convex_hull(std::vector<Point2> pts);

double iou_bev(const BEVBox& a, const BEVBox& b);

// IoU of the axis-aligned bounding boxes of the (rotated) rectangles; the
// cheaper convention some suppression baselines use.
double iou_bev_axis_aligned(const BEVBox& a, const BEVBox& b);

// Generalized IoU with the convex hull of both corner sets as the enclosing
// region, so the value is invariant under global rotation.
double giou_bev(const BEVBox& a, const BEVBox& b);

double center_distance(const BEVBox& a, const BEVBox& b);

}  // namespace bevfuse
