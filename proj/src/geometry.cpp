#include "bevfuse/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace bevfuse {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace

double wrap_angle(double theta) {
  if (!std::isfinite(theta)) {
    throw std::invalid_argument("wrap_angle: non-finite angle");
  }
  double t = std::fmod(theta + M_PI, kTwoPi);
  if (t <= 0.0) t += kTwoPi;
  return t - M_PI;
}

double angular_distance(double a, double b) {
  return std::fabs(wrap_angle(a - b));
}

BEVBox make_box(double x, double y, double w, double d, double theta) {
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(w) || !std::isfinite(d)) {
    throw std::invalid_argument("make_box: non-finite field");
  }
  if (w <= 0.0 || d <= 0.0) {
    throw std::invalid_argument("make_box: w and d must be positive");
  }
  return BEVBox{x, y, w, d, wrap_angle(theta)};
}

ConvexPolygon box_corners(const BEVBox& b) {
  const double hw = 0.5 * b.w;
  const double hd = 0.5 * b.d;
  const double c = std::cos(b.theta);
  const double s = std::sin(b.theta);
  // local corners in CCW order
  const double lx[4] = {-hw, hw, hw, -hw};
  const double ly[4] = {-hd, -hd, hd, hd};
  ConvexPolygon poly;
  poly.vertices.reserve(4);
  for (int i = 0; i < 4; ++i) {
    poly.vertices.push_back({b.x + c * lx[i] - s * ly[i], b.y + s * lx[i] + c * ly[i]});
  }
  return poly;
}

double polygon_area(const ConvexPolygon& p) {
  const auto& v = p.vertices;
  if (v.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % v.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

ConvexPolygon polygon_intersection(const ConvexPolygon& a, const ConvexPolygon& b) {
  if (a.vertices.size() < 3 || b.vertices.size() < 3) return {};

  // Sutherland-Hodgman: clip a against each directed edge of b (CCW, so the
  // interior is the left half-plane of every edge).
  std::vector<Point2> out = a.vertices;
  const auto& clip = b.vertices;
  for (std::size_t e = 0; e < clip.size() && !out.empty(); ++e) {
    const Point2& p1 = clip[e];
    const Point2& p2 = clip[(e + 1) % clip.size()];
    std::vector<Point2> in;
    in.swap(out);
    out.reserve(in.size() + 4);
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Point2& cur = in[i];
      const Point2& nxt = in[(i + 1) % in.size()];
      const double side_cur = cross(p1, p2, cur);
      const double side_nxt = cross(p1, p2, nxt);
      if (side_cur >= 0.0) out.push_back(cur);
      if ((side_cur > 0.0 && side_nxt < 0.0) || (side_cur < 0.0 && side_nxt > 0.0)) {
        const double t = side_cur / (side_cur - side_nxt);
        out.push_back({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
      }
    }
  }

  ConvexPolygon result{std::move(out)};
  if (result.vertices.size() < 3 || polygon_area(result) <= kEpsilonArea) return {};
  return result;
}

ConvexPolygon convex_hull(std::vector<Point2> pts) {
  if (pts.size() < 3) return {};
  std::sort(pts.begin(), pts.end(), [](const Point2& p, const Point2& q) {
    return p.x < q.x || (p.x == q.x && p.y < q.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Point2& p, const Point2& q) { return p.x == q.x && p.y == q.y; }),
            pts.end());
  const std::size_t n = pts.size();
  if (n < 3) return {};

  std::vector<Point2> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {  // lower
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {  // upper
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  if (hull.size() < 3) return {};
  return ConvexPolygon{std::move(hull)};
}

double iou_bev(const BEVBox& a, const BEVBox& b) {
  const double area_a = a.w * a.d;
  const double area_b = b.w * b.d;
  const double inter = polygon_area(polygon_intersection(box_corners(a), box_corners(b)));
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

double iou_bev_axis_aligned(const BEVBox& a, const BEVBox& b) {
  const auto bounds = [](const BEVBox& box) {
    const double hx = 0.5 * (box.w * std::fabs(std::cos(box.theta)) +
                             box.d * std::fabs(std::sin(box.theta)));
    const double hy = 0.5 * (box.w * std::fabs(std::sin(box.theta)) +
                             box.d * std::fabs(std::cos(box.theta)));
    return std::array<double, 4>{box.x - hx, box.x + hx, box.y - hy, box.y + hy};
  };
  const auto ba = bounds(a);
  const auto bb = bounds(b);
  const double ix = std::max(0.0, std::min(ba[1], bb[1]) - std::max(ba[0], bb[0]));
  const double iy = std::max(0.0, std::min(ba[3], bb[3]) - std::max(ba[2], bb[2]));
  const double inter = ix * iy;
  const double uni = (ba[1] - ba[0]) * (ba[3] - ba[2]) + (bb[1] - bb[0]) * (bb[3] - bb[2]) - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

double giou_bev(const BEVBox& a, const BEVBox& b) {
  const double area_a = a.w * a.d;
  const double area_b = b.w * b.d;
  const double inter = polygon_area(polygon_intersection(box_corners(a), box_corners(b)));
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  const double iou = inter / uni;

  std::vector<Point2> pts = box_corners(a).vertices;
  const auto cb = box_corners(b).vertices;
  pts.insert(pts.end(), cb.begin(), cb.end());
  const double hull_area = polygon_area(convex_hull(std::move(pts)));
  if (hull_area <= 0.0) return iou;
  return iou - (hull_area - uni) / hull_area;
}

double center_distance(const BEVBox& a, const BEVBox& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace bevfuse
