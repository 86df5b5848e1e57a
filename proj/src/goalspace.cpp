#include "babbling/goalspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <utility>

#include <Eigen/Geometry>

#include "babbling/errors.hpp"

namespace babbling {

std::string_view to_string(GoalProvenance p) {
  switch (p) {
    case GoalProvenance::Empirical: return "empirical";
    case GoalProvenance::Convex: return "convex";
    case GoalProvenance::Cut: return "cut";
  }
  return "unknown";
}

GoalProvenance provenance_from_string(std::string_view s) {
  if (s == "empirical") return GoalProvenance::Empirical;
  if (s == "convex") return GoalProvenance::Convex;
  if (s == "cut") return GoalProvenance::Cut;
  throw std::invalid_argument("unknown goal provenance");
}

double ConvexHull::signed_distance(const TaskPoint& p) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& f : faces) worst = std::max(worst, f.normal.dot(p) - f.offset);
  return worst;
}

bool ConvexHull::contains(const TaskPoint& p, double eps) const {
  for (const auto& f : faces)
    if (f.normal.dot(p) - f.offset > eps) return false;
  return true;
}

double ConvexHull::volume() const {
  // Sum of signed tetrahedra against the first vertex.
  if (vertices.empty()) return 0.0;
  const TaskPoint& o = vertices.front();
  double v = 0.0;
  for (const auto& f : faces) {
    const TaskPoint a = vertices[f.vertices[0]] - o;
    const TaskPoint b = vertices[f.vertices[1]] - o;
    const TaskPoint c = vertices[f.vertices[2]] - o;
    v += a.dot(b.cross(c));
  }
  return v / 6.0;
}

std::vector<TaskPoint> sample_empirical(const Plant& plant, int count, Rng& rng) {
  if (count < 4) throw std::invalid_argument("sample_empirical: count must be >= 4");
  std::vector<TaskPoint> points;
  points.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) points.push_back(plant.kinematics(Plant::random_posture(rng)));
  return points;
}

namespace {

struct WorkFace {
  std::array<int, 3> v;
  Eigen::Vector3d normal;
  double offset;
  bool alive;
};

WorkFace make_face(std::span<const TaskPoint> pts, int a, int b, int c) {
  WorkFace f{{a, b, c}, Eigen::Vector3d::Zero(), 0.0, true};
  const Eigen::Vector3d n = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
  f.normal = n.normalized();
  f.offset = f.normal.dot(pts[a]);
  return f;
}

}  // namespace

ConvexHull convex_hull(std::span<const TaskPoint> points) {
  const int n = static_cast<int>(points.size());
  if (n < 4) throw DegenerateInput("convex_hull: need at least 4 points");

  Eigen::Vector3d lo = points[0], hi = points[0];
  for (const auto& p : points) {
    if (!p.allFinite()) throw DegenerateInput("convex_hull: non-finite point");
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double scale = std::max((hi - lo).norm(), 1e-300);
  const double eps = 1e-12 * std::max(1.0, scale);
  const double degenerate_tol = 1e-10 * scale;

  // Initial simplex from extreme points.
  int i0 = 0;
  for (int i = 1; i < n; ++i)
    if (points[i].x() < points[i0].x()) i0 = i;
  int i1 = -1;
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    const double d = (points[i] - points[i0]).squaredNorm();
    if (d > best) best = d, i1 = i;
  }
  if (std::sqrt(best) <= degenerate_tol) throw DegenerateInput("convex_hull: coincident points");
  const Eigen::Vector3d dir = (points[i1] - points[i0]).normalized();
  int i2 = -1;
  best = -1.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d r = points[i] - points[i0];
    const double d = (r - r.dot(dir) * dir).norm();
    if (d > best) best = d, i2 = i;
  }
  if (best <= degenerate_tol) throw DegenerateInput("convex_hull: collinear points");
  const Eigen::Vector3d plane_n = (points[i1] - points[i0]).cross(points[i2] - points[i0]).normalized();
  int i3 = -1;
  best = -1.0;
  for (int i = 0; i < n; ++i) {
    const double d = std::abs(plane_n.dot(points[i] - points[i0]));
    if (d > best) best = d, i3 = i;
  }
  if (best <= degenerate_tol) throw DegenerateInput("convex_hull: coplanar points");

  const Eigen::Vector3d interior = (points[i0] + points[i1] + points[i2] + points[i3]) / 4.0;
  std::vector<WorkFace> faces;
  auto add_oriented = [&](int a, int b, int c) {
    WorkFace f = make_face(points, a, b, c);
    if (f.normal.dot(interior) - f.offset > 0.0) f = make_face(points, a, c, b);
    faces.push_back(f);
  };
  add_oriented(i0, i1, i2);
  add_oriented(i0, i1, i3);
  add_oriented(i0, i2, i3);
  add_oriented(i1, i2, i3);

  std::vector<char> visible;
  std::set<std::pair<int, int>> visible_edges;
  for (int p = 0; p < n; ++p) {
    if (p == i0 || p == i1 || p == i2 || p == i3) continue;
    visible.assign(faces.size(), 0);
    bool any = false;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (faces[f].alive && faces[f].normal.dot(points[p]) - faces[f].offset > eps) {
        visible[f] = 1;
        any = true;
      }
    }
    if (!any) continue;

    visible_edges.clear();
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!visible[f]) continue;
      const auto& v = faces[f].v;
      for (int e = 0; e < 3; ++e) visible_edges.emplace(v[e], v[(e + 1) % 3]);
    }
    const std::size_t old_count = faces.size();
    for (std::size_t f = 0; f < old_count; ++f) {
      if (!visible[f]) continue;
      faces[f].alive = false;
      const auto v = faces[f].v;
      for (int e = 0; e < 3; ++e) {
        const int a = v[e], b = v[(e + 1) % 3];
        if (!visible_edges.contains({b, a})) faces.push_back(make_face(points, a, b, p));
      }
    }
    if (faces.size() > 4 * old_count) {
      std::erase_if(faces, [](const WorkFace& f) { return !f.alive; });
    }
  }

  ConvexHull hull;
  std::vector<int> remap(static_cast<std::size_t>(n), -1);
  // Vertex order follows input order of the points that survive.
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  for (const auto& f : faces)
    if (f.alive)
      for (int v : f.v) used[static_cast<std::size_t>(v)] = 1;
  for (int i = 0; i < n; ++i) {
    if (!used[static_cast<std::size_t>(i)]) continue;
    remap[static_cast<std::size_t>(i)] = static_cast<int>(hull.vertices.size());
    hull.vertices.push_back(points[i]);
  }
  for (const auto& f : faces) {
    if (!f.alive) continue;
    HullFace out;
    for (int k = 0; k < 3; ++k) out.vertices[k] = remap[static_cast<std::size_t>(f.v[k])];
    out.normal = f.normal;
    out.offset = f.offset;
    hull.faces.push_back(out);
  }
  return hull;
}

GoalGrid grid_intersect(const ConvexHull& hull, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("grid_intersect: spacing must be positive");
  GoalGrid grid;
  grid.spacing = spacing;
  grid.provenance = GoalProvenance::Convex;
  if (hull.vertices.empty()) return grid;

  Eigen::Vector3d lo = hull.vertices.front(), hi = hull.vertices.front();
  for (const auto& v : hull.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  Eigen::Vector3i steps;
  for (int a = 0; a < 3; ++a)
    steps[a] = static_cast<int>(std::floor((hi[a] - lo[a]) / spacing + 1e-9));

  for (int i = 0; i <= steps[0]; ++i)
    for (int j = 0; j <= steps[1]; ++j)
      for (int k = 0; k <= steps[2]; ++k) {
        const TaskPoint p = lo + spacing * Eigen::Vector3d(i, j, k);
        if (hull.contains(p)) grid.goals.push_back(p);
      }
  return grid;
}

GoalGrid remove_outliers(const GoalGrid& grid, std::span<const TaskPoint> centers, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("remove_outliers: radius must be positive");
  if (grid.provenance != GoalProvenance::Convex)
    throw std::invalid_argument("remove_outliers: expects the convex goal grid");
  GoalGrid cut;
  cut.spacing = grid.spacing;
  cut.provenance = GoalProvenance::Cut;
  const double r2 = radius * radius;
  for (const auto& g : grid.goals) {
    const bool covered = std::any_of(centers.begin(), centers.end(),
                                     [&](const TaskPoint& c) { return (g - c).squaredNorm() <= r2; });
    if (covered) cut.goals.push_back(g);
  }
  return cut;
}

}  // namespace babbling
