#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "babbling/plant.hpp"
#include "babbling/types.hpp"

namespace babbling {

/// Half-space tolerance for point-in-hull tests, metres. Boundary points count as inside.
inline constexpr double kHullEpsilon = 1e-9;

enum class GoalProvenance { Empirical, Convex, Cut };

std::string_view to_string(GoalProvenance p);
GoalProvenance provenance_from_string(std::string_view s);

struct GoalGrid {
  std::vector<TaskPoint> goals;
  double spacing = 0.0;
  GoalProvenance provenance = GoalProvenance::Convex;
};

struct HullFace {
  std::array<int, 3> vertices;  // counter-clockwise seen from outside
  Eigen::Vector3d normal;       // unit, outward
  double offset = 0.0;          // normal . p == offset on the face plane
};

struct ConvexHull {
  std::vector<TaskPoint> vertices;
  std::vector<HullFace> faces;

  /// Largest signed distance of `p` to any face plane (<= 0 inside).
  double signed_distance(const TaskPoint& p) const;
  bool contains(const TaskPoint& p, double eps = kHullEpsilon) const;
  double volume() const;
};

/// Noiseless end-effector positions of `count` uniformly random postures.
std::vector<TaskPoint> sample_empirical(const Plant& plant, int count, Rng& rng);

/// Incremental 3-D hull. Throws DegenerateInput for fewer than four
/// affinely independent points.
ConvexHull convex_hull(std::span<const TaskPoint> points);

/// Lattice points anchored at the hull's bounding-box minimum corner that lie
/// inside or on the hull.
GoalGrid grid_intersect(const ConvexHull& hull, double spacing);

/// Keeps the goals within `radius` of at least one prototype center.
GoalGrid remove_outliers(const GoalGrid& grid, std::span<const TaskPoint> centers, double radius);

}  // namespace babbling
