#pragma once

#include "hsp/geometry.hpp"

#include <span>

namespace hsp {

// Outward-oriented, watertight convex hull of the points (quickhull).
// Only points that are hull vertices are kept. `relative_tolerance` is scaled
// by the longest bounding-box side; points within it of a face count as inside.
// Throws DegeneracyError for coincident, collinear or coplanar input.
TriangleMesh convex_hull(std::span<const Vec3> points, double relative_tolerance = 1e-10);

inline TriangleMesh convex_hull(const PointCloud& cloud) { return convex_hull(cloud.positions); }

}  // namespace hsp
