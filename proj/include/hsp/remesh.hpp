#pragma once

#include "hsp/geometry.hpp"

namespace hsp {

// Produces a watertight mesh near a requested vertex count. Implementations
// may wrap an external remanifolding tool.
class Remesher {
public:
  virtual ~Remesher() = default;
  virtual TriangleMesh remesh(const TriangleMesh& mesh, int target_vertices) const = 0;
};

// One round of midpoint subdivision: every face splits into four, V' = V + E.
TriangleMesh subdivide_midpoint(const TriangleMesh& mesh);

// Quadric-error edge collapse down to `target_vertices` (or until no valid
// collapse remains). Collapses that would break the link condition or fold a
// face are skipped. `length_weight` adds a squared-edge-length term so flat
// regions collapse their shortest edges first.
TriangleMesh decimate_qem(const TriangleMesh& mesh, int target_vertices, double length_weight = 1e-3);

// Subdivides while below 90% of the target, decimates when above 110%.
class SubdivisionDecimationRemesher final : public Remesher {
public:
  explicit SubdivisionDecimationRemesher(double tolerance = 0.1) : tolerance_(tolerance) {}
  TriangleMesh remesh(const TriangleMesh& mesh, int target_vertices) const override;

private:
  double tolerance_;
};

// Uses the built-in remesher. Throws TopologyError for non-watertight input.
TriangleMesh remesh_to_resolution(const TriangleMesh& mesh, int target_vertices);

}  // namespace hsp
