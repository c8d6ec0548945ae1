#pragma once

#include "hsp/geometry.hpp"

#include <array>
#include <vector>

namespace hsp {

inline constexpr int kInvalid = -1;

// Edge graph of a manifold triangle mesh.
//
// For edge e with incident faces (f0, f1), neighbors[e] = {a, b, c, d} where
// (a, b) are the other two edges of f0 and (c, d) those of f1, each pair in
// the face's counter-clockwise order starting after e. Missing entries on
// boundary edges are kInvalid.
struct EdgeTopology {
  std::vector<std::array<int, 2>> edges;       // sorted vertex pair (lo, hi)
  std::vector<std::array<int, 2>> edge_faces;  // kInvalid on the boundary side
  std::vector<std::array<int, 4>> neighbors;
  std::vector<std::array<int, 3>> face_edges;  // edge ids of each face, ccw from corner 0
  std::vector<std::vector<int>> one_ring;      // sorted adjacent vertices
  std::vector<Face> faces;                     // copy of the mesh faces
  int num_vertices = 0;

  int num_edges() const { return static_cast<int>(edges.size()); }
  bool is_boundary(int e) const { return edge_faces[e][1] == kInvalid; }
};

// Throws TopologyError for edges with more than two incident faces.
EdgeTopology build_edge_topology(const TriangleMesh& mesh);

}  // namespace hsp
