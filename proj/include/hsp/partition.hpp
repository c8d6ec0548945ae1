#pragma once

#include "hsp/geometry.hpp"

#include <vector>

namespace hsp {

struct MeshPart {
  TriangleMesh mesh;
  std::vector<int> vertex_map;  // local vertex -> parent vertex
  std::vector<int> face_map;    // local face -> parent face
  std::vector<char> core_face;  // 1 if the face belongs to the region before dilation
};

struct MeshPartition {
  std::vector<MeshPart> parts;
  std::vector<int> overlap_counts;  // per parent vertex: number of parts containing it
  int num_parent_vertices = 0;
};

// Splits a mesh into face regions of at most `max_faces` faces. Regions are
// grown breadth-first from farthest-point seeds and then dilated by
// `overlap_rings` vertex-adjacent face rings so neighbouring parts overlap.
MeshPartition partition_mesh(const TriangleMesh& mesh, int max_faces, int overlap_rings = 2);

// Averages the per-part copies of every parent vertex. Throws ParameterError
// on shape mismatch and CoverageError when a parent vertex has no copy.
std::vector<Vec3> merge_partitions(const MeshPartition& partition,
                                   const std::vector<std::vector<Vec3>>& per_part_vertices);

}  // namespace hsp
