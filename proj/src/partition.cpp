#include "hsp/partition.hpp"

#include "hsp/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <unordered_map>

namespace hsp {
namespace {

std::vector<std::vector<int>> edge_adjacent_faces(const TriangleMesh& mesh) {
  std::unordered_map<std::uint64_t, std::vector<int>> by_edge;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Face& t = mesh.faces[f];
    for (int k = 0; k < 3; ++k) by_edge[edge_key(t[k], t[(k + 1) % 3])].push_back(f);
  }
  std::vector<std::vector<int>> adj(mesh.faces.size());
  for (const auto& [key, fs] : by_edge) {
    for (int a : fs) {
      for (int b : fs) {
        if (a != b) adj[a].push_back(b);
      }
    }
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  return adj;
}

MeshPart extract_part(const TriangleMesh& mesh, const std::vector<int>& faces, const std::vector<char>& core) {
  MeshPart part;
  std::unordered_map<int, int> local;
  for (int f : faces) {
    Face t;
    for (int k = 0; k < 3; ++k) {
      const int v = mesh.faces[f][k];
      const auto [it, inserted] = local.try_emplace(v, static_cast<int>(part.vertex_map.size()));
      if (inserted) {
        part.vertex_map.push_back(v);
        part.mesh.vertices.push_back(mesh.vertices[v]);
      }
      t[k] = it->second;
    }
    part.mesh.faces.push_back(t);
    part.face_map.push_back(f);
    part.core_face.push_back(core[f]);
  }
  return part;
}

}  // namespace

MeshPartition partition_mesh(const TriangleMesh& mesh, int max_faces, int overlap_rings) {
  if (max_faces < 100) throw ParameterError("partition_mesh needs max_faces >= 100");
  const int nf = mesh.num_faces();
  const int nv = mesh.num_vertices();
  MeshPartition result;
  result.num_parent_vertices = nv;

  if (nf <= max_faces) {
    MeshPart part;
    part.mesh = mesh;
    part.vertex_map.resize(nv);
    part.face_map.resize(nf);
    for (int v = 0; v < nv; ++v) part.vertex_map[v] = v;
    for (int f = 0; f < nf; ++f) part.face_map[f] = f;
    part.core_face.assign(nf, 1);
    result.parts.push_back(std::move(part));
    result.overlap_counts.assign(nv, 1);
    return result;
  }

  const auto adjacency = edge_adjacent_faces(mesh);
  std::vector<std::vector<int>> vertex_faces(nv);
  for (int f = 0; f < nf; ++f) {
    for (int v : mesh.faces[f]) vertex_faces[v].push_back(f);
  }
  std::vector<Vec3> centroid(nf);
  for (int f = 0; f < nf; ++f) centroid[f] = face_centroid(mesh, f);

  int regions = static_cast<int>(std::ceil(nf / (0.6 * max_faces)));
  for (;; ++regions) {
    // Farthest-point seeds over face centroids.
    std::vector<int> seeds{0};
    std::vector<double> dist(nf, std::numeric_limits<double>::infinity());
    while (static_cast<int>(seeds.size()) < regions) {
      const Vec3& s = centroid[seeds.back()];
      int far = 0;
      for (int f = 0; f < nf; ++f) {
        dist[f] = std::min(dist[f], (centroid[f] - s).squaredNorm());
        if (dist[f] > dist[far]) far = f;
      }
      seeds.push_back(far);
    }

    std::vector<int> label(nf, -1);
    std::deque<int> queue;
    for (int r = 0; r < regions; ++r) {
      label[seeds[r]] = r;
      queue.push_back(seeds[r]);
    }
    while (!queue.empty()) {
      const int f = queue.front();
      queue.pop_front();
      for (int g : adjacency[f]) {
        if (label[g] < 0) {
          label[g] = label[f];
          queue.push_back(g);
        }
      }
    }
    // Disconnected leftovers (multiple components) join region 0.
    for (int& l : label) {
      if (l < 0) l = 0;
    }

    std::vector<std::vector<int>> part_faces(regions);
    std::vector<std::vector<char>> cores(regions, std::vector<char>(nf, 0));
    bool fits = true;
    for (int r = 0; r < regions && fits; ++r) {
      std::vector<char> in(nf, 0);
      std::vector<int> members;
      for (int f = 0; f < nf; ++f) {
        if (label[f] == r) {
          in[f] = 1;
          cores[r][f] = 1;
          members.push_back(f);
        }
      }
      std::vector<int> frontier = members;
      for (int ring = 0; ring < overlap_rings; ++ring) {
        std::vector<int> next;
        for (int f : frontier) {
          for (int v : mesh.faces[f]) {
            for (int g : vertex_faces[v]) {
              if (!in[g]) {
                in[g] = 1;
                next.push_back(g);
              }
            }
          }
        }
        frontier = std::move(next);
      }
      for (int f = 0; f < nf; ++f) {
        if (in[f]) part_faces[r].push_back(f);
      }
      if (static_cast<int>(part_faces[r].size()) > max_faces) fits = false;
    }
    if (!fits) continue;

    result.overlap_counts.assign(nv, 0);
    for (int r = 0; r < regions; ++r) {
      if (part_faces[r].empty()) continue;
      result.parts.push_back(extract_part(mesh, part_faces[r], cores[r]));
      for (int v : result.parts.back().vertex_map) ++result.overlap_counts[v];
    }
    return result;
  }
}

std::vector<Vec3> merge_partitions(const MeshPartition& partition,
                                   const std::vector<std::vector<Vec3>>& per_part_vertices) {
  if (per_part_vertices.size() != partition.parts.size()) {
    throw ParameterError("merge_partitions: expected " + std::to_string(partition.parts.size()) +
                         " part arrays, got " + std::to_string(per_part_vertices.size()));
  }
  const int nv = partition.num_parent_vertices;
  std::vector<Vec3> sum(nv, Vec3::Zero());
  std::vector<int> count(nv, 0);
  for (std::size_t p = 0; p < partition.parts.size(); ++p) {
    const auto& map = partition.parts[p].vertex_map;
    if (per_part_vertices[p].size() != map.size()) {
      throw ParameterError("merge_partitions: part " + std::to_string(p) + " has " +
                           std::to_string(per_part_vertices[p].size()) + " vertices, expected " +
                           std::to_string(map.size()));
    }
    for (std::size_t i = 0; i < map.size(); ++i) {
      sum[map[i]] += per_part_vertices[p][i];
      ++count[map[i]];
    }
  }
  for (int v = 0; v < nv; ++v) {
    if (count[v] == 0) throw CoverageError("merge_partitions: vertex " + std::to_string(v) + " is in no part");
    sum[v] /= static_cast<double>(count[v]);
  }
  return sum;
}

}  // namespace hsp
