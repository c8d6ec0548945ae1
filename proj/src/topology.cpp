#include "hsp/topology.hpp"

#include "hsp/error.hpp"

#include <algorithm>
#include <unordered_map>

namespace hsp {

EdgeTopology build_edge_topology(const TriangleMesh& mesh) {
  EdgeTopology topo;
  topo.num_vertices = mesh.num_vertices();
  const int nf = mesh.num_faces();
  topo.face_edges.resize(nf);
  topo.faces = mesh.faces;

  std::unordered_map<std::uint64_t, int> index;
  index.reserve(static_cast<std::size_t>(nf) * 2);
  for (int f = 0; f < nf; ++f) {
    const Face& t = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      const auto [it, inserted] = index.try_emplace(edge_key(a, b), topo.num_edges());
      if (inserted) {
        topo.edges.push_back({std::min(a, b), std::max(a, b)});
        topo.edge_faces.push_back({f, kInvalid});
      } else {
        auto& ef = topo.edge_faces[it->second];
        if (ef[1] != kInvalid) {
          throw TopologyError("non-manifold edge (" + std::to_string(a) + ", " + std::to_string(b) +
                              ") has more than two incident faces");
        }
        ef[1] = f;
      }
      topo.face_edges[f][k] = it->second;
    }
  }

  topo.neighbors.assign(topo.edges.size(), {kInvalid, kInvalid, kInvalid, kInvalid});
  for (int e = 0; e < topo.num_edges(); ++e) {
    for (int side = 0; side < 2; ++side) {
      const int f = topo.edge_faces[e][side];
      if (f == kInvalid) continue;
      const auto& fe = topo.face_edges[f];
      const int k = static_cast<int>(std::find(fe.begin(), fe.end(), e) - fe.begin());
      topo.neighbors[e][2 * side] = fe[(k + 1) % 3];
      topo.neighbors[e][2 * side + 1] = fe[(k + 2) % 3];
    }
  }

  topo.one_ring.assign(topo.num_vertices, {});
  for (const auto& [a, b] : topo.edges) {
    topo.one_ring[a].push_back(b);
    topo.one_ring[b].push_back(a);
  }
  for (auto& ring : topo.one_ring) std::sort(ring.begin(), ring.end());
  return topo;
}

}  // namespace hsp
