#include "hsp/sampling.hpp"

#include "hsp/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace hsp {

std::vector<SurfacePoint> sample_surface(const TriangleMesh& mesh, int k, std::uint64_t seed) {
  if (k < 1) throw ParameterError("sample_surface needs k >= 1");
  if (mesh.faces.empty()) throw ParameterError("sample_surface on a mesh without faces");
  std::vector<double> cdf(mesh.faces.size());
  double total = 0.0;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    total += face_area(mesh, f);
    cdf[f] = total;
  }
  if (!(total > 0.0)) throw ParameterError("sample_surface on a mesh with zero area");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<SurfacePoint> out(k);
  for (int i = 0; i < k; ++i) {
    const double r = uni(rng) * total;
    int f = static_cast<int>(std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
    f = std::min(f, mesh.num_faces() - 1);
    const double r1 = std::sqrt(uni(rng));
    const double r2 = uni(rng);
    Vec3 b(1.0 - r1, r1 * (1.0 - r2), r1 * r2);
    const Face& t = mesh.faces[f];
    out[i].face_id = f;
    out[i].barycentric = b;
    out[i].position = b[0] * mesh.vertices[t[0]] + b[1] * mesh.vertices[t[1]] + b[2] * mesh.vertices[t[2]];
  }
  return out;
}

std::vector<Vec3> positions_of(const std::vector<SurfacePoint>& samples) {
  std::vector<Vec3> out;
  out.reserve(samples.size());
  for (const SurfacePoint& s : samples) out.push_back(s.position);
  return out;
}

}  // namespace hsp
