#pragma once

#include "hsp/geometry.hpp"

#include <cstdint>
#include <vector>

namespace hsp {

// `k` area-uniform samples (face chosen with probability proportional to area,
// then a uniform barycentric point). Deterministic for a fixed seed.
std::vector<SurfacePoint> sample_surface(const TriangleMesh& mesh, int k, std::uint64_t seed);

std::vector<Vec3> positions_of(const std::vector<SurfacePoint>& samples);

}  // namespace hsp
