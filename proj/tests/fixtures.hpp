#pragma once

#include "hsp/error.hpp"
#include "hsp/geometry.hpp"
#include "hsp/shapes.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

namespace hsp::test {

inline std::vector<Vec3> random_points(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Vec3> pts(n);
  for (Vec3& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

// Icosphere with randomly jittered vertices (still a closed manifold).
inline TriangleMesh jittered_sphere(int level, double jitter, std::mt19937_64& rng) {
  TriangleMesh m = icosphere(level, 1.0);
  std::uniform_real_distribution<double> u(-jitter, jitter);
  for (Vec3& v : m.vertices) v += Vec3(u(rng), u(rng), u(rng));
  return m;
}

// Fresh empty directory under the system temp dir.
inline std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hsp_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace hsp::test
