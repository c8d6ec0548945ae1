#pragma once

#include "hsp/geometry.hpp"

#include <array>
#include <string>
#include <vector>

namespace hsp {

// Write to `path.tmp` and rename over `path`. Throws IoError.
void write_text_atomic(const std::string& path, const std::string& contents);
void write_bytes_atomic(const std::string& path, const std::vector<char>& bytes);
std::string read_text(const std::string& path);

// PLY vertices (x, y, z and optional red/green/blue as 8-bit or float).
// 8-bit colors are mapped to [0,1]. ASCII and binary encodings.
PointCloud read_ply_cloud(const std::string& path);
// Binary little-endian PLY: double positions, 8-bit colors when present.
void write_ply_cloud(const std::string& path, const PointCloud& cloud);

// Reads the vertex and face elements of a PLY (polygons are fan-triangulated).
TriangleMesh read_ply_mesh(const std::string& path);

struct ObjData {
  TriangleMesh mesh;
  std::vector<Vec2> texcoords;
  std::vector<std::array<int, 3>> face_texcoords;  // empty when the faces carry no vt
};

ObjData read_obj(const std::string& path);
void write_obj(const std::string& path, const TriangleMesh& mesh);

// Dispatches on the extension (.obj / .ply).
TriangleMesh read_mesh(const std::string& path);

void write_mtl(const std::string& path, const std::string& material, const std::string& texture_file);

// NPY (format 1.0, little-endian float64, C order).
void write_npy(const std::string& path, const std::vector<std::size_t>& shape, const std::vector<double>& data);
std::vector<double> read_npy(const std::string& path, std::vector<std::size_t>* shape = nullptr);

}  // namespace hsp
