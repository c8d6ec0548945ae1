#include "hsp/mesh_io.hpp"

#include "hsp/error.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace hsp {

namespace fs = std::filesystem;

void write_bytes_atomic(const std::string& path, const std::vector<char>& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp + " for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("failed writing " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

void write_text_atomic(const std::string& path, const std::string& contents) {
  write_bytes_atomic(path, std::vector<char>(contents.begin(), contents.end()));
}

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// --- PLY -------------------------------------------------------------------

namespace {

enum class PlyFormat { Ascii, BinaryLE, BinaryBE };

struct PlyProperty {
  std::string name;
  std::string type;
  bool is_list = false;
  std::string count_type;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

int type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
  if (t == "double" || t == "float64") return 8;
  throw IoError("unknown PLY property type '" + t + "'");
}

bool is_uchar(const std::string& t) { return t == "uchar" || t == "uint8"; }

class PlyReader {
public:
  explicit PlyReader(const std::string& path) : path_(path) {
    data_ = read_text(path);
    std::istringstream hs(data_);
    std::string line;
    std::getline(hs, line);
    if (line.rfind("ply", 0) != 0) throw IoError(path + ": not a PLY file");
    bool done = false;
    while (std::getline(hs, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::istringstream ls(line);
      std::string kw;
      ls >> kw;
      if (kw == "format") {
        std::string f;
        ls >> f;
        if (f == "ascii") format_ = PlyFormat::Ascii;
        else if (f == "binary_little_endian") format_ = PlyFormat::BinaryLE;
        else if (f == "binary_big_endian") format_ = PlyFormat::BinaryBE;
        else throw IoError(path + ": unsupported PLY format " + f);
      } else if (kw == "element") {
        PlyElement e;
        ls >> e.name >> e.count;
        elements_.push_back(e);
      } else if (kw == "property") {
        if (elements_.empty()) throw IoError(path + ": property before element");
        PlyProperty p;
        std::string t;
        ls >> t;
        if (t == "list") {
          p.is_list = true;
          ls >> p.count_type >> p.type >> p.name;
        } else {
          p.type = t;
          ls >> p.name;
        }
        elements_.back().props.push_back(p);
      } else if (kw == "end_header") {
        done = true;
        break;
      }
    }
    if (!done) throw IoError(path + ": PLY header has no end_header");
    pos_ = static_cast<std::size_t>(hs.tellg());
    if (format_ == PlyFormat::Ascii) body_.str(data_.substr(pos_));
  }

  const std::vector<PlyElement>& elements() const { return elements_; }

  double scalar(const std::string& type) {
    if (format_ == PlyFormat::Ascii) {
      double v;
      if (!(body_ >> v)) throw IoError(path_ + ": truncated ASCII PLY body");
      return v;
    }
    const int n = type_size(type);
    if (pos_ + n > data_.size()) throw IoError(path_ + ": truncated binary PLY body");
    unsigned char buf[8];
    std::memcpy(buf, data_.data() + pos_, n);
    pos_ += n;
    const bool swap = (format_ == PlyFormat::BinaryBE) == (std::endian::native == std::endian::little);
    if (swap) std::reverse(buf, buf + n);
    if (type == "char" || type == "int8") return static_cast<double>(*reinterpret_cast<std::int8_t*>(buf));
    if (type == "uchar" || type == "uint8") return static_cast<double>(buf[0]);
    if (type == "short" || type == "int16") { std::int16_t v; std::memcpy(&v, buf, 2); return v; }
    if (type == "ushort" || type == "uint16") { std::uint16_t v; std::memcpy(&v, buf, 2); return v; }
    if (type == "int" || type == "int32") { std::int32_t v; std::memcpy(&v, buf, 4); return v; }
    if (type == "uint" || type == "uint32") { std::uint32_t v; std::memcpy(&v, buf, 4); return v; }
    if (type == "float" || type == "float32") { float v; std::memcpy(&v, buf, 4); return v; }
    double v;
    std::memcpy(&v, buf, 8);
    return v;
  }

private:
  std::string path_;
  std::string data_;
  std::size_t pos_ = 0;
  std::istringstream body_;
  PlyFormat format_ = PlyFormat::Ascii;
  std::vector<PlyElement> elements_;
};

struct PlyContents {
  PointCloud cloud;
  std::vector<Face> faces;
};

PlyContents read_ply(const std::string& path) {
  PlyReader reader(path);
  PlyContents out;
  bool have_vertex = false;
  for (const PlyElement& e : reader.elements()) {
    if (e.name == "vertex") {
      have_vertex = true;
      int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
      for (int i = 0; i < static_cast<int>(e.props.size()); ++i) {
        const std::string& n = e.props[i].name;
        if (n == "x") ix = i;
        else if (n == "y") iy = i;
        else if (n == "z") iz = i;
        else if (n == "red" || n == "diffuse_red" || n == "r") ir = i;
        else if (n == "green" || n == "diffuse_green" || n == "g") ig = i;
        else if (n == "blue" || n == "diffuse_blue" || n == "b") ib = i;
      }
      if (ix < 0 || iy < 0 || iz < 0) throw IoError(path + ": PLY vertex element lacks x/y/z");
      const bool colors = ir >= 0 && ig >= 0 && ib >= 0;
      if (colors) out.cloud.colors.emplace();
      std::vector<double> row(e.props.size());
      for (std::size_t k = 0; k < e.count; ++k) {
        for (std::size_t i = 0; i < e.props.size(); ++i) {
          const PlyProperty& p = e.props[i];
          if (p.is_list) {
            const int n = static_cast<int>(reader.scalar(p.count_type));
            for (int j = 0; j < n; ++j) reader.scalar(p.type);
            row[i] = 0.0;
          } else {
            row[i] = reader.scalar(p.type);
          }
        }
        out.cloud.positions.emplace_back(row[ix], row[iy], row[iz]);
        if (colors) {
          Vec3 c(row[ir], row[ig], row[ib]);
          if (is_uchar(e.props[ir].type)) c /= 255.0;
          out.cloud.colors->push_back(c);
        }
      }
    } else {
      for (std::size_t k = 0; k < e.count; ++k) {
        std::vector<int> poly;
        for (const PlyProperty& p : e.props) {
          if (p.is_list) {
            const int n = static_cast<int>(reader.scalar(p.count_type));
            const bool indices = e.name == "face" && (p.name == "vertex_indices" || p.name == "vertex_index");
            for (int j = 0; j < n; ++j) {
              const double v = reader.scalar(p.type);
              if (indices) poly.push_back(static_cast<int>(v));
            }
          } else {
            reader.scalar(p.type);
          }
        }
        for (std::size_t j = 2; j < poly.size(); ++j) out.faces.push_back({poly[0], poly[j - 1], poly[j]});
      }
    }
  }
  if (!have_vertex) throw IoError(path + ": PLY has no vertex element");
  return out;
}

void append(std::vector<char>& out, const void* p, std::size_t n) {
  const char* c = static_cast<const char*>(p);
  out.insert(out.end(), c, c + n);
}

}  // namespace

PointCloud read_ply_cloud(const std::string& path) { return read_ply(path).cloud; }

TriangleMesh read_ply_mesh(const std::string& path) {
  PlyContents c = read_ply(path);
  TriangleMesh m;
  m.vertices = std::move(c.cloud.positions);
  m.faces = std::move(c.faces);
  for (const Face& f : m.faces) {
    for (int v : f) {
      if (v < 0 || v >= m.num_vertices()) throw IoError(path + ": face index out of range");
    }
  }
  return m;
}

void write_ply_cloud(const std::string& path, const PointCloud& cloud) {
  static_assert(std::endian::native == std::endian::little, "PLY writer assumes a little-endian host");
  std::ostringstream hs;
  hs << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size()
     << "\nproperty double x\nproperty double y\nproperty double z\n";
  if (cloud.has_colors()) hs << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  hs << "end_header\n";
  const std::string header = hs.str();
  std::vector<char> bytes(header.begin(), header.end());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    append(bytes, cloud.positions[i].data(), 3 * sizeof(double));
    if (cloud.has_colors()) {
      for (int k = 0; k < 3; ++k) {
        const auto v = static_cast<std::uint8_t>(std::lround(std::clamp((*cloud.colors)[i][k], 0.0, 1.0) * 255.0));
        bytes.push_back(static_cast<char>(v));
      }
    }
  }
  write_bytes_atomic(path, bytes);
}

// --- OBJ -------------------------------------------------------------------

ObjData read_obj(const std::string& path) {
  std::istringstream is(read_text(path));
  ObjData out;
  std::string line;
  bool any_plain = false, any_vt = false;
  int lineno = 0;
  auto resolve = [&](int idx, std::size_t n) {
    const int r = idx < 0 ? static_cast<int>(n) + idx : idx - 1;
    if (r < 0 || r >= static_cast<int>(n)) {
      throw IoError(path + ":" + std::to_string(lineno) + ": index " + std::to_string(idx) + " out of range");
    }
    return r;
  };
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "v") {
      Vec3 v;
      ls >> v.x() >> v.y() >> v.z();
      if (!ls) throw IoError(path + ":" + std::to_string(lineno) + ": malformed vertex");
      out.mesh.vertices.push_back(v);
    } else if (kw == "vt") {
      Vec2 t;
      ls >> t.x() >> t.y();
      if (!ls) throw IoError(path + ":" + std::to_string(lineno) + ": malformed texture coordinate");
      out.texcoords.push_back(t);
    } else if (kw == "f") {
      std::vector<int> vi, ti;
      std::string tok;
      while (ls >> tok) {
        int v = 0, t = 0;
        const auto s1 = tok.find('/');
        v = std::stoi(tok.substr(0, s1));
        if (s1 != std::string::npos) {
          const auto s2 = tok.find('/', s1 + 1);
          const std::string ts = tok.substr(s1 + 1, s2 == std::string::npos ? std::string::npos : s2 - s1 - 1);
          if (!ts.empty()) t = std::stoi(ts);
        }
        vi.push_back(resolve(v, out.mesh.vertices.size()));
        ti.push_back(t != 0 ? resolve(t, out.texcoords.size()) : -1);
      }
      if (vi.size() < 3) throw IoError(path + ":" + std::to_string(lineno) + ": face with fewer than 3 vertices");
      for (std::size_t j = 2; j < vi.size(); ++j) {
        out.mesh.faces.push_back({vi[0], vi[j - 1], vi[j]});
        if (ti[0] >= 0 && ti[j - 1] >= 0 && ti[j] >= 0) {
          any_vt = true;
          out.face_texcoords.push_back({ti[0], ti[j - 1], ti[j]});
        } else {
          any_plain = true;
          out.face_texcoords.push_back({-1, -1, -1});
        }
      }
    }
  }
  if (!any_vt || any_plain) out.face_texcoords.clear();
  return out;
}

void write_obj(const std::string& path, const TriangleMesh& mesh) {
  std::string s;
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    s += buf;
  }
  for (const Face& f : mesh.faces) {
    std::snprintf(buf, sizeof(buf), "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
    s += buf;
  }
  write_text_atomic(path, s);
}

TriangleMesh read_mesh(const std::string& path) {
  const std::string ext = fs::path(path).extension().string();
  if (!fs::exists(path)) throw IoError("mesh file not found: " + path);
  if (ext == ".obj" || ext == ".OBJ") return read_obj(path).mesh;
  if (ext == ".ply" || ext == ".PLY") return read_ply_mesh(path);
  throw IoError(path + ": unsupported mesh extension '" + ext + "'");
}

void write_mtl(const std::string& path, const std::string& material, const std::string& texture_file) {
  write_text_atomic(path, "newmtl " + material +
                              "\nKa 1 1 1\nKd 1 1 1\nKs 0 0 0\nd 1\nillum 1\nmap_Kd " + texture_file + "\n");
}

// --- NPY -------------------------------------------------------------------

void write_npy(const std::string& path, const std::vector<std::size_t>& shape, const std::vector<double>& data) {
  std::size_t n = 1;
  std::string dims;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    n *= shape[i];
    dims += std::to_string(shape[i]) + (shape.size() == 1 || i + 1 < shape.size() ? "," : "");
    if (i + 1 < shape.size()) dims += " ";
  }
  if (n != data.size()) throw ParameterError("write_npy: shape does not match data size");
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" + dims + "), }";
  const std::size_t total = 10 + header.size() + 1;
  header.append((64 - total % 64) % 64, ' ');
  header += '\n';
  std::vector<char> bytes = {'\x93', 'N', 'U', 'M', 'P', 'Y', 1, 0};
  const auto hl = static_cast<std::uint16_t>(header.size());
  bytes.push_back(static_cast<char>(hl & 0xff));
  bytes.push_back(static_cast<char>(hl >> 8));
  bytes.insert(bytes.end(), header.begin(), header.end());
  append(bytes, data.data(), data.size() * sizeof(double));
  write_bytes_atomic(path, bytes);
}

std::vector<double> read_npy(const std::string& path, std::vector<std::size_t>* shape) {
  const std::string s = read_text(path);
  if (s.size() < 10 || s.compare(1, 5, "NUMPY") != 0) throw IoError(path + ": not an NPY file");
  const std::size_t hl = static_cast<unsigned char>(s[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(s[9])) << 8);
  const std::string header = s.substr(10, hl);
  if (header.find("'<f8'") == std::string::npos) throw IoError(path + ": only little-endian float64 NPY is supported");
  const auto open = header.find('('), close = header.find(')');
  std::vector<std::size_t> dims;
  std::istringstream ds(header.substr(open + 1, close - open - 1));
  std::string tok;
  std::size_t n = 1;
  while (std::getline(ds, tok, ',')) {
    if (tok.find_first_not_of(' ') == std::string::npos) continue;
    dims.push_back(std::stoul(tok));
    n *= dims.back();
  }
  if (s.size() < 10 + hl + n * sizeof(double)) throw IoError(path + ": truncated NPY data");
  std::vector<double> data(n);
  std::memcpy(data.data(), s.data() + 10 + hl, n * sizeof(double));
  if (shape) *shape = dims;
  return data;
}

}  // namespace hsp
