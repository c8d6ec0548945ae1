#include "hsp/atlas.hpp"

#include "hsp/error.hpp"
#include "hsp/mesh_io.hpp"
#include "hsp/topology.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <sstream>

namespace hsp {

Vec2 uv_to_site(const Vec2& uv, int resolution) {
  return {uv.y() * resolution - 0.5, uv.x() * resolution - 0.5};
}

Vec2 site_to_uv(const Vec2& site, int resolution) {
  return {(site.y() + 0.5) / resolution, (site.x() + 0.5) / resolution};
}

std::vector<std::uint8_t> UVAtlas::valid_mask() const {
  std::vector<std::uint8_t> m(pixel_chart.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = pixel_chart[i] >= 0 ? 1 : 0;
  return m;
}

int UVAtlas::valid_pixel_count() const {
  return static_cast<int>(std::count_if(pixel_chart.begin(), pixel_chart.end(), [](int c) { return c >= 0; }));
}

bool site_is_valid(const UVAtlas& atlas, const Vec2& site, int chart) {
  const int n = atlas.resolution;
  const double r = site[0], c = site[1];
  if (!(r >= 0.0 && r <= n - 1 && c >= 0.0 && c <= n - 1)) return false;
  const int r0 = std::min(static_cast<int>(r), n - 1), c0 = std::min(static_cast<int>(c), n - 1);
  const int r1 = std::min(r0 + 1, n - 1), c1 = std::min(c0 + 1, n - 1);
  return atlas.chart_at(r0, c0) == chart && atlas.chart_at(r0, c1) == chart && atlas.chart_at(r1, c0) == chart &&
         atlas.chart_at(r1, c1) == chart;
}

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Local isometric frame of a 3D triangle: p0 at the origin, p1 on +x.
std::array<Vec2, 3> local_frame(const Vec3& p0, const Vec3& p1, const Vec3& p2) {
  const Vec3 e1 = p1 - p0, e2 = p2 - p0;
  const Vec3 x = e1.normalized();
  const Vec3 n = e1.cross(e2).normalized();
  const Vec3 y = n.cross(x);
  return {Vec2(0, 0), Vec2(e1.norm(), 0), Vec2(e2.dot(x), e2.dot(y))};
}

// Singular-value ratio of the linear map taking the 3D triangle to its UV image.
double jacobian_ratio(const std::array<Vec2, 3>& local, const std::array<Vec2, 3>& uv) {
  Eigen::Matrix2d P, U;
  P.col(0) = local[1] - local[0];
  P.col(1) = local[2] - local[0];
  U.col(0) = uv[1] - uv[0];
  U.col(1) = uv[2] - uv[0];
  if (std::abs(P.determinant()) < 1e-300) return std::numeric_limits<double>::infinity();
  const Eigen::Matrix2d J = U * P.inverse();
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(J);
  const auto s = svd.singularValues();
  if (s[1] <= 0.0) return std::numeric_limits<double>::infinity();
  return s[0] / s[1];
}

struct ChartParam {
  std::vector<int> faces;
  std::vector<int> vertices;  // sorted global ids
  std::vector<Vec2> uv;       // per local vertex
};

int local_index(const std::vector<int>& sorted, int v) {
  return static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin());
}

bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const double d1 = cross2(b - a, c - a), d2 = cross2(b - a, d - a);
  const double d3 = cross2(d - c, a - c), d4 = cross2(d - c, b - c);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

// Least-squares conformal flattening; nullopt when the result is not injective
// or too distorted.
std::optional<ChartParam> flatten_chart(const TriangleMesh& mesh, const std::vector<int>& faces,
                                        double max_distortion) {
  ChartParam cp;
  cp.faces = faces;
  for (int f : faces) {
    for (int v : mesh.faces[f]) cp.vertices.push_back(v);
  }
  std::sort(cp.vertices.begin(), cp.vertices.end());
  cp.vertices.erase(std::unique(cp.vertices.begin(), cp.vertices.end()), cp.vertices.end());
  const int n = static_cast<int>(cp.vertices.size());
  cp.uv.assign(n, Vec2::Zero());

  std::vector<std::array<Vec2, 3>> local(faces.size());
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const Face& t = mesh.faces[faces[i]];
    local[i] = local_frame(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
  }

  if (faces.size() == 1) {
    const Face& t = mesh.faces[faces[0]];
    for (int k = 0; k < 3; ++k) cp.uv[local_index(cp.vertices, t[k])] = local[0][k];
  } else {
    // Pins: a far-apart vertex pair.
    auto farthest = [&](int from) {
      int best = 0;
      double bd = -1.0;
      for (int i = 0; i < n; ++i) {
        const double d = (mesh.vertices[cp.vertices[i]] - mesh.vertices[cp.vertices[from]]).squaredNorm();
        if (d > bd) {
          bd = d;
          best = i;
        }
      }
      return best;
    };
    const int pa = farthest(0);
    const int pb = farthest(pa);
    if (pa == pb) return std::nullopt;
    std::vector<int> var(n, -1);
    int nfree = 0;
    for (int i = 0; i < n; ++i) {
      if (i != pa && i != pb) var[i] = nfree++;
    }
    const Vec2 pin_a(0.0, 0.0);
    const Vec2 pin_b((mesh.vertices[cp.vertices[pb]] - mesh.vertices[cp.vertices[pa]]).norm(), 0.0);
    cp.uv[pa] = pin_a;
    cp.uv[pb] = pin_b;

    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * static_cast<Eigen::Index>(faces.size()));
    for (std::size_t i = 0; i < faces.size(); ++i) {
      const Face& t = mesh.faces[faces[i]];
      const auto& z = local[i];
      const double area = 0.5 * cross2(z[1] - z[0], z[2] - z[0]);
      if (!(area > 0.0)) return std::nullopt;
      const double w = 1.0 / std::sqrt(area);
      for (int k = 0; k < 3; ++k) {
        const Vec2 e = z[(k + 2) % 3] - z[(k + 1) % 3];
        const double a = e.x() * w, b = e.y() * w;
        const int li = local_index(cp.vertices, t[k]);
        const int row_re = static_cast<int>(2 * i), row_im = row_re + 1;
        // Re: a u - b v ; Im: b u + a v
        if (var[li] >= 0) {
          trip.emplace_back(row_re, 2 * var[li], a);
          trip.emplace_back(row_re, 2 * var[li] + 1, -b);
          trip.emplace_back(row_im, 2 * var[li], b);
          trip.emplace_back(row_im, 2 * var[li] + 1, a);
        } else {
          const Vec2& p = cp.uv[li];
          rhs[row_re] -= a * p.x() - b * p.y();
          rhs[row_im] -= b * p.x() + a * p.y();
        }
      }
    }
    if (nfree > 0) {
      Eigen::SparseMatrix<double> A(2 * static_cast<Eigen::Index>(faces.size()), 2 * nfree);
      A.setFromTriplets(trip.begin(), trip.end());
      const Eigen::SparseMatrix<double> AtA = A.transpose() * A;
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(AtA);
      if (solver.info() != Eigen::Success) return std::nullopt;
      const Eigen::VectorXd x = solver.solve(A.transpose() * rhs);
      if (solver.info() != Eigen::Success || !x.allFinite()) return std::nullopt;
      for (int i = 0; i < n; ++i) {
        if (var[i] >= 0) cp.uv[i] = Vec2(x[2 * var[i]], x[2 * var[i] + 1]);
      }
    }
  }

  // Orientation, distortion.
  double min_area = std::numeric_limits<double>::infinity();
  double uv_area = 0.0, area3 = 0.0;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const Face& t = mesh.faces[faces[i]];
    std::array<Vec2, 3> uv;
    for (int k = 0; k < 3; ++k) uv[k] = cp.uv[local_index(cp.vertices, t[k])];
    const double a = 0.5 * cross2(uv[1] - uv[0], uv[2] - uv[0]);
    min_area = std::min(min_area, a);
    uv_area += a;
    area3 += 0.5 * cross2(local[i][1] - local[i][0], local[i][2] - local[i][0]);
    if (faces.size() > 1 && jacobian_ratio(local[i], uv) > max_distortion) return std::nullopt;
  }
  if (!(min_area > 1e-14 * std::max(uv_area, 1e-300))) return std::nullopt;

  // Boundary must not self-intersect.
  if (faces.size() > 1) {
    std::vector<std::array<int, 2>> boundary;
    std::map<std::uint64_t, int> count;
    for (int f : faces) {
      const Face& t = mesh.faces[f];
      for (int k = 0; k < 3; ++k) ++count[edge_key(t[k], t[(k + 1) % 3])];
    }
    for (int f : faces) {
      const Face& t = mesh.faces[f];
      for (int k = 0; k < 3; ++k) {
        if (count[edge_key(t[k], t[(k + 1) % 3])] == 1) {
          boundary.push_back({local_index(cp.vertices, t[k]), local_index(cp.vertices, t[(k + 1) % 3])});
        }
      }
    }
    for (std::size_t i = 0; i < boundary.size(); ++i) {
      for (std::size_t j = i + 1; j < boundary.size(); ++j) {
        const auto& e1 = boundary[i];
        const auto& e2 = boundary[j];
        if (e1[0] == e2[0] || e1[0] == e2[1] || e1[1] == e2[0] || e1[1] == e2[1]) continue;
        if (segments_cross(cp.uv[e1[0]], cp.uv[e1[1]], cp.uv[e2[0]], cp.uv[e2[1]])) return std::nullopt;
      }
    }
  }

  // Principal axis along u, then match 3D area.
  Vec2 mean = Vec2::Zero();
  for (const Vec2& p : cp.uv) mean += p;
  mean /= n;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const Vec2& p : cp.uv) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  Vec2 axis = es.eigenvectors().col(1);
  if (axis.x() < 0 || (axis.x() == 0 && axis.y() < 0)) axis = -axis;
  const double scale = std::sqrt(area3 / uv_area);
  for (Vec2& p : cp.uv) {
    const Vec2 d = p - mean;
    p = scale * Vec2(d.dot(axis), cross2(axis, d));
  }
  return cp;
}

// Normal-cone region growth that keeps every chart a topological disk.
std::vector<std::vector<int>> grow_charts(const TriangleMesh& mesh, const EdgeTopology& topo,
                                          const std::vector<Vec3>& normals, const std::vector<double>& areas,
                                          const std::vector<int>& subset, double cone_degrees) {
  const int nf = mesh.num_faces();
  const double cos_cone = std::cos(cone_degrees * M_PI / 180.0);
  std::vector<char> allowed(nf, 0);
  for (int f : subset) allowed[f] = 1;
  std::vector<int> owner(nf, -1);
  std::vector<int> vertex_mark(mesh.num_vertices(), -1);
  std::vector<std::vector<int>> charts;

  auto other_face = [&](int e, int f) {
    const auto& ef = topo.edge_faces[e];
    return ef[0] == f ? ef[1] : ef[0];
  };

  for (int seed : subset) {
    if (owner[seed] >= 0) continue;
    const int c = static_cast<int>(charts.size());
    charts.push_back({});
    Vec3 normal_sum = Vec3::Zero();
    using Entry = std::pair<double, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> pq;
    auto add = [&](int f) {
      owner[f] = c;
      charts[c].push_back(f);
      normal_sum += normals[f] * areas[f];
      for (int v : mesh.faces[f]) vertex_mark[v] = c;
      const Vec3 avg = normal_sum.normalized();
      for (int e : topo.face_edges[f]) {
        const int g = other_face(e, f);
        if (g >= 0 && allowed[g] && owner[g] < 0) pq.push({1.0 - normals[g].dot(avg), g});
      }
    };
    add(seed);
    while (!pq.empty()) {
      const int f = pq.top().second;
      pq.pop();
      if (owner[f] >= 0) continue;
      if (normals[f].dot(normal_sum.normalized()) < cos_cone) continue;
      int shared = 0, shared_k = -1;
      for (int k = 0; k < 3; ++k) {
        const int g = other_face(topo.face_edges[f][k], f);
        if (g >= 0 && owner[g] == c) {
          ++shared;
          shared_k = k;
        }
      }
      bool ok = false;
      if (shared == 2) {
        ok = true;
      } else if (shared == 1) {
        const int opposite = mesh.faces[f][(shared_k + 2) % 3];
        ok = vertex_mark[opposite] != c;
      }
      if (ok) add(f);
    }
    std::sort(charts[c].begin(), charts[c].end());
  }
  return charts;
}

// Folds and noise leave many tiny charts; absorb each into the neighbour it
// shares most edges with when the union passes the same flattening checks.
int merge_small_charts(const TriangleMesh& mesh, const EdgeTopology& topo, std::vector<ChartParam>& charts,
                       const AtlasOptions& opt) {
  int merged = 0;
  std::vector<int> owner(mesh.num_faces(), -1);
  std::vector<char> alive(charts.size(), 1);
  for (std::size_t c = 0; c < charts.size(); ++c) {
    for (int f : charts[c].faces) owner[f] = static_cast<int>(c);
  }
  for (bool changed = true; changed;) {
    changed = false;
    std::vector<int> order;
    for (std::size_t c = 0; c < charts.size(); ++c) {
      if (alive[c] && static_cast<int>(charts[c].faces.size()) < opt.merge_below_faces) order.push_back(static_cast<int>(c));
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return charts[a].faces.size() < charts[b].faces.size(); });
    for (int c : order) {
      if (!alive[c] || static_cast<int>(charts[c].faces.size()) >= opt.merge_below_faces) continue;
      std::map<int, int> shared;
      for (int f : charts[c].faces) {
        for (int e : topo.face_edges[f]) {
          for (int g : topo.edge_faces[e]) {
            if (g >= 0 && owner[g] != c) ++shared[owner[g]];
          }
        }
      }
      std::vector<std::pair<int, int>> cand;
      for (auto [d, n] : shared) cand.push_back({-n, d});
      std::sort(cand.begin(), cand.end());
      for (auto [neg, d] : cand) {
        std::vector<int> faces = charts[d].faces;
        faces.insert(faces.end(), charts[c].faces.begin(), charts[c].faces.end());
        std::sort(faces.begin(), faces.end());
        auto cp = flatten_chart(mesh, faces, opt.max_distortion);
        if (!cp) continue;
        charts[d] = std::move(*cp);
        for (int f : charts[c].faces) owner[f] = d;
        alive[c] = 0;
        ++merged;
        changed = true;
        break;
      }
    }
  }
  std::vector<ChartParam> kept;
  for (std::size_t c = 0; c < charts.size(); ++c) {
    if (alive[c]) kept.push_back(std::move(charts[c]));
  }
  charts = std::move(kept);
  return merged;
}

struct PackResult {
  std::vector<Vec2> offset;  // pixel position of each chart's geometry minimum
  double scale = 0.0;        // pixels per model unit
};

// Skyline placement; returns false when the rectangles do not fit.
bool skyline_pack(const std::vector<std::pair<int, int>>& sizes, int container, std::vector<std::pair<int, int>>& pos) {
  const int n = static_cast<int>(sizes.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (sizes[a].second != sizes[b].second) return sizes[a].second > sizes[b].second;
    return sizes[a].first > sizes[b].first;
  });
  std::vector<int> sky(container, 0);
  pos.assign(n, {0, 0});
  for (int idx : order) {
    const int w = sizes[idx].first, h = sizes[idx].second;
    if (w > container || h > container) return false;
    // Sliding-window maximum of the skyline over [x, x + w).
    std::deque<int> dq;
    int best_x = -1, best_y = container + 1;
    for (int x = 0; x < container; ++x) {
      while (!dq.empty() && sky[dq.back()] <= sky[x]) dq.pop_back();
      dq.push_back(x);
      if (dq.front() <= x - w) dq.pop_front();
      if (x >= w - 1) {
        const int y = sky[dq.front()];
        if (y < best_y) {
          best_y = y;
          best_x = x - w + 1;
        }
      }
    }
    if (best_x < 0 || best_y + h > container) return false;
    for (int x = best_x; x < best_x + w; ++x) sky[x] = best_y + h;
    pos[idx] = {best_x, best_y};
  }
  return true;
}

PackResult pack_charts(const std::vector<ChartParam>& charts, int resolution, const AtlasOptions& opt) {
  const int n = static_cast<int>(charts.size());
  std::vector<Vec2> lo(n), ext(n);
  double total = 0.0, max_ext = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec2 mn = Vec2::Constant(std::numeric_limits<double>::infinity()), mx = -mn;
    for (const Vec2& p : charts[i].uv) {
      mn = mn.cwiseMin(p);
      mx = mx.cwiseMax(p);
    }
    lo[i] = mn;
    ext[i] = mx - mn;
    total += ext[i].x() * ext[i].y();
    max_ext = std::max(max_ext, ext[i].maxCoeff());
  }
  const int pad = 2 * opt.border_pixels + opt.gutter_pixels;
  const int container = resolution + opt.gutter_pixels;
  std::vector<std::pair<int, int>> pos;
  auto fits = [&](double s) {
    std::vector<std::pair<int, int>> sizes(n);
    for (int i = 0; i < n; ++i) {
      sizes[i] = {static_cast<int>(std::ceil(ext[i].x() * s)) + pad, static_cast<int>(std::ceil(ext[i].y() * s)) + pad};
    }
    return skyline_pack(sizes, container, pos);
  };
  double hi = std::min(resolution / std::sqrt(std::max(total, 1e-300)), resolution / std::max(max_ext, 1e-300));
  double lo_s = hi;
  int halvings = 0;
  while (!fits(lo_s)) {
    lo_s *= 0.5;
    if (++halvings > 60) {
      throw AtlasError("cannot pack " + std::to_string(n) + " charts into a " + std::to_string(resolution) +
                       " pixel atlas");
    }
  }
  if (halvings > 0) {
    hi = lo_s * 2.0;
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (lo_s + hi);
      if (fits(mid)) {
        lo_s = mid;
      } else {
        hi = mid;
      }
    }
  }
  if (!fits(lo_s)) throw AtlasError("chart packing failed");
  PackResult out;
  out.scale = lo_s;
  out.offset.resize(n);
  for (int i = 0; i < n; ++i) {
    out.offset[i] = Vec2(pos[i].first + opt.border_pixels, pos[i].second + opt.border_pixels) - lo[i] * lo_s;
  }
  return out;
}

// Distance from p to triangle (a, b, c) in 2D, zero inside.
double point_triangle_distance(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
  const double d1 = cross2(b - a, p - a), d2 = cross2(c - b, p - b), d3 = cross2(a - c, p - c);
  const bool neg = d1 < 0 || d2 < 0 || d3 < 0, pos = d1 > 0 || d2 > 0 || d3 > 0;
  if (!(neg && pos)) return 0.0;
  auto seg = [&](const Vec2& u, const Vec2& v) {
    const Vec2 d = v - u;
    const double len2 = d.squaredNorm();
    const double t = len2 > 0 ? std::clamp((p - u).dot(d) / len2, 0.0, 1.0) : 0.0;
    return (p - (u + t * d)).norm();
  };
  return std::min({seg(a, b), seg(b, c), seg(c, a)});
}

// Site-space (x = col, y = row) corners of a face.
std::array<Vec2, 3> face_sites(const UVAtlas& atlas, int f) {
  std::array<Vec2, 3> s;
  for (int k = 0; k < 3; ++k) {
    const Vec2 site = uv_to_site(atlas.corner_uv[f][k], atlas.resolution);
    s[k] = Vec2(site[1], site[0]);
  }
  return s;
}

void build_pixel_maps(UVAtlas& atlas, double radius, std::vector<std::string>* conflicts) {
  const int n = atlas.resolution;
  atlas.pixel_chart.assign(static_cast<std::size_t>(n) * n, -1);
  atlas.pixel_face.assign(static_cast<std::size_t>(n) * n, -1);
  std::vector<double> best(static_cast<std::size_t>(n) * n, std::numeric_limits<double>::infinity());
  std::vector<char> conflict(static_cast<std::size_t>(n) * n, 0);
  for (int f = 0; f < static_cast<int>(atlas.corner_uv.size()); ++f) {
    const auto s = face_sites(atlas, f);
    const double xmin = std::min({s[0].x(), s[1].x(), s[2].x()}), xmax = std::max({s[0].x(), s[1].x(), s[2].x()});
    const double ymin = std::min({s[0].y(), s[1].y(), s[2].y()}), ymax = std::max({s[0].y(), s[1].y(), s[2].y()});
    const int c0 = std::max(0, static_cast<int>(std::floor(xmin - radius)));
    const int c1 = std::min(n - 1, static_cast<int>(std::ceil(xmax + radius)));
    const int r0 = std::max(0, static_cast<int>(std::floor(ymin - radius)));
    const int r1 = std::min(n - 1, static_cast<int>(std::ceil(ymax + radius)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double d = point_triangle_distance(Vec2(c, r), s[0], s[1], s[2]);
        if (d > radius) continue;
        const std::size_t idx = static_cast<std::size_t>(r) * n + c;
        const int other = atlas.pixel_chart[idx];
        if (other >= 0 && other != atlas.chart_id[f]) conflict[idx] = 1;
        if (d < best[idx]) {
          best[idx] = d;
          atlas.pixel_chart[idx] = atlas.chart_id[f];
          atlas.pixel_face[idx] = f;
        }
      }
    }
  }
  int nconf = 0;
  for (std::size_t i = 0; i < conflict.size(); ++i) {
    if (conflict[i]) {
      atlas.pixel_chart[i] = -1;
      atlas.pixel_face[i] = -1;
      ++nconf;
    }
  }
  if (nconf > 0 && conflicts) conflicts->push_back(std::to_string(nconf) + " pixels are claimed by two charts");
}

}  // namespace

std::vector<double> face_distortion(const TriangleMesh& mesh, const UVAtlas& atlas) {
  std::vector<double> out(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& t = mesh.faces[f];
    out[f] = jacobian_ratio(local_frame(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]),
                            atlas.corner_uv[f]);
  }
  return out;
}

std::vector<int> rasterization_multiplicity(const UVAtlas& atlas) {
  const int n = atlas.resolution;
  std::vector<int> count(static_cast<std::size_t>(n) * n, 0);
  for (int f = 0; f < static_cast<int>(atlas.corner_uv.size()); ++f) {
    auto s = face_sites(atlas, f);
    if (cross2(s[1] - s[0], s[2] - s[0]) < 0) std::swap(s[1], s[2]);
    if (cross2(s[1] - s[0], s[2] - s[0]) == 0) continue;
    const int c0 = std::max(0, static_cast<int>(std::ceil(std::min({s[0].x(), s[1].x(), s[2].x()}))));
    const int c1 = std::min(n - 1, static_cast<int>(std::floor(std::max({s[0].x(), s[1].x(), s[2].x()}))));
    const int r0 = std::max(0, static_cast<int>(std::ceil(std::min({s[0].y(), s[1].y(), s[2].y()}))));
    const int r1 = std::min(n - 1, static_cast<int>(std::floor(std::max({s[0].y(), s[1].y(), s[2].y()}))));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const Vec2 p(c, r);
        bool inside = true;
        for (int k = 0; k < 3 && inside; ++k) {
          const Vec2 a = s[k], b = s[(k + 1) % 3];
          const Vec2 d = b - a;
          const double e = cross2(d, p - a);
          inside = e > 0 || (e == 0 && (d.y() > 0 || (d.y() == 0 && d.x() < 0)));
        }
        if (inside) ++count[static_cast<std::size_t>(r) * n + c];
      }
    }
  }
  return count;
}

std::vector<std::string> atlas_violations(const TriangleMesh& mesh, const UVAtlas& atlas, int min_gutter) {
  std::vector<std::string> out;
  const int nf = mesh.num_faces();
  if (static_cast<int>(atlas.corner_uv.size()) != nf || static_cast<int>(atlas.chart_id.size()) != nf) {
    out.push_back("atlas face count does not match mesh");
    return out;
  }
  int range_bad = 0;
  for (const auto& c : atlas.corner_uv) {
    for (const Vec2& uv : c) range_bad += (uv.x() < 0 || uv.x() > 1 || uv.y() < 0 || uv.y() > 1) ? 1 : 0;
  }
  if (range_bad) out.push_back(std::to_string(range_bad) + " corner UVs outside [0,1]");

  // Continuity inside charts.
  const EdgeTopology topo = build_edge_topology(mesh);
  int seams_bad = 0;
  for (int e = 0; e < topo.num_edges(); ++e) {
    const int f0 = topo.edge_faces[e][0], f1 = topo.edge_faces[e][1];
    if (f1 < 0 || atlas.chart_id[f0] != atlas.chart_id[f1]) continue;
    for (int v : topo.edges[e]) {
      const auto k0 = std::find(mesh.faces[f0].begin(), mesh.faces[f0].end(), v) - mesh.faces[f0].begin();
      const auto k1 = std::find(mesh.faces[f1].begin(), mesh.faces[f1].end(), v) - mesh.faces[f1].begin();
      if ((atlas.corner_uv[f0][k0] - atlas.corner_uv[f1][k1]).norm() > 1e-6) ++seams_bad;
    }
  }
  if (seams_bad) out.push_back(std::to_string(seams_bad) + " shared corners differ inside a chart");

  // Injectivity.
  const auto mult = rasterization_multiplicity(atlas);
  const int overlaps = static_cast<int>(std::count_if(mult.begin(), mult.end(), [](int m) { return m > 1; }));
  if (overlaps) out.push_back(std::to_string(overlaps) + " pixels are covered by more than one triangle");

  // Flipped orientation inside a chart counts as non-injective too.
  std::vector<int> chart_sign(atlas.num_charts, 0);
  int flipped = 0;
  for (int f = 0; f < nf; ++f) {
    const auto& uv = atlas.corner_uv[f];
    const double a = cross2(uv[1] - uv[0], uv[2] - uv[0]);
    const int s = a > 0 ? 1 : (a < 0 ? -1 : 0);
    int& cs = chart_sign[atlas.chart_id[f]];
    if (s == 0 || (cs != 0 && cs != s)) ++flipped;
    if (cs == 0) cs = s;
  }
  if (flipped) out.push_back(std::to_string(flipped) + " faces are degenerate or flipped in UV");

  // Coverage: centre pixels of every face and the pixels nearest its corners are valid.
  int uncovered = 0;
  for (int f = 0; f < nf; ++f) {
    const auto s = face_sites(atlas, f);
    const Vec2 centroid = (s[0] + s[1] + s[2]) / 3.0;
    for (const Vec2& p : {s[0], s[1], s[2], centroid}) {
      const int r = std::clamp(static_cast<int>(std::lround(p.y())), 0, atlas.resolution - 1);
      const int c = std::clamp(static_cast<int>(std::lround(p.x())), 0, atlas.resolution - 1);
      if (atlas.chart_at(r, c) != atlas.chart_id[f]) {
        ++uncovered;
        break;
      }
    }
  }
  if (uncovered) out.push_back(std::to_string(uncovered) + " faces rasterize outside the valid region");

  // Gutter between chart bounding boxes.
  std::vector<Vec2> lo(atlas.num_charts, Vec2::Constant(1e300)), hi(atlas.num_charts, Vec2::Constant(-1e300));
  for (int f = 0; f < nf; ++f) {
    for (const Vec2& uv : atlas.corner_uv[f]) {
      lo[atlas.chart_id[f]] = lo[atlas.chart_id[f]].cwiseMin(uv * atlas.resolution);
      hi[atlas.chart_id[f]] = hi[atlas.chart_id[f]].cwiseMax(uv * atlas.resolution);
    }
  }
  int tight = 0;
  for (int a = 0; a < atlas.num_charts; ++a) {
    for (int b = a + 1; b < atlas.num_charts; ++b) {
      const double gx = std::max(lo[a].x() - hi[b].x(), lo[b].x() - hi[a].x());
      const double gy = std::max(lo[a].y() - hi[b].y(), lo[b].y() - hi[a].y());
      if (std::max(gx, gy) < min_gutter) ++tight;
    }
  }
  if (tight) out.push_back(std::to_string(tight) + " chart pairs closer than " + std::to_string(min_gutter) + " px");
  return out;
}

UVAtlas atlas_from_corner_uvs(const TriangleMesh& mesh, const std::vector<std::array<Vec2, 3>>& corner_uv,
                              int resolution, const AtlasOptions& options, int min_gutter) {
  if (resolution < 4) throw ParameterError("atlas resolution must be >= 4");
  if (corner_uv.size() != mesh.faces.size()) throw AtlasError("corner UV count does not match face count");
  UVAtlas atlas;
  atlas.resolution = resolution;
  atlas.corner_uv = corner_uv;
  const int nf = mesh.num_faces();

  // Charts: faces joined across edges whose corner UVs agree.
  std::vector<int> uf(nf);
  std::iota(uf.begin(), uf.end(), 0);
  auto find = [&](int x) {
    while (uf[x] != x) x = uf[x] = uf[uf[x]];
    return x;
  };
  const EdgeTopology topo = build_edge_topology(mesh);
  for (int e = 0; e < topo.num_edges(); ++e) {
    const int f0 = topo.edge_faces[e][0], f1 = topo.edge_faces[e][1];
    if (f1 < 0) continue;
    bool same = true;
    for (int v : topo.edges[e]) {
      const auto k0 = std::find(mesh.faces[f0].begin(), mesh.faces[f0].end(), v) - mesh.faces[f0].begin();
      const auto k1 = std::find(mesh.faces[f1].begin(), mesh.faces[f1].end(), v) - mesh.faces[f1].begin();
      same = same && (corner_uv[f0][k0] - corner_uv[f1][k1]).norm() <= 1e-9;
    }
    if (same) {
      const int a = find(f0), b = find(f1);
      if (a != b) uf[std::max(a, b)] = std::min(a, b);
    }
  }
  atlas.chart_id.assign(nf, -1);
  std::vector<int> root_chart(nf, -1);
  for (int f = 0; f < nf; ++f) {
    const int r = find(f);
    if (root_chart[r] < 0) root_chart[r] = atlas.num_charts++;
    atlas.chart_id[f] = root_chart[r];
  }

  atlas.vertex_uv.assign(mesh.num_vertices(), {});
  for (int f = 0; f < nf; ++f) {
    for (int k = 0; k < 3; ++k) {
      auto& entries = atlas.vertex_uv[mesh.faces[f][k]];
      const int c = atlas.chart_id[f];
      const bool seen = std::any_of(entries.begin(), entries.end(), [c](const ChartUV& e) { return e.chart == c; });
      if (!seen) entries.push_back({c, corner_uv[f][k]});
    }
  }
  for (auto& entries : atlas.vertex_uv) {
    std::sort(entries.begin(), entries.end(), [](const ChartUV& a, const ChartUV& b) { return a.chart < b.chart; });
  }

  std::vector<std::string> problems;
  build_pixel_maps(atlas, options.valid_radius, &problems);
  for (auto& p : atlas_violations(mesh, atlas, min_gutter)) problems.push_back(std::move(p));
  if (!problems.empty()) {
    std::string msg = "invalid UV atlas:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw AtlasError(msg);
  }
  return atlas;
}

UVAtlas generate_atlas(const TriangleMesh& mesh, int resolution, const AtlasOptions& options, AtlasStats* stats) {
  if (!is_watertight(mesh)) throw TopologyError("generate_atlas requires a watertight mesh");
  if (resolution < 16) throw ParameterError("atlas resolution must be >= 16");
  const int nf = mesh.num_faces();
  const EdgeTopology topo = build_edge_topology(mesh);
  std::vector<Vec3> normals(nf);
  std::vector<double> areas(nf);
  for (int f = 0; f < nf; ++f) {
    normals[f] = face_normal(mesh, f);
    areas[f] = face_area(mesh, f);
  }

  AtlasStats st;
  std::vector<ChartParam> charts;
  std::vector<int> pending(nf);
  std::iota(pending.begin(), pending.end(), 0);
  double cone = options.cone_degrees;
  for (int depth = 0; !pending.empty(); ++depth) {
    std::vector<int> failed;
    std::vector<std::vector<int>> groups;
    if (depth > options.max_resegment_depth) {
      for (int f : pending) groups.push_back({f});
    } else {
      groups = grow_charts(mesh, topo, normals, areas, pending, cone);
    }
    for (const auto& g : groups) {
      auto cp = flatten_chart(mesh, g, options.max_distortion);
      if (cp) {
        charts.push_back(std::move(*cp));
      } else if (g.size() == 1) {
        throw AtlasError("face " + std::to_string(g[0]) + " cannot be flattened");
      } else {
        ++st.resegmented_charts;
        failed.insert(failed.end(), g.begin(), g.end());
      }
    }
    std::sort(failed.begin(), failed.end());
    pending = std::move(failed);
    cone *= 0.5;
  }
  st.merged_charts = merge_small_charts(mesh, topo, charts, options);
  std::sort(charts.begin(), charts.end(),
            [](const ChartParam& a, const ChartParam& b) { return a.faces.front() < b.faces.front(); });

  const PackResult pack = pack_charts(charts, resolution, options);
  std::vector<std::array<Vec2, 3>> corner_uv(nf);
  for (std::size_t c = 0; c < charts.size(); ++c) {
    const ChartParam& cp = charts[c];
    for (int f : cp.faces) {
      for (int k = 0; k < 3; ++k) {
        const Vec2 px = pack.offset[c] + pack.scale * cp.uv[local_index(cp.vertices, mesh.faces[f][k])];
        corner_uv[f][k] = px / static_cast<double>(resolution);
      }
    }
  }
  UVAtlas atlas = atlas_from_corner_uvs(mesh, corner_uv, resolution, options, options.gutter_pixels);
  if (stats) {
    st.charts = atlas.num_charts;
    for (double d : face_distortion(mesh, atlas)) {
      st.max_distortion = std::max(st.max_distortion, d);
      if (d > options.max_distortion) ++st.distortion_outliers;
    }
    *stats = st;
  }
  return atlas;
}

void export_atlas_obj(const std::string& path, const TriangleMesh& mesh, const UVAtlas& atlas,
                      const std::string& mtl_file, const std::string& material) {
  std::ostringstream os;
  char buf[128];
  if (!mtl_file.empty()) os << "mtllib " << mtl_file << "\n";
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    os << buf;
  }
  std::vector<std::vector<int>> vt_index(mesh.num_vertices());
  int next = 1;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    for (const ChartUV& e : atlas.vertex_uv[v]) {
      std::snprintf(buf, sizeof(buf), "vt %.17g %.17g\n", e.uv.x(), e.uv.y());
      os << buf;
      vt_index[v].push_back(next++);
    }
  }
  if (!material.empty()) os << "usemtl " << material << "\n";
  for (int f = 0; f < mesh.num_faces(); ++f) {
    os << "f";
    for (int k = 0; k < 3; ++k) {
      const int v = mesh.faces[f][k];
      const auto& entries = atlas.vertex_uv[v];
      int slot = 0;
      while (entries[slot].chart != atlas.chart_id[f]) ++slot;
      os << ' ' << v + 1 << '/' << vt_index[v][slot];
    }
    os << '\n';
  }
  write_text_atomic(path, os.str());
}

UVAtlas import_atlas(const std::string& obj_path, int resolution, TriangleMesh* mesh_out) {
  const ObjData obj = read_obj(obj_path);
  if (obj.face_texcoords.size() != obj.mesh.faces.size() || obj.texcoords.empty()) {
    throw AtlasError(obj_path + ": OBJ has no per-corner texture coordinates");
  }
  std::vector<std::array<Vec2, 3>> corner_uv(obj.mesh.faces.size());
  for (std::size_t f = 0; f < corner_uv.size(); ++f) {
    for (int k = 0; k < 3; ++k) corner_uv[f][k] = obj.texcoords[obj.face_texcoords[f][k]];
  }
  UVAtlas atlas = atlas_from_corner_uvs(obj.mesh, corner_uv, resolution);
  if (mesh_out) *mesh_out = obj.mesh;
  return atlas;
}

SparseUVSamples splat_points_to_uv(const TriangleMesh& mesh, const UVAtlas& atlas, const PointCloud& cloud,
                                   ChannelKind kind, const FaceBvh* bvh) {
  if (kind == ChannelKind::RGB && !cloud.has_colors()) throw ParameterError("RGB splatting needs a colored cloud");
  if (atlas.corner_uv.size() != mesh.faces.size()) throw ParameterError("atlas was not built from this mesh");
  std::optional<FaceBvh> own;
  if (!bvh) {
    own.emplace(mesh);
    bvh = &*own;
  }
  SparseUVSamples out;
  out.height = out.width = atlas.resolution;
  out.kind = kind;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const SurfacePoint sp = bvh->closest(cloud.positions[i]);
    const auto& c = atlas.corner_uv[sp.face_id];
    const Vec2 uv = sp.barycentric[0] * c[0] + sp.barycentric[1] * c[1] + sp.barycentric[2] * c[2];
    const Vec2 site = uv_to_site(uv, atlas.resolution);
    if (!site_is_valid(atlas, site, atlas.chart_id[sp.face_id])) {
      ++out.dropped;
      continue;
    }
    out.sites.push_back(site);
    out.values.push_back(kind == ChannelKind::XYZ ? cloud.positions[i] : (*cloud.colors)[i]);
  }
  if (2 * out.dropped > static_cast<int>(cloud.size())) {
    throw AtlasError("atlas quality: " + std::to_string(out.dropped) + " of " + std::to_string(cloud.size()) +
                     " points fall outside the valid UV region");
  }
  return out;
}

namespace {

Vec3 bilinear_at(const DenseUVMap& map, const Vec2& site) {
  const int h = map.height(), w = map.width();
  const int r0 = std::min(static_cast<int>(site[0]), h - 1), c0 = std::min(static_cast<int>(site[1]), w - 1);
  const int r1 = std::min(r0 + 1, h - 1), c1 = std::min(c0 + 1, w - 1);
  const double wr = site[0] - r0, wc = site[1] - c0;
  return (1 - wr) * ((1 - wc) * map.at(r0, c0) + wc * map.at(r0, c1)) +
         wr * ((1 - wc) * map.at(r1, c0) + wc * map.at(r1, c1));
}

}  // namespace

VertexUpdate update_vertices_from_map(const TriangleMesh& mesh, const UVAtlas& atlas, const DenseUVMap& map) {
  if (map.kind != ChannelKind::XYZ) throw ParameterError("vertex update needs an XYZ map");
  if (map.height() != atlas.resolution || map.width() != atlas.resolution) {
    throw ParameterError("dense map size does not match the atlas");
  }
  VertexUpdate out;
  out.mesh = mesh;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    Vec3 sum = Vec3::Zero();
    int n = 0;
    for (const ChartUV& e : atlas.vertex_uv[v]) {
      const Vec2 site = uv_to_site(e.uv, atlas.resolution);
      if (!site_is_valid(atlas, site, e.chart)) continue;
      sum += bilinear_at(map, site);
      ++n;
    }
    if (n > 0) {
      out.mesh.vertices[v] = sum / n;
    } else {
      ++out.fallback_vertices;
    }
  }
  return out;
}

DenseUVMap rasterize_vertex_attribute(const TriangleMesh& mesh, const UVAtlas& atlas,
                                      const std::vector<Vec3>& attribute, ChannelKind kind) {
  DenseUVMap out;
  out.kind = kind;
  out.map = FeatureMap(atlas.resolution, atlas.resolution, 3);
  for (int r = 0; r < atlas.resolution; ++r) {
    for (int c = 0; c < atlas.resolution; ++c) {
      const int f = atlas.pixel_face[static_cast<std::size_t>(r) * atlas.resolution + c];
      if (f < 0) continue;
      const auto s = face_sites(atlas, f);
      const double area = cross2(s[1] - s[0], s[2] - s[0]);
      const Vec2 p(c, r);
      const double b1 = cross2(p - s[0], s[2] - s[0]) / area;
      const double b2 = cross2(s[1] - s[0], p - s[0]) / area;
      const double b0 = 1.0 - b1 - b2;
      const Face& t = mesh.faces[f];
      out.set(r, c, b0 * attribute[t[0]] + b1 * attribute[t[1]] + b2 * attribute[t[2]]);
    }
  }
  return out;
}

Image bake_texture(const UVAtlas& atlas, const DenseUVMap& map) {
  if (map.kind != ChannelKind::RGB) throw ParameterError("bake_texture needs an RGB map");
  const int n = atlas.resolution;
  if (map.height() != n || map.width() != n) throw ParameterError("dense map size does not match the atlas");
  Image img(n, n);
  std::vector<char> filled(static_cast<std::size_t>(n) * n, 0);
  std::deque<int> queue;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (!atlas.valid(r, c)) continue;
      const Vec3 v = map.at(r, c);
      for (int k = 0; k < 3; ++k) {
        img.pixel(r, c)[k] = static_cast<std::uint8_t>(std::lround(std::clamp(v[k], 0.0, 1.0) * 255.0));
      }
      filled[static_cast<std::size_t>(r) * n + c] = 1;
      queue.push_back(r * n + c);
    }
  }
  static const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
  while (!queue.empty()) {
    const int idx = queue.front();
    queue.pop_front();
    const int r = idx / n, c = idx % n;
    for (int k = 0; k < 4; ++k) {
      const int rr = r + dr[k], cc = c + dc[k];
      if (rr < 0 || rr >= n || cc < 0 || cc >= n || filled[static_cast<std::size_t>(rr) * n + cc]) continue;
      filled[static_cast<std::size_t>(rr) * n + cc] = 1;
      std::copy_n(img.pixel(r, c), 3, img.pixel(rr, cc));
      queue.push_back(rr * n + cc);
    }
  }
  return img;
}

namespace {

std::array<std::pair<double, double>, 3> value_ranges(const std::vector<Vec3>& values, ChannelKind kind) {
  std::array<std::pair<double, double>, 3> rng;
  for (int k = 0; k < 3; ++k) rng[k] = {0.0, 1.0};
  if (kind == ChannelKind::RGB || values.empty()) return rng;
  for (int k = 0; k < 3; ++k) {
    double lo = values[0][k], hi = values[0][k];
    for (const Vec3& v : values) {
      lo = std::min(lo, v[k]);
      hi = std::max(hi, v[k]);
    }
    rng[k] = {lo, hi > lo ? hi : lo + 1.0};
  }
  return rng;
}

void put(Image& img, int r, int c, const Vec3& v, const std::array<std::pair<double, double>, 3>& rng) {
  if (r < 0 || r >= img.height || c < 0 || c >= img.width) return;
  for (int k = 0; k < 3; ++k) {
    const double t = (v[k] - rng[k].first) / (rng[k].second - rng[k].first);
    img.pixel(r, c)[k] = static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
  }
}

}  // namespace

Image sparse_map_image(const SparseUVSamples& samples) {
  Image img(samples.width, samples.height);
  const auto rng = value_ranges(samples.values, samples.kind);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int r = static_cast<int>(samples.sites[i][0]), c = static_cast<int>(samples.sites[i][1]);
    for (int dr = 0; dr < 2; ++dr) {
      for (int dc = 0; dc < 2; ++dc) put(img, r + dr, c + dc, samples.values[i], rng);
    }
  }
  return img;
}

Image dense_map_image(const DenseUVMap& map) {
  Image img(map.width(), map.height());
  std::vector<Vec3> values;
  values.reserve(static_cast<std::size_t>(map.height()) * map.width());
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) values.push_back(map.at(r, c));
  }
  const auto rng = value_ranges(values, map.kind);
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) put(img, r, c, map.at(r, c), rng);
  }
  return img;
}

}  // namespace hsp
