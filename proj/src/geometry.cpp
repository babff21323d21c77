#include "imam/geometry.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include "imam/blas.hpp"

namespace imam {

Aggregation aggregation_from_name(const std::string& name) {
  if (name == "mean") return Aggregation::mean;
  if (name == "sum") return Aggregation::sum;
  throw ConfigError("unknown aggregation '" + name + "'");
}

const char* aggregation_name(Aggregation agg) {
  return agg == Aggregation::mean ? "mean" : "sum";
}

Mesh marching_cubes(const OccupancyGrid& grid, float threshold) {
  Mesh mesh;
  const int r = grid.res;
  if (r < 2) return mesh;

  const auto corner_id = [r](int i, int j, int k) -> u64 {
    return (u64(i) * r + j) * r + k;
  };

  std::unordered_map<u64, int> edge_vertex;
  const u64 n3 = u64(r) * r * r;

  const int di[8] = {0, 1, 1, 0, 0, 1, 1, 0};
  const int dj[8] = {0, 0, 1, 1, 0, 0, 1, 1};
  const int dk[8] = {0, 0, 0, 0, 1, 1, 1, 1};

  for (int i = 0; i + 1 < r; ++i) {
    for (int j = 0; j + 1 < r; ++j) {
      for (int k = 0; k + 1 < r; ++k) {
        float val[8];
        int cubeindex = 0;
        for (int c = 0; c < 8; ++c) {
          val[c] = grid.at(i + di[c], j + dj[c], k + dk[c]);
          if (val[c] > threshold) cubeindex |= 1 << c;
        }
        if (kMcEdgeTable[cubeindex] == 0) continue;

        int edge_to_vertex[12];
        for (int e = 0; e < 12; ++e) {
          if (!(kMcEdgeTable[cubeindex] & (1 << e))) continue;
          const int ca = kMcEdgeCorners[e][0], cb = kMcEdgeCorners[e][1];
          const u64 ida = corner_id(i + di[ca], j + dj[ca], k + dk[ca]);
          const u64 idb = corner_id(i + di[cb], j + dj[cb], k + dk[cb]);
          const u64 key = std::min(ida, idb) * n3 + std::max(ida, idb);
          auto it = edge_vertex.find(key);
          if (it == edge_vertex.end()) {
            const float t = (threshold - val[ca]) / (val[cb] - val[ca]);
            P3 pa = {cell_center(i + di[ca], r), cell_center(j + dj[ca], r),
                     cell_center(k + dk[ca], r)};
            P3 pb = {cell_center(i + di[cb], r), cell_center(j + dj[cb], r),
                     cell_center(k + dk[cb], r)};
            P3 p = {pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]),
                    pa[2] + t * (pb[2] - pa[2])};
            it = edge_vertex.emplace(key, int(mesh.vertices.size())).first;
            mesh.vertices.push_back(p);
          }
          edge_to_vertex[e] = it->second;
        }

        for (int t = 0; kMcTriTable[cubeindex][t] != -1; t += 3) {
          const int a = edge_to_vertex[kMcTriTable[cubeindex][t]];
          const int b = edge_to_vertex[kMcTriTable[cubeindex][t + 1]];
          const int c = edge_to_vertex[kMcTriTable[cubeindex][t + 2]];
          if (a == b || b == c || a == c) continue;
          mesh.tris.push_back({a, b, c});
        }
      }
    }
  }
  return mesh;
}

namespace {

// Nearest-neighbour squared distances from each point of a to b, summed in
// double precision. Uses a GEMM-based distance matrix for larger inputs.
void min_sq_dists(const PointCloud& a, const PointCloud& b, std::vector<double>& out) {
  const int na = a.size(), nb = b.size();
  out.assign(na, 0.0);
  if (size_t(na) * nb >= 1 << 16) {
    std::vector<float> am(size_t(na) * 3), bm(size_t(nb) * 3);
    std::vector<float> a2(na), b2(nb);
    for (int i = 0; i < na; ++i) {
      const auto& p = a.pts[i];
      am[i * 3] = p[0];
      am[i * 3 + 1] = p[1];
      am[i * 3 + 2] = p[2];
      a2[i] = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
    }
    for (int j = 0; j < nb; ++j) {
      const auto& p = b.pts[j];
      bm[j * 3] = p[0];
      bm[j * 3 + 1] = p[1];
      bm[j * 3 + 2] = p[2];
      b2[j] = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
    }
    // the float norm trick can miss the true minimum by ~1e-5 near ties, so
    // candidates within a slack of the approximate best are rescanned exactly
    const float slack = 1e-4f;
    const int chunk = 512;
    std::vector<float> dots(size_t(chunk) * nb);
    for (int i0 = 0; i0 < na; i0 += chunk) {
      const int m = std::min(chunk, na - i0);
      gemm<float>(false, true, m, nb, 3, am.data() + size_t(i0) * 3, bm.data(),
                  dots.data());
      for (int i = 0; i < m; ++i) {
        float best = std::numeric_limits<float>::max();
        const float* row = dots.data() + size_t(i) * nb;
        const float ai = a2[i0 + i];
        for (int j = 0; j < nb; ++j) {
          const float d = ai + b2[j] - 2.0f * row[j];
          if (d < best) best = d;
        }
        const auto& p = a.pts[i0 + i];
        double exact = std::numeric_limits<double>::max();
        for (int j = 0; j < nb; ++j) {
          if (ai + b2[j] - 2.0f * row[j] > best + slack) continue;
          const auto& q = b.pts[j];
          const double dx = double(p[0]) - q[0], dy = double(p[1]) - q[1],
                       dz = double(p[2]) - q[2];
          exact = std::min(exact, dx * dx + dy * dy + dz * dz);
        }
        out[i0 + i] = exact;
      }
    }
  } else {
    for (int i = 0; i < na; ++i) {
      const auto& p = a.pts[i];
      double best = std::numeric_limits<double>::max();
      for (int j = 0; j < nb; ++j) {
        const auto& q = b.pts[j];
        const double dx = double(p[0]) - q[0], dy = double(p[1]) - q[1],
                     dz = double(p[2]) - q[2];
        const double d = dx * dx + dy * dy + dz * dz;
        if (d < best) best = d;
      }
      out[i] = best;
    }
  }
}

}  // namespace

double chamfer_distance(const PointCloud& a, const PointCloud& b) {
  if (a.size() == 0 || b.size() == 0)
    throw Error("chamfer_distance: empty point cloud");
  std::vector<double> d;
  min_sq_dists(a, b, d);
  double sum_ab = 0;
  for (double x : d) sum_ab += x;
  min_sq_dists(b, a, d);
  double sum_ba = 0;
  for (double x : d) sum_ba += x;
  return sum_ab / a.size() + sum_ba / b.size();
}

double unidirectional_hausdorff(const PointCloud& from, const PointCloud& to) {
  if (from.size() == 0 || to.size() == 0)
    throw Error("unidirectional_hausdorff: empty point cloud");
  std::vector<double> d;
  min_sq_dists(from, to, d);
  double worst = 0;
  for (double x : d) worst = std::max(worst, x);
  return std::sqrt(worst);
}

PointCloud sample_mesh_points(const Mesh& mesh, int n, u64 seed) {
  if (mesh.empty()) throw Error("sample_mesh_points: empty mesh");
  std::vector<double> cum(mesh.tris.size());
  double total = 0;
  for (size_t t = 0; t < mesh.tris.size(); ++t) {
    const auto& tri = mesh.tris[t];
    const P3& a = mesh.vertices[tri[0]];
    const P3& b = mesh.vertices[tri[1]];
    const P3& c = mesh.vertices[tri[2]];
    const double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
    const double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
    const double cx = uy * vz - uz * vy, cy = uz * vx - ux * vz, cz = ux * vy - uy * vx;
    total += 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
    cum[t] = total;
  }
  if (total <= 0) throw Error("sample_mesh_points: zero-area mesh");

  Rng rng(hash_seed({seed, 0x9e5ull, u64(mesh.tris.size())}));
  PointCloud cloud;
  cloud.pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform(0, total);
    size_t t = std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
    t = std::min(t, mesh.tris.size() - 1);
    const auto& tri = mesh.tris[t];
    const P3& a = mesh.vertices[tri[0]];
    const P3& b = mesh.vertices[tri[1]];
    const P3& c = mesh.vertices[tri[2]];
    double r1 = rng.uniform(), r2 = rng.uniform();
    if (r1 + r2 > 1) {
      r1 = 1 - r1;
      r2 = 1 - r2;
    }
    cloud.pts.push_back({float(a[0] + r1 * (b[0] - a[0]) + r2 * (c[0] - a[0])),
                         float(a[1] + r1 * (b[1] - a[1]) + r2 * (c[1] - a[1])),
                         float(a[2] + r1 * (b[2] - a[2]) + r2 * (c[2] - a[2]))});
  }
  return cloud;
}

double voxel_iou(const OccupancyGrid& a, const OccupancyGrid& b, float threshold) {
  if (a.res != b.res) throw Error("voxel_iou: resolution mismatch");
  i64 inter = 0, uni = 0;
  for (size_t i = 0; i < a.v.size(); ++i) {
    const bool ia = a.v[i] > threshold;
    const bool ib = b.v[i] > threshold;
    inter += ia && ib;
    uni += ia || ib;
  }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

OccupancyGrid rasterize_shape(const AnalyticShape& shape, int res) {
  OccupancyGrid grid(res);
  std::vector<P3> pts = grid_positions(res);
  const auto occ = occupancy(shape, pts);
  for (size_t i = 0; i < occ.size(); ++i) grid.v[i] = float(occ[i]);
  return grid;
}

std::vector<P3> grid_positions(int res) {
  std::vector<P3> pts;
  pts.reserve(size_t(res) * res * res);
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < res; ++j)
      for (int k = 0; k < res; ++k)
        pts.push_back({cell_center(i, res), cell_center(j, res), cell_center(k, res)});
  return pts;
}

void write_obj(const std::string& path, const Mesh& mesh) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v[0], v[1], v[2]);
    f << buf;
  }
  for (const auto& t : mesh.tris) {
    std::snprintf(buf, sizeof(buf), "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
    f << buf;
  }
  if (!f) throw IoError("write failed: " + path);
}

Mesh read_obj(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  Mesh mesh;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      P3 p;
      ss >> p[0] >> p[1] >> p[2];
      if (!ss) throw FormatError(path + ": malformed vertex line: " + line);
      mesh.vertices.push_back(p);
    } else if (tag == "f") {
      std::array<int, 3> t;
      std::string tok;
      for (int i = 0; i < 3; ++i) {
        if (!(ss >> tok)) throw FormatError(path + ": malformed face line: " + line);
        t[i] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
        if (t[i] < 0 || t[i] >= int(mesh.vertices.size()))
          throw FormatError(path + ": face index out of range: " + line);
      }
      mesh.tris.push_back(t);
    }
  }
  return mesh;
}

}  // namespace imam
