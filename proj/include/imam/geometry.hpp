#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "imam/common.hpp"
#include "imam/synthdata.hpp"
#include "imam/tensor.hpp"

namespace imam {

enum class Aggregation { mean, sum };

Aggregation aggregation_from_name(const std::string& name);
const char* aggregation_name(Aggregation agg);

// World coordinates live in [-1,1]. Grid/plane cells are addressed by their
// centers: cell i of a resolution-r axis covers [-1 + 2i/r, -1 + 2(i+1)/r).
inline int cell_of(float u, int res) {
  const int i = int(std::floor((u + 1.0f) * 0.5f * res));
  return std::clamp(i, 0, res - 1);
}

inline float cell_center(int i, int res) { return -1.0f + (i + 0.5f) * 2.0f / res; }

// Axis pairs for the three canonical planes: 0 -> (x,y), 1 -> (y,z), 2 -> (x,z).
inline constexpr int kPlaneAxes[3][2] = {{0, 1}, {1, 2}, {0, 2}};

template <class T>
struct PlaneScatterCtx {
  int res = 0;
  Aggregation agg = Aggregation::mean;
  std::array<std::vector<int>, 3> cell;        // per plane, per point, h*w index
  std::array<std::vector<float>, 3> cell_scale;  // per plane, per cell
};

// Scatters per-point features into three axis-aligned planes. Points landing
// in the same cell are averaged (or summed); empty cells stay zero.
template <class T>
void project_to_planes(const std::vector<P3>& pts, const Seq<T>& feats, int res,
                       Aggregation agg, TriPlane<T>& out, PlaneScatterCtx<T>* ctx) {
  const int n = int(pts.size());
  const int c = feats.d;
  out = TriPlane<T>(res, c);
  if (ctx) {
    ctx->res = res;
    ctx->agg = agg;
  }
  for (int pl = 0; pl < 3; ++pl) {
    auto& plane = out.plane(pl);
    std::vector<float> count(size_t(res) * res, 0.0f);
    std::vector<int> cells(n);
    for (int i = 0; i < n; ++i) {
      const int a = cell_of(pts[i][kPlaneAxes[pl][0]], res);
      const int b = cell_of(pts[i][kPlaneAxes[pl][1]], res);
      const int cellidx = a * res + b;
      cells[i] = cellidx;
      count[cellidx] += 1.0f;
      T* dst = plane.v.data() + size_t(cellidx) * c;
      const T* src = feats.row(i);
      for (int k = 0; k < c; ++k) dst[k] += src[k];
    }
    std::vector<float> scale(size_t(res) * res, 0.0f);
    for (size_t ci = 0; ci < scale.size(); ++ci) {
      if (count[ci] > 0)
        scale[ci] = agg == Aggregation::mean ? 1.0f / count[ci] : 1.0f;
    }
    if (agg == Aggregation::mean) {
      for (size_t ci = 0; ci < scale.size(); ++ci) {
        if (count[ci] > 1) {
          T* dst = plane.v.data() + ci * c;
          for (int k = 0; k < c; ++k) dst[k] *= T(scale[ci]);
        }
      }
    }
    if (ctx) {
      ctx->cell[pl] = std::move(cells);
      ctx->cell_scale[pl] = std::move(scale);
    }
  }
}

template <class T>
void project_to_planes_backward(const PlaneScatterCtx<T>& ctx, const TriPlane<T>& dout,
                                Seq<T>& dfeats) {
  const int c = dout.xy.c;
  for (int pl = 0; pl < 3; ++pl) {
    const auto& dplane = dout.plane(pl);
    const auto& cells = ctx.cell[pl];
    const auto& scale = ctx.cell_scale[pl];
    for (int i = 0; i < int(cells.size()); ++i) {
      const int cellidx = cells[i];
      const T s = T(scale[cellidx]);
      const T* src = dplane.v.data() + size_t(cellidx) * c;
      T* dst = dfeats.row(i);
      for (int k = 0; k < c; ++k) dst[k] += s * src[k];
    }
  }
}

struct BilinearTaps {
  int idx[4];
  float w[4];
};

inline BilinearTaps bilinear_taps(float u, float v, int res) {
  const float gu = (u + 1.0f) * 0.5f * res - 0.5f;
  const float gv = (v + 1.0f) * 0.5f * res - 0.5f;
  const int iu = int(std::floor(gu));
  const int iv = int(std::floor(gv));
  const float fu = gu - iu;
  const float fv = gv - iv;
  const int u0 = std::clamp(iu, 0, res - 1), u1 = std::clamp(iu + 1, 0, res - 1);
  const int v0 = std::clamp(iv, 0, res - 1), v1 = std::clamp(iv + 1, 0, res - 1);
  BilinearTaps t;
  t.idx[0] = u0 * res + v0;
  t.idx[1] = u0 * res + v1;
  t.idx[2] = u1 * res + v0;
  t.idx[3] = u1 * res + v1;
  t.w[0] = (1 - fu) * (1 - fv);
  t.w[1] = (1 - fu) * fv;
  t.w[2] = fu * (1 - fv);
  t.w[3] = fu * fv;
  return t;
}

// Bilinear sample of one plane at normalized (u, v); adds into out.
template <class T>
void bilinear_query(const Map2<T>& plane, float u, float v, T* out) {
  const auto t = bilinear_taps(u, v, plane.h);
  for (int s = 0; s < 4; ++s) {
    const T* src = plane.v.data() + size_t(t.idx[s]) * plane.c;
    const T w = T(t.w[s]);
    for (int k = 0; k < plane.c; ++k) out[k] += w * src[k];
  }
}

// Query feature of a point = sum of its three bilinear plane samples.
template <class T>
void query_triplane(const TriPlane<T>& tri, const std::vector<P3>& pts, Seq<T>& out) {
  const int c = tri.xy.c;
  out = Seq<T>(int(pts.size()), c);
  for (int i = 0; i < int(pts.size()); ++i) {
    T* dst = out.row(i);
    for (int pl = 0; pl < 3; ++pl)
      bilinear_query(tri.plane(pl), pts[i][kPlaneAxes[pl][0]], pts[i][kPlaneAxes[pl][1]],
                     dst);
  }
}

template <class T>
void query_triplane_backward(const std::vector<P3>& pts, const Seq<T>& dout,
                             TriPlane<T>& dtri) {
  const int c = dout.d;
  for (int i = 0; i < int(pts.size()); ++i) {
    const T* g = dout.row(i);
    for (int pl = 0; pl < 3; ++pl) {
      auto& dplane = dtri.plane(pl);
      const auto t = bilinear_taps(pts[i][kPlaneAxes[pl][0]], pts[i][kPlaneAxes[pl][1]],
                                   dplane.h);
      for (int s = 0; s < 4; ++s) {
        T* dst = dplane.v.data() + size_t(t.idx[s]) * c;
        const T w = T(t.w[s]);
        for (int k = 0; k < c; ++k) dst[k] += w * g[k];
      }
    }
  }
}

template <class T>
struct VoxelScatterCtx {
  int res = 0;
  Aggregation agg = Aggregation::mean;
  std::vector<int> cell;
  std::vector<float> cell_scale;
};

template <class T>
void project_to_voxels(const std::vector<P3>& pts, const Seq<T>& feats, int res,
                       Aggregation agg, Grid3<T>& out, VoxelScatterCtx<T>* ctx) {
  const int n = int(pts.size());
  const int c = feats.d;
  out = Grid3<T>(res, res, res, c);
  std::vector<float> count(size_t(res) * res * res, 0.0f);
  std::vector<int> cells(n);
  for (int i = 0; i < n; ++i) {
    const int a = cell_of(pts[i][0], res);
    const int b = cell_of(pts[i][1], res);
    const int d = cell_of(pts[i][2], res);
    const int cellidx = (a * res + b) * res + d;
    cells[i] = cellidx;
    count[cellidx] += 1.0f;
    T* dst = out.v.data() + size_t(cellidx) * c;
    const T* src = feats.row(i);
    for (int k = 0; k < c; ++k) dst[k] += src[k];
  }
  std::vector<float> scale(count.size(), 0.0f);
  for (size_t ci = 0; ci < count.size(); ++ci)
    if (count[ci] > 0) scale[ci] = agg == Aggregation::mean ? 1.0f / count[ci] : 1.0f;
  if (agg == Aggregation::mean) {
    for (size_t ci = 0; ci < count.size(); ++ci) {
      if (count[ci] > 1) {
        T* dst = out.v.data() + ci * c;
        for (int k = 0; k < c; ++k) dst[k] *= T(scale[ci]);
      }
    }
  }
  if (ctx) {
    ctx->res = res;
    ctx->agg = agg;
    ctx->cell = std::move(cells);
    ctx->cell_scale = std::move(scale);
  }
}

template <class T>
void project_to_voxels_backward(const VoxelScatterCtx<T>& ctx, const Grid3<T>& dout,
                                Seq<T>& dfeats) {
  const int c = dout.c;
  for (int i = 0; i < int(ctx.cell.size()); ++i) {
    const int cellidx = ctx.cell[i];
    const T s = T(ctx.cell_scale[cellidx]);
    const T* src = dout.v.data() + size_t(cellidx) * c;
    T* dst = dfeats.row(i);
    for (int k = 0; k < c; ++k) dst[k] += s * src[k];
  }
}

struct TrilinearTaps {
  int idx[8];
  float w[8];
};

inline TrilinearTaps trilinear_taps(const P3& p, int res) {
  float g[3];
  int i0[3], i1[3];
  float f[3];
  for (int a = 0; a < 3; ++a) {
    g[a] = (p[a] + 1.0f) * 0.5f * res - 0.5f;
    const int i = int(std::floor(g[a]));
    f[a] = g[a] - i;
    i0[a] = std::clamp(i, 0, res - 1);
    i1[a] = std::clamp(i + 1, 0, res - 1);
  }
  TrilinearTaps t;
  int s = 0;
  for (int dx = 0; dx < 2; ++dx)
    for (int dy = 0; dy < 2; ++dy)
      for (int dz = 0; dz < 2; ++dz, ++s) {
        const int ix = dx ? i1[0] : i0[0];
        const int iy = dy ? i1[1] : i0[1];
        const int iz = dz ? i1[2] : i0[2];
        t.idx[s] = (ix * res + iy) * res + iz;
        t.w[s] = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
      }
  return t;
}

template <class T>
void query_voxels(const Grid3<T>& grid, const std::vector<P3>& pts, Seq<T>& out) {
  const int c = grid.c;
  out = Seq<T>(int(pts.size()), c);
  for (int i = 0; i < int(pts.size()); ++i) {
    const auto t = trilinear_taps(pts[i], grid.d);
    T* dst = out.row(i);
    for (int s = 0; s < 8; ++s) {
      const T* src = grid.v.data() + size_t(t.idx[s]) * c;
      const T w = T(t.w[s]);
      for (int k = 0; k < c; ++k) dst[k] += w * src[k];
    }
  }
}

template <class T>
void query_voxels_backward(const std::vector<P3>& pts, const Seq<T>& dout,
                           Grid3<T>& dgrid) {
  const int c = dout.d;
  for (int i = 0; i < int(pts.size()); ++i) {
    const auto t = trilinear_taps(pts[i], dgrid.d);
    const T* g = dout.row(i);
    for (int s = 0; s < 8; ++s) {
      T* dst = dgrid.v.data() + size_t(t.idx[s]) * c;
      const T w = T(t.w[s]);
      for (int k = 0; k < c; ++k) dst[k] += w * g[k];
    }
  }
}

// Scalar field sampled at the cell centers of a res^3 grid.
struct OccupancyGrid {
  int res = 0;
  std::vector<float> v;

  OccupancyGrid() = default;
  explicit OccupancyGrid(int r) : res(r), v(size_t(r) * r * r, 0.0f) {}
  float& at(int i, int j, int k) { return v[(size_t(i) * res + j) * res + k]; }
  float at(int i, int j, int k) const { return v[(size_t(i) * res + j) * res + k]; }
};

struct Mesh {
  std::vector<P3> vertices;
  std::vector<std::array<int, 3>> tris;

  bool empty() const { return tris.empty(); }
};

extern const int kMcEdgeTable[256];
extern const int kMcTriTable[256][16];
extern const int kMcEdgeCorners[12][2];

// Extracts the level set {field = threshold}, treating values strictly above
// the threshold as inside. Returns an empty mesh if the field never crosses.
Mesh marching_cubes(const OccupancyGrid& grid, float threshold);

// Symmetric mean of squared nearest-neighbour distances.
double chamfer_distance(const PointCloud& a, const PointCloud& b);

// max over `from` of the Euclidean distance to the closest point of `to`.
double unidirectional_hausdorff(const PointCloud& from, const PointCloud& to);

PointCloud sample_mesh_points(const Mesh& mesh, int n, u64 seed);

// Intersection-over-union of the cells above the threshold; 1 if both empty.
double voxel_iou(const OccupancyGrid& a, const OccupancyGrid& b, float threshold);

OccupancyGrid rasterize_shape(const AnalyticShape& shape, int res);

std::vector<P3> grid_positions(int res);

void write_obj(const std::string& path, const Mesh& mesh);
Mesh read_obj(const std::string& path);

}  // namespace imam
