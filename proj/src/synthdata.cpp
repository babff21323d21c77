#include "imam/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <variant>

namespace imam {

namespace {

struct BoxPart {
  double cx, cy, cz;  // center
  double hx, hy, hz;  // half extents
};

struct CylPart {
  double r, zlo, zhi;  // axis-aligned with z, centered on the z axis
};

struct SpherePart {
  double r;
};

using Part = std::variant<BoxPart, CylPart, SpherePart>;

bool inside(const BoxPart& b, double x, double y, double z, bool strict) {
  const double dx = std::abs(x - b.cx), dy = std::abs(y - b.cy), dz = std::abs(z - b.cz);
  if (strict) return dx < b.hx && dy < b.hy && dz < b.hz;
  return dx <= b.hx && dy <= b.hy && dz <= b.hz;
}

bool inside(const CylPart& c, double x, double y, double z, bool strict) {
  const double rr = x * x + y * y;
  if (strict) return rr < c.r * c.r && z > c.zlo && z < c.zhi;
  return rr <= c.r * c.r && z >= c.zlo && z <= c.zhi;
}

bool inside(const SpherePart& s, double x, double y, double z, bool strict) {
  const double rr = x * x + y * y + z * z;
  return strict ? rr < s.r * s.r : rr <= s.r * s.r;
}

bool part_contains(const Part& part, double x, double y, double z, bool strict) {
  return std::visit([&](const auto& p) { return inside(p, x, y, z, strict); }, part);
}

// Legs and backs are embedded into their neighbour by this much so that
// contact faces lie strictly inside the union and get rejected by the
// surface sampler.
constexpr double kEmbed = 0.02;

std::vector<Part> make_parts(const AnalyticShape& s) {
  const auto& q = s.params;
  std::vector<Part> parts;
  switch (s.class_id) {
    case 0: {  // box: [hx, hy, hz]
      parts.push_back(BoxPart{0, 0, 0, q[0], q[1], q[2]});
      break;
    }
    case 1: {  // cylinder: [r, hz]
      parts.push_back(CylPart{q[0], -q[1], q[1]});
      break;
    }
    case 2: {  // sphere: [r]
      parts.push_back(SpherePart{q[0]});
      break;
    }
    case 3: {  // table: [sx, sy, st, top_z, leg_w, leg_zlo]
      const double sx = q[0], sy = q[1], st = q[2], top_z = q[3];
      const double leg_w = q[4], leg_zlo = q[5];
      const double slab_lo = top_z - st;
      parts.push_back(BoxPart{0, 0, (top_z + slab_lo) / 2, sx, sy, st / 2});
      const double leg_top = slab_lo + kEmbed;
      for (int ix : {-1, 1})
        for (int iy : {-1, 1}) {
          const double lx = ix * (sx - leg_w), ly = iy * (sy - leg_w);
          parts.push_back(BoxPart{lx, ly, (leg_top + leg_zlo) / 2, leg_w, leg_w,
                                  (leg_top - leg_zlo) / 2});
        }
      break;
    }
    case 4: {  // chair: [s, st, seat_z, leg_w, leg_zlo, back_h, back_t]
      const double sz = q[0], st = q[1], seat_z = q[2], leg_w = q[3];
      const double leg_zlo = q[4], back_h = q[5], back_t = q[6];
      const double seat_lo = seat_z - st;
      parts.push_back(BoxPart{0, 0, (seat_z + seat_lo) / 2, sz, sz, st / 2});
      const double back_top = std::min(seat_z + back_h, 0.88);
      const double back_lo = seat_z - kEmbed;
      parts.push_back(BoxPart{0, sz - back_t / 2, (back_top + back_lo) / 2, sz,
                              back_t / 2, (back_top - back_lo) / 2});
      const double leg_top = seat_lo + kEmbed;
      for (int ix : {-1, 1})
        for (int iy : {-1, 1}) {
          const double lx = ix * (sz - leg_w), ly = iy * (sz - leg_w);
          parts.push_back(BoxPart{lx, ly, (leg_top + leg_zlo) / 2, leg_w, leg_w,
                                  (leg_top - leg_zlo) / 2});
        }
      break;
    }
    default:
      throw Error("unknown shape class id " + std::to_string(s.class_id));
  }
  return parts;
}

struct Face {
  int part = 0;
  int face = 0;  // box: 0..5 (-x,+x,-y,+y,-z,+z); cyl: 0 side, 1 bottom, 2 top
  double area = 0;
};

std::vector<Face> make_faces(const std::vector<Part>& parts) {
  std::vector<Face> faces;
  for (int pi = 0; pi < int(parts.size()); ++pi) {
    if (const auto* b = std::get_if<BoxPart>(&parts[pi])) {
      const double ax = 4 * b->hy * b->hz, ay = 4 * b->hx * b->hz, az = 4 * b->hx * b->hy;
      faces.push_back({pi, 0, ax});
      faces.push_back({pi, 1, ax});
      faces.push_back({pi, 2, ay});
      faces.push_back({pi, 3, ay});
      faces.push_back({pi, 4, az});
      faces.push_back({pi, 5, az});
    } else if (const auto* c = std::get_if<CylPart>(&parts[pi])) {
      faces.push_back({pi, 0, 2 * M_PI * c->r * (c->zhi - c->zlo)});
      faces.push_back({pi, 1, M_PI * c->r * c->r});
      faces.push_back({pi, 2, M_PI * c->r * c->r});
    } else if (const auto* s = std::get_if<SpherePart>(&parts[pi])) {
      faces.push_back({pi, 0, 4 * M_PI * s->r * s->r});
    }
  }
  return faces;
}

P3 sample_on_face(const Part& part, int face, Rng& rng) {
  if (const auto* b = std::get_if<BoxPart>(&part)) {
    const double u = rng.uniform(-1, 1), v = rng.uniform(-1, 1);
    double x = 0, y = 0, z = 0;
    switch (face) {
      case 0: x = -b->hx; y = u * b->hy; z = v * b->hz; break;
      case 1: x = b->hx; y = u * b->hy; z = v * b->hz; break;
      case 2: y = -b->hy; x = u * b->hx; z = v * b->hz; break;
      case 3: y = b->hy; x = u * b->hx; z = v * b->hz; break;
      case 4: z = -b->hz; x = u * b->hx; y = v * b->hy; break;
      default: z = b->hz; x = u * b->hx; y = v * b->hy; break;
    }
    return {float(b->cx + x), float(b->cy + y), float(b->cz + z)};
  }
  if (const auto* c = std::get_if<CylPart>(&part)) {
    if (face == 0) {
      const double a = rng.uniform(0, 2 * M_PI);
      const double z = rng.uniform(c->zlo, c->zhi);
      return {float(c->r * std::cos(a)), float(c->r * std::sin(a)), float(z)};
    }
    const double a = rng.uniform(0, 2 * M_PI);
    const double r = c->r * std::sqrt(rng.uniform());
    const double z = face == 1 ? c->zlo : c->zhi;
    return {float(r * std::cos(a)), float(r * std::sin(a)), float(z)};
  }
  const auto& s = std::get<SpherePart>(part);
  double x, y, z, n2;
  do {
    x = rng.normal();
    y = rng.normal();
    z = rng.normal();
    n2 = x * x + y * y + z * z;
  } while (n2 < 1e-12);
  const double inv = s.r / std::sqrt(n2);
  return {float(x * inv), float(y * inv), float(z * inv)};
}

}  // namespace

const char* class_name(int class_id) {
  switch (class_id) {
    case 0: return "box";
    case 1: return "cylinder";
    case 2: return "sphere";
    case 3: return "table";
    case 4: return "chair";
    default: throw Error("unknown shape class id " + std::to_string(class_id));
  }
}

int class_id_from_name(const std::string& name) {
  for (int c = 0; c < kNumClasses; ++c)
    if (name == class_name(c)) return c;
  throw Error("unknown shape class name '" + name + "'");
}

AnalyticShape make_shape(int class_id, u64 seed) {
  Rng rng(hash_seed({u64(class_id) + 1, seed}));
  AnalyticShape s;
  s.class_id = class_id;
  s.seed = seed;
  switch (class_id) {
    case 0:
      s.params = {rng.uniform(0.25, 0.8), rng.uniform(0.25, 0.8), rng.uniform(0.25, 0.8)};
      break;
    case 1:
      s.params = {rng.uniform(0.2, 0.7), rng.uniform(0.3, 0.8)};
      break;
    case 2:
      s.params = {rng.uniform(0.3, 0.8)};
      break;
    case 3:
      s.params = {rng.uniform(0.45, 0.8),  rng.uniform(0.45, 0.8),
                  rng.uniform(0.06, 0.14), rng.uniform(0.25, 0.6),
                  rng.uniform(0.05, 0.1),  rng.uniform(-0.7, -0.3)};
      break;
    case 4:
      s.params = {rng.uniform(0.35, 0.6),   rng.uniform(0.05, 0.12),
                  rng.uniform(-0.2, 0.1),   rng.uniform(0.05, 0.09),
                  rng.uniform(-0.75, -0.45), rng.uniform(0.35, 0.7),
                  rng.uniform(0.05, 0.1)};
      break;
    default:
      throw Error("unknown shape class id " + std::to_string(class_id));
  }
  return s;
}

bool occupied(const AnalyticShape& shape, const P3& p) {
  const auto parts = make_parts(shape);
  for (const auto& part : parts)
    if (part_contains(part, p[0], p[1], p[2], /*strict=*/false)) return true;
  return false;
}

std::vector<u8> occupancy(const AnalyticShape& shape, const std::vector<P3>& pts) {
  const auto parts = make_parts(shape);
  std::vector<u8> out(pts.size(), 0);
  for (size_t i = 0; i < pts.size(); ++i) {
    for (const auto& part : parts) {
      if (part_contains(part, pts[i][0], pts[i][1], pts[i][2], /*strict=*/false)) {
        out[i] = 1;
        break;
      }
    }
  }
  return out;
}

PointCloud sample_surface_points(const AnalyticShape& shape, int n, u64 seed) {
  const auto parts = make_parts(shape);
  const auto faces = make_faces(parts);
  std::vector<double> cum(faces.size());
  double total = 0;
  for (size_t i = 0; i < faces.size(); ++i) {
    total += faces[i].area;
    cum[i] = total;
  }

  Rng rng(hash_seed({shape.seed, u64(shape.class_id), 0xf5a3u, seed}));
  PointCloud cloud;
  cloud.pts.reserve(n);
  while (cloud.size() < n) {
    const double u = rng.uniform(0, total);
    const size_t fi =
        std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
    const auto& face = faces[std::min(fi, faces.size() - 1)];
    const P3 p = sample_on_face(parts[face.part], face.face, rng);
    bool interior = false;
    for (int pi = 0; pi < int(parts.size()); ++pi) {
      if (pi == face.part) continue;
      if (part_contains(parts[pi], p[0], p[1], p[2], /*strict=*/true)) {
        interior = true;
        break;
      }
    }
    if (!interior) cloud.pts.push_back(p);
  }
  return cloud;
}

OccupancySample sample_training_points(const AnalyticShape& shape, int n_uniform,
                                       int n_near, u64 seed, double sigma) {
  Rng rng(hash_seed({shape.seed, u64(shape.class_id), 0x7e11u, seed}));
  OccupancySample out;
  out.positions.reserve(n_uniform + n_near);
  for (int i = 0; i < n_uniform; ++i)
    out.positions.push_back({float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)),
                             float(rng.uniform(-1, 1))});
  if (n_near > 0) {
    const PointCloud surf =
        sample_surface_points(shape, n_near, hash_seed({seed, 0x5fu}));
    for (const auto& p : surf.pts) {
      P3 q;
      for (int k = 0; k < 3; ++k) {
        const double x = p[k] + sigma * rng.normal();
        q[k] = float(std::clamp(x, -1.0, 1.0));
      }
      out.positions.push_back(q);
    }
  }
  out.labels = occupancy(shape, out.positions);
  return out;
}

PointCloud make_partial_viewpoint(const PointCloud& cloud, double fraction, u64 seed) {
  if (cloud.size() == 0) return cloud;
  Rng rng(hash_seed({seed, 0x11efu}));
  double vx, vy, vz, n2;
  do {
    vx = rng.normal();
    vy = rng.normal();
    vz = rng.normal();
    n2 = vx * vx + vy * vy + vz * vz;
  } while (n2 < 1e-12);
  const double inv = 1.5 / std::sqrt(n2);
  vx *= inv;
  vy *= inv;
  vz *= inv;

  const int n = cloud.size();
  const int drop = std::min(n, int(std::ceil(fraction * n)));
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::vector<double> dist(n);
  for (int i = 0; i < n; ++i) {
    const auto& p = cloud.pts[i];
    const double dx = p[0] - vx, dy = p[1] - vy, dz = p[2] - vz;
    dist[i] = dx * dx + dy * dy + dz * dz;
  }
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return dist[a] != dist[b] ? dist[a] < dist[b] : a < b; });

  PointCloud kept;
  kept.pts.reserve(n - drop);
  for (int i = 0; i < n - drop; ++i) kept.pts.push_back(cloud.pts[order[i]]);
  return resample_to(kept, n, hash_seed({seed, 0x22afu}));
}

PointCloud make_partial_bottom(const PointCloud& cloud, u64 seed) {
  if (cloud.size() == 0) return cloud;
  float zmin = cloud.pts[0][2], zmax = cloud.pts[0][2];
  for (const auto& p : cloud.pts) {
    zmin = std::min(zmin, p[2]);
    zmax = std::max(zmax, p[2]);
  }
  const float zmid = 0.5f * (zmin + zmax);
  PointCloud kept;
  for (const auto& p : cloud.pts)
    if (p[2] <= zmid) kept.pts.push_back(p);
  return resample_to(kept, cloud.size(), hash_seed({seed, 0x33bfu}));
}

PointCloud resample_to(const PointCloud& cloud, int n, u64 seed) {
  const int m = cloud.size();
  if (m == n) return cloud;
  if (m == 0) throw Error("resample_to: empty cloud");
  Rng rng(hash_seed({seed, u64(m), u64(n)}));
  PointCloud out;
  out.pts.reserve(n);
  if (m > n) {
    std::vector<int> idx(m);
    for (int i = 0; i < m; ++i) idx[i] = i;
    rng.shuffle(idx);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    for (int i : idx) out.pts.push_back(cloud.pts[i]);
  } else {
    out.pts = cloud.pts;
    for (int i = m; i < n; ++i) out.pts.push_back(cloud.pts[rng.uniform_int(m)]);
  }
  return out;
}

}  // namespace imam
