#pragma once

#include "imam/conv.hpp"
#include "imam/geometry.hpp"

namespace imam {

enum class RepMode { vector, triplane, grid };

RepMode rep_mode_from_name(const std::string& name);
const char* rep_mode_name(RepMode mode);

// Point-feature planes are kept in a canonical order (xy, yz, xz); the
// flatten order decides how code maps become a sequence.
struct EncoderConfig {
  RepMode mode = RepMode::vector;
  int plane_res = 64;       // feature plane resolution H
  int down_res = 8;         // code map resolution H'
  int feat_dim = 32;        // per-point / per-plane channels c
  int trunk_dim = 128;      // bottleneck conv channels
  int code_dim = 4;         // channels entering the codebook
  Aggregation aggregation = Aggregation::mean;
  std::string flatten_order = "row_major";
  int grid_res = 16;
  int grid_down_res = 8;

  int code_positions() const {
    switch (mode) {
      case RepMode::vector: return down_res * down_res;
      case RepMode::triplane: return 3 * down_res * down_res;
      case RepMode::grid:
        return grid_down_res * grid_down_res * grid_down_res;
    }
    return 0;
  }

  void validate() const;
};

// Valid flatten orders per representation.
std::vector<std::string> flatten_orders_for(RepMode mode);

// Permutation from sequence position to canonical storage index.
std::vector<int> make_flatten_perm(const EncoderConfig& cfg);

template <class T>
Seq<T> apply_perm(const std::vector<T>& canonical, int dim, const std::vector<int>& perm) {
  Seq<T> out(int(perm.size()), dim);
  for (size_t p = 0; p < perm.size(); ++p)
    std::copy_n(canonical.data() + size_t(perm[p]) * dim, dim, out.row(int(p)));
  return out;
}

template <class T>
std::vector<T> invert_perm(const Seq<T>& seq, const std::vector<int>& perm) {
  std::vector<T> canonical(seq.v.size(), T(0));
  for (size_t p = 0; p < perm.size(); ++p)
    std::copy_n(seq.row(int(p)), seq.d, canonical.data() + size_t(perm[p]) * seq.d);
  return canonical;
}

// Shared point MLP with a local pooling stage: per-point features are
// scatter-averaged into cells, gathered back, concatenated with the
// per-point features and mixed by a final layer.
template <class T>
struct PointNetEncoder {
  int c = 0;
  int pool_res = 0;
  bool grid_pool = false;
  Linear<T> l1, l2, l3;

  struct Ctx {
    PlaneScatterCtx<T> pctx;
    VoxelScatterCtx<T> vctx;
    int n = 0;
  };
  std::vector<Ctx> ctx;

  PointNetEncoder() = default;
  PointNetEncoder(int c_, int pool_res_, bool grid_pool_)
      : c(c_), pool_res(pool_res_), grid_pool(grid_pool_) {
    l1 = Linear<T>(3, c, Act::relu);
    l2 = Linear<T>(c, c, Act::relu);
    l3 = Linear<T>(2 * c, c, Act::relu);
  }
  void init(Rng& rng) {
    l1.init(rng);
    l2.init(rng);
    l3.init(rng);
  }
  void reg(ParamStore<T>& s, const std::string& prefix) {
    l1.reg(s, prefix + ".l1");
    l2.reg(s, prefix + ".l2");
    l3.reg(s, prefix + ".l3");
  }

  Seq<T> fwd(const std::vector<P3>& pts, bool track = true) {
    const int n = int(pts.size());
    Seq<T> x(n, 3);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < 3; ++k) x.at(i, k) = T(pts[i][k]);
    Seq<T> h = l2.fwd(l1.fwd(x, track), track);

    Ctx c_;
    c_.n = n;
    Seq<T> pooled(n, c);
    if (grid_pool) {
      Grid3<T> vox;
      project_to_voxels(pts, h, pool_res, Aggregation::mean, vox, &c_.vctx);
      for (int i = 0; i < n; ++i) {
        const T* src = vox.v.data() + size_t(c_.vctx.cell[i]) * c;
        std::copy_n(src, c, pooled.row(i));
      }
    } else {
      TriPlane<T> tri;
      project_to_planes(pts, h, pool_res, Aggregation::mean, tri, &c_.pctx);
      for (int i = 0; i < n; ++i) {
        T* dst = pooled.row(i);
        for (int pl = 0; pl < 3; ++pl) {
          const T* src = tri.plane(pl).v.data() + size_t(c_.pctx.cell[pl][i]) * c;
          for (int k = 0; k < c; ++k) dst[k] += src[k];
        }
      }
    }

    Seq<T> g(n, 2 * c);
    for (int i = 0; i < n; ++i) {
      std::copy_n(h.row(i), c, g.row(i));
      std::copy_n(pooled.row(i), c, g.row(i) + c);
    }
    if (track) ctx.push_back(std::move(c_));
    return l3.fwd(g, track);
  }

  void bwd(const Seq<T>& dout) {
    Ctx c_ = std::move(ctx.back());
    ctx.pop_back();
    const int n = c_.n;
    Seq<T> dg = l3.bwd(dout);
    Seq<T> dh(n, c), dpool(n, c);
    for (int i = 0; i < n; ++i) {
      std::copy_n(dg.row(i), c, dh.row(i));
      std::copy_n(dg.row(i) + c, c, dpool.row(i));
    }
    if (grid_pool) {
      Grid3<T> dvox(pool_res, pool_res, pool_res, c);
      for (int i = 0; i < n; ++i) {
        T* dst = dvox.v.data() + size_t(c_.vctx.cell[i]) * c;
        const T* src = dpool.row(i);
        for (int k = 0; k < c; ++k) dst[k] += src[k];
      }
      project_to_voxels_backward(c_.vctx, dvox, dh);
    } else {
      TriPlane<T> dtri(pool_res, c);
      for (int pl = 0; pl < 3; ++pl) {
        auto& dplane = dtri.plane(pl);
        for (int i = 0; i < n; ++i) {
          T* dst = dplane.v.data() + size_t(c_.pctx.cell[pl][i]) * c;
          const T* src = dpool.row(i);
          for (int k = 0; k < c; ++k) dst[k] += src[k];
        }
      }
      project_to_planes_backward(c_.pctx, dtri, dh);
    }
    l1.bwd(l2.bwd(dh));
  }
};

// Strided downsampling stack: kernel-2 stride-2 convolutions doubling
// channels up to the trunk width, then a 1x1 mixing layer.
template <class T>
struct DownStack2d {
  std::vector<Conv2d<T>> stages;
  Conv2d<T> post;

  DownStack2d() = default;
  DownStack2d(int cin, int trunk, int n_stages) {
    int ch = cin;
    for (int i = 0; i < n_stages; ++i) {
      const int co = i == n_stages - 1 ? trunk : std::min(trunk, ch * 2);
      stages.emplace_back(ch, co, 2, 2, 0, Act::relu);
      ch = co;
    }
    post = Conv2d<T>(ch, trunk, 1, 1, 0, Act::relu);
  }
  void init(Rng& rng) {
    for (auto& s : stages) s.init(rng);
    post.init(rng);
  }
  void reg(ParamStore<T>& s, const std::string& prefix) {
    for (size_t i = 0; i < stages.size(); ++i)
      stages[i].reg(s, prefix + ".s" + std::to_string(i));
    post.reg(s, prefix + ".post");
  }
  Map2<T> fwd(Map2<T> x, bool track = true) {
    for (auto& s : stages) x = s.fwd(x, track);
    return post.fwd(x, track);
  }
  Map2<T> bwd(Map2<T> dy) {
    dy = post.bwd(std::move(dy));
    for (auto it = stages.rbegin(); it != stages.rend(); ++it) dy = it->bwd(std::move(dy));
    return dy;
  }
};

template <class T>
struct DownStack3d {
  std::vector<Conv3d<T>> stages;
  Conv3d<T> post;

  DownStack3d() = default;
  DownStack3d(int cin, int trunk, int n_stages) {
    int ch = cin;
    for (int i = 0; i < n_stages; ++i) {
      const int co = i == n_stages - 1 ? trunk : std::min(trunk, ch * 2);
      stages.emplace_back(ch, co, 2, 2, 0, Act::relu);
      ch = co;
    }
    post = Conv3d<T>(ch, trunk, 1, 1, 0, Act::relu);
  }
  void init(Rng& rng) {
    for (auto& s : stages) s.init(rng);
    post.init(rng);
  }
  void reg(ParamStore<T>& s, const std::string& prefix) {
    for (size_t i = 0; i < stages.size(); ++i)
      stages[i].reg(s, prefix + ".s" + std::to_string(i));
    post.reg(s, prefix + ".post");
  }
  Grid3<T> fwd(Grid3<T> x, bool track = true) {
    for (auto& s : stages) x = s.fwd(x, track);
    return post.fwd(x, track);
  }
  Grid3<T> bwd(Grid3<T> dy) {
    dy = post.bwd(std::move(dy));
    for (auto it = stages.rbegin(); it != stages.rend(); ++it) dy = it->bwd(std::move(dy));
    return dy;
  }
};

int log2_exact(int num, int den, const char* what);

// Stage-1 encoder: point features -> representation-specific code features.
// The triplane path shares one downsampling stack across all three planes.
template <class T>
struct Stage1Encoder {
  EncoderConfig cfg;
  PointNetEncoder<T> pn;
  Conv2d<T> couple1, couple2, couple3;
  DownStack2d<T> down;
  Conv2d<T> squeeze;
  Conv3d<T> gcouple;
  DownStack3d<T> gdown;
  Conv3d<T> gsqueeze;
  std::vector<int> perm;

  struct Ctx {
    PlaneScatterCtx<T> sctx;
    VoxelScatterCtx<T> vctx;
    int n = 0;
  };
  std::vector<Ctx> ctx;

  Stage1Encoder() = default;
  explicit Stage1Encoder(const EncoderConfig& cfg_) : cfg(cfg_) {
    cfg.validate();
    perm = make_flatten_perm(cfg);
    const int c = cfg.feat_dim;
    if (cfg.mode == RepMode::grid) {
      pn = PointNetEncoder<T>(c, cfg.grid_res, /*grid_pool=*/true);
      gcouple = Conv3d<T>(c, c, 3, 1, 1, Act::relu);
      gdown = DownStack3d<T>(c, cfg.trunk_dim,
                             log2_exact(cfg.grid_res, cfg.grid_down_res, "grid_res"));
      gsqueeze = Conv3d<T>(cfg.trunk_dim, cfg.code_dim, 1, 1, 0, Act::none);
    } else {
      pn = PointNetEncoder<T>(c, cfg.plane_res, /*grid_pool=*/false);
      if (cfg.mode == RepMode::vector) {
        couple1 = Conv2d<T>(3 * c, 3 * c, 3, 1, 1, Act::relu);
        couple2 = Conv2d<T>(3 * c, c, 3, 1, 1, Act::relu);
        couple3 = Conv2d<T>(c, c, 1, 1, 0, Act::relu);
      }
      down = DownStack2d<T>(c, cfg.trunk_dim,
                            log2_exact(cfg.plane_res, cfg.down_res, "plane_res"));
      squeeze = Conv2d<T>(cfg.trunk_dim, cfg.code_dim, 1, 1, 0, Act::none);
    }
  }

  void init(Rng& rng) {
    pn.init(rng);
    if (cfg.mode == RepMode::grid) {
      gcouple.init(rng);
      gdown.init(rng);
      gsqueeze.init(rng);
    } else {
      if (cfg.mode == RepMode::vector) {
        couple1.init(rng);
        couple2.init(rng);
        couple3.init(rng);
      }
      down.init(rng);
      squeeze.init(rng);
    }
  }

  void reg(ParamStore<T>& s, const std::string& prefix) {
    pn.reg(s, prefix + ".pn");
    if (cfg.mode == RepMode::grid) {
      gcouple.reg(s, prefix + ".couple");
      gdown.reg(s, prefix + ".down");
      gsqueeze.reg(s, prefix + ".squeeze");
    } else {
      if (cfg.mode == RepMode::vector) {
        couple1.reg(s, prefix + ".couple1");
        couple2.reg(s, prefix + ".couple2");
        couple3.reg(s, prefix + ".couple3");
      }
      down.reg(s, prefix + ".down");
      squeeze.reg(s, prefix + ".squeeze");
    }
  }

  // (m, code_dim) feature sequence in the configured flatten order.
  Seq<T> encode(const std::vector<P3>& pts, bool track = true) {
    Ctx c_;
    c_.n = int(pts.size());
    Seq<T> fpts = pn.fwd(pts, track);
    std::vector<T> canonical;

    if (cfg.mode == RepMode::grid) {
      Grid3<T> vox;
      project_to_voxels(pts, fpts, cfg.grid_res, cfg.aggregation, vox,
                        track ? &c_.vctx : nullptr);
      Grid3<T> s = gsqueeze.fwd(gdown.fwd(gcouple.fwd(vox, track), track), track);
      canonical = std::move(s.v);
    } else {
      TriPlane<T> tri;
      project_to_planes(pts, fpts, cfg.plane_res, cfg.aggregation, tri,
                        track ? &c_.sctx : nullptr);
      if (cfg.mode == RepMode::vector) {
        Map2<T> stacked = concat_channels(concat_channels(tri.xy, tri.yz), tri.xz);
        Map2<T> m3 = couple3.fwd(
            couple2.fwd(couple1.fwd(stacked, track), track), track);
        Map2<T> s = squeeze.fwd(down.fwd(std::move(m3), track), track);
        canonical = std::move(s.v);
      } else {
        canonical.resize(size_t(3) * cfg.down_res * cfg.down_res * cfg.code_dim);
        for (int pl = 0; pl < 3; ++pl) {
          Map2<T> s = squeeze.fwd(down.fwd(tri.plane(pl), track), track);
          std::copy(s.v.begin(), s.v.end(),
                    canonical.begin() + size_t(pl) * s.v.size());
        }
      }
    }
    if (track) ctx.push_back(std::move(c_));
    return apply_perm(canonical, cfg.code_dim, perm);
  }

  void backward(const Seq<T>& dcodes) {
    Ctx c_ = std::move(ctx.back());
    ctx.pop_back();
    const std::vector<T> dcanon = invert_perm(dcodes, perm);
    Seq<T> dfpts(c_.n, cfg.feat_dim);

    if (cfg.mode == RepMode::grid) {
      const int rp = cfg.grid_down_res;
      Grid3<T> ds(rp, rp, rp, cfg.code_dim);
      ds.v = dcanon;
      Grid3<T> dvox = gcouple.bwd(gdown.bwd(gsqueeze.bwd(std::move(ds))));
      project_to_voxels_backward(c_.vctx, dvox, dfpts);
    } else {
      const int hp = cfg.down_res;
      TriPlane<T> dtri(cfg.plane_res, cfg.feat_dim);
      if (cfg.mode == RepMode::vector) {
        Map2<T> ds(hp, hp, cfg.code_dim);
        ds.v = dcanon;
        Map2<T> dstacked =
            couple1.bwd(couple2.bwd(couple3.bwd(down.bwd(squeeze.bwd(std::move(ds))))));
        Map2<T> dxy(cfg.plane_res, cfg.plane_res, cfg.feat_dim);
        Map2<T> dyz(cfg.plane_res, cfg.plane_res, cfg.feat_dim);
        Map2<T> dxz(cfg.plane_res, cfg.plane_res, cfg.feat_dim);
        Map2<T> dxyyz(cfg.plane_res, cfg.plane_res, 2 * cfg.feat_dim);
        split_channels(dstacked, dxyyz, dxz);
        split_channels(dxyyz, dxy, dyz);
        dtri.xy = std::move(dxy);
        dtri.yz = std::move(dyz);
        dtri.xz = std::move(dxz);
      } else {
        const size_t plane_sz = size_t(hp) * hp * cfg.code_dim;
        // shared stacks: pop contexts in reverse plane order
        for (int pl = 2; pl >= 0; --pl) {
          Map2<T> ds(hp, hp, cfg.code_dim);
          std::copy_n(dcanon.begin() + size_t(pl) * plane_sz, plane_sz, ds.v.begin());
          dtri.plane(pl) = down.bwd(squeeze.bwd(std::move(ds)));
        }
      }
      project_to_planes_backward(c_.sctx, dtri, dfpts);
    }
    pn.bwd(dfpts);
  }
};

}  // namespace imam
