#pragma once

#include "imam/encoder.hpp"

namespace imam {

template <class T>
struct UpStack2d {
  std::vector<ConvT2d<T>> stages;

  UpStack2d() = default;
  UpStack2d(int trunk, int cout, int n_stages) {
    int ch = trunk;
    for (int i = 0; i < n_stages; ++i) {
      const int co = i == n_stages - 1 ? cout : std::max(cout, ch / 2);
      stages.emplace_back(ch, co, Act::relu);
      ch = co;
    }
  }
  void init(Rng& rng) {
    for (auto& s : stages) s.init(rng);
  }
  void reg(ParamStore<T>& s, const std::string& prefix) {
    for (size_t i = 0; i < stages.size(); ++i)
      stages[i].reg(s, prefix + ".s" + std::to_string(i));
  }
  Map2<T> fwd(Map2<T> x, bool track = true) {
    for (auto& s : stages) x = s.fwd(x, track);
    return x;
  }
  Map2<T> bwd(Map2<T> dy) {
    for (auto it = stages.rbegin(); it != stages.rend(); ++it) dy = it->bwd(std::move(dy));
    return dy;
  }
};

template <class T>
struct UpStack3d {
  std::vector<ConvT3d<T>> stages;

  UpStack3d() = default;
  UpStack3d(int trunk, int cout, int n_stages) {
    int ch = trunk;
    for (int i = 0; i < n_stages; ++i) {
      const int co = i == n_stages - 1 ? cout : std::max(cout, ch / 2);
      stages.emplace_back(ch, co, Act::relu);
      ch = co;
    }
  }
  void init(Rng& rng) {
    for (auto& s : stages) s.init(rng);
  }
  void reg(ParamStore<T>& s, const std::string& prefix) {
    for (size_t i = 0; i < stages.size(); ++i)
      stages[i].reg(s, prefix + ".s" + std::to_string(i));
  }
  Grid3<T> fwd(Grid3<T> x, bool track = true) {
    for (auto& s : stages) x = s.fwd(x, track);
    return x;
  }
  Grid3<T> bwd(Grid3<T> dy) {
    for (auto it = stages.rbegin(); it != stages.rend(); ++it) dy = it->bwd(std::move(dy));
    return dy;
  }
};

// Occupancy head: fully-connected residual blocks over the queried feature.
template <class T>
struct ImplicitNet {
  int in = 0, width = 0, n_blocks = 0;
  Linear<T> fc_in, head;
  std::vector<Linear<T>> fa, fb;

  ImplicitNet() = default;
  ImplicitNet(int in_, int width_, int n_blocks_)
      : in(in_), width(width_), n_blocks(n_blocks_) {
    fc_in = Linear<T>(in, width, Act::relu);
    head = Linear<T>(width, 1, Act::none);
    for (int b = 0; b < n_blocks; ++b) {
      fa.emplace_back(width, width, Act::relu);
      fb.emplace_back(width, width, Act::none);
    }
  }
  void init(Rng& rng) {
    fc_in.init(rng);
    head.init(rng);
    for (auto& l : fa) l.init(rng);
    for (auto& l : fb) l.init(rng);
  }
  void reg(ParamStore<T>& s, const std::string& prefix) {
    fc_in.reg(s, prefix + ".in");
    for (int b = 0; b < n_blocks; ++b) {
      fa[b].reg(s, prefix + ".b" + std::to_string(b) + "a");
      fb[b].reg(s, prefix + ".b" + std::to_string(b) + "b");
    }
    head.reg(s, prefix + ".head");
  }

  Seq<T> fwd(const Seq<T>& feats, bool track = true) {
    Seq<T> h = fc_in.fwd(feats, track);
    for (int b = 0; b < n_blocks; ++b) {
      Seq<T> u = fb[b].fwd(fa[b].fwd(h, track), track);
      for (size_t i = 0; i < h.v.size(); ++i) h.v[i] += u.v[i];
    }
    return head.fwd(h, track);
  }

  Seq<T> bwd(const Seq<T>& dlogits) {
    Seq<T> dh = head.bwd(dlogits);
    for (int b = n_blocks - 1; b >= 0; --b) {
      Seq<T> dt = fa[b].bwd(fb[b].bwd(dh));
      for (size_t i = 0; i < dh.v.size(); ++i) dh.v[i] += dt.v[i];
    }
    return fc_in.bwd(dh);
  }
};

// Decoded spatial feature field; one of the two members is populated
// depending on the representation mode.
template <class T>
struct DecodedField {
  TriPlane<T> tri;
  Grid3<T> grid;
  bool is_grid = false;
};

// Stage-1 decoder: code sequence -> feature field -> occupancy logits.
template <class T>
struct Stage1Decoder {
  EncoderConfig cfg;
  int unet1_depth = 2;
  int unet2_depth = 1;
  Conv2d<T> unsqueeze;
  UNet2d<T> unet1;
  UpStack2d<T> up;
  Conv2d<T> dec1, dec2, dec3;  // vector mode: single map back to three planes
  UNet2d<T> unet2;
  Conv3d<T> gunsqueeze;
  UpStack3d<T> gup;
  Conv3d<T> gpost;
  ImplicitNet<T> implicit;
  std::vector<int> perm;

  Stage1Decoder() = default;
  Stage1Decoder(const EncoderConfig& cfg_, int unet1_depth_, int unet2_depth_,
                int implicit_width, int implicit_blocks)
      : cfg(cfg_), unet1_depth(unet1_depth_), unet2_depth(unet2_depth_) {
    perm = make_flatten_perm(cfg);
    const int c = cfg.feat_dim;
    if (cfg.mode == RepMode::grid) {
      gunsqueeze = Conv3d<T>(cfg.code_dim, cfg.trunk_dim, 1, 1, 0, Act::relu);
      gup = UpStack3d<T>(cfg.trunk_dim, c,
                         log2_exact(cfg.grid_res, cfg.grid_down_res, "grid_res"));
      gpost = Conv3d<T>(c, c, 3, 1, 1, Act::relu);
    } else {
      unsqueeze = Conv2d<T>(cfg.code_dim, cfg.trunk_dim, 1, 1, 0, Act::relu);
      unet1 = UNet2d<T>(cfg.trunk_dim, unet1_depth);
      up = UpStack2d<T>(cfg.trunk_dim, c,
                        log2_exact(cfg.plane_res, cfg.down_res, "plane_res"));
      if (cfg.mode == RepMode::vector) {
        dec1 = Conv2d<T>(c, c, 3, 1, 1, Act::relu);
        dec2 = Conv2d<T>(c, 3 * c, 3, 1, 1, Act::relu);
        dec3 = Conv2d<T>(3 * c, 3 * c, 1, 1, 0, Act::relu);
      }
      unet2 = UNet2d<T>(c, unet2_depth);
    }
    implicit = ImplicitNet<T>(cfg.feat_dim, implicit_width, implicit_blocks);
  }

  void init(Rng& rng) {
    if (cfg.mode == RepMode::grid) {
      gunsqueeze.init(rng);
      gup.init(rng);
      gpost.init(rng);
    } else {
      unsqueeze.init(rng);
      unet1.init(rng);
      up.init(rng);
      if (cfg.mode == RepMode::vector) {
        dec1.init(rng);
        dec2.init(rng);
        dec3.init(rng);
      }
      unet2.init(rng);
    }
    implicit.init(rng);
  }

  void reg(ParamStore<T>& s, const std::string& prefix) {
    if (cfg.mode == RepMode::grid) {
      gunsqueeze.reg(s, prefix + ".unsqueeze");
      gup.reg(s, prefix + ".up");
      gpost.reg(s, prefix + ".post");
    } else {
      unsqueeze.reg(s, prefix + ".unsqueeze");
      unet1.reg(s, prefix + ".unet1");
      up.reg(s, prefix + ".up");
      if (cfg.mode == RepMode::vector) {
        dec1.reg(s, prefix + ".dec1");
        dec2.reg(s, prefix + ".dec2");
        dec3.reg(s, prefix + ".dec3");
      }
      unet2.reg(s, prefix + ".unet2");
    }
    implicit.reg(s, prefix + ".implicit");
  }

  DecodedField<T> decode(const Seq<T>& codes, bool track = true) {
    if (codes.n != cfg.code_positions() || codes.d != cfg.code_dim)
      throw Error("decode: code sequence shape mismatch");
    const std::vector<T> canonical = invert_perm(codes, perm);
    DecodedField<T> out;
    const int c = cfg.feat_dim;

    if (cfg.mode == RepMode::grid) {
      out.is_grid = true;
      const int rp = cfg.grid_down_res;
      Grid3<T> x(rp, rp, rp, cfg.code_dim);
      x.v = canonical;
      out.grid = gpost.fwd(gup.fwd(gunsqueeze.fwd(std::move(x), track), track), track);
    } else if (cfg.mode == RepMode::vector) {
      const int hp = cfg.down_res;
      Map2<T> x(hp, hp, cfg.code_dim);
      x.v = canonical;
      Map2<T> full = up.fwd(unet1.fwd(unsqueeze.fwd(std::move(x), track), track), track);
      Map2<T> planes3 = dec3.fwd(dec2.fwd(dec1.fwd(std::move(full), track), track), track);
      const int h = cfg.plane_res;
      Map2<T> xy(h, h, c), yz(h, h, c), xz(h, h, c), xyyz(h, h, 2 * c);
      split_channels(planes3, xyyz, xz);
      split_channels(xyyz, xy, yz);
      out.tri.xy = unet2.fwd(xy, track);
      out.tri.yz = unet2.fwd(yz, track);
      out.tri.xz = unet2.fwd(xz, track);
    } else {
      const int hp = cfg.down_res;
      const size_t plane_sz = size_t(hp) * hp * cfg.code_dim;
      out.tri = TriPlane<T>(cfg.plane_res, c);
      for (int pl = 0; pl < 3; ++pl) {
        Map2<T> x(hp, hp, cfg.code_dim);
        std::copy_n(canonical.begin() + size_t(pl) * plane_sz, plane_sz, x.v.begin());
        Map2<T> f = up.fwd(unet1.fwd(unsqueeze.fwd(std::move(x), track), track), track);
        out.tri.plane(pl) = unet2.fwd(std::move(f), track);
      }
    }
    return out;
  }

  Seq<T> decode_backward(DecodedField<T> dfield) {
    std::vector<T> dcanon;
    if (cfg.mode == RepMode::grid) {
      Grid3<T> dx = gunsqueeze.bwd(gup.bwd(gpost.bwd(std::move(dfield.grid))));
      dcanon = std::move(dx.v);
    } else if (cfg.mode == RepMode::vector) {
      const int h = cfg.plane_res;
      const int c = cfg.feat_dim;
      // unet2 was applied xy, yz, xz; pop in reverse
      Map2<T> dxz = unet2.bwd(std::move(dfield.tri.xz));
      Map2<T> dyz = unet2.bwd(std::move(dfield.tri.yz));
      Map2<T> dxy = unet2.bwd(std::move(dfield.tri.xy));
      Map2<T> dplanes3(h, h, 3 * c);
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < h; ++j) {
          std::copy_n(dxy.at(i, j), c, dplanes3.at(i, j));
          std::copy_n(dyz.at(i, j), c, dplanes3.at(i, j) + c);
          std::copy_n(dxz.at(i, j), c, dplanes3.at(i, j) + 2 * c);
        }
      Map2<T> dfull = dec1.bwd(dec2.bwd(dec3.bwd(std::move(dplanes3))));
      Map2<T> dx = unsqueeze.bwd(unet1.bwd(up.bwd(std::move(dfull))));
      dcanon = std::move(dx.v);
    } else {
      const int hp = cfg.down_res;
      const size_t plane_sz = size_t(hp) * hp * cfg.code_dim;
      dcanon.resize(3 * plane_sz);
      for (int pl = 2; pl >= 0; --pl) {
        Map2<T> df = unet2.bwd(std::move(dfield.tri.plane(pl)));
        Map2<T> dx = unsqueeze.bwd(unet1.bwd(up.bwd(std::move(df))));
        std::copy(dx.v.begin(), dx.v.end(), dcanon.begin() + size_t(pl) * plane_sz);
      }
    }
    return apply_perm(dcanon, cfg.code_dim, perm);
  }

  Seq<T> field_logits(const DecodedField<T>& field, const std::vector<P3>& pts,
                      bool track = true) {
    Seq<T> feats;
    if (field.is_grid)
      query_voxels(field.grid, pts, feats);
    else
      query_triplane(field.tri, pts, feats);
    return implicit.fwd(feats, track);
  }

  void field_logits_backward(const Seq<T>& dlogits, const std::vector<P3>& pts,
                             DecodedField<T>& dfield) {
    Seq<T> dfeats = implicit.bwd(dlogits);
    if (dfield.is_grid)
      query_voxels_backward(pts, dfeats, dfield.grid);
    else
      query_triplane_backward(pts, dfeats, dfield.tri);
  }
};

// Binary cross entropy over clamped sigmoid probabilities, averaged over
// query points. Returns the loss; fills dlogits with d(mean loss)/dlogit.
template <class T>
double occupancy_loss(const Seq<T>& logits, const std::vector<u8>& labels,
                      Seq<T>* dlogits = nullptr) {
  const int n = logits.n;
  if (int(labels.size()) != n) throw Error("occupancy_loss: label count mismatch");
  if (dlogits) *dlogits = Seq<T>(n, 1);
  constexpr double eps = 1e-7;
  double loss = 0;
  for (int i = 0; i < n; ++i) {
    const double l = double(logits.at(i, 0));
    const double p_raw = 1.0 / (1.0 + std::exp(-l));
    const double p = std::clamp(p_raw, eps, 1.0 - eps);
    const double y = labels[i] ? 1.0 : 0.0;
    loss += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    if (dlogits) {
      const bool clamped = p_raw < eps || p_raw > 1.0 - eps;
      dlogits->at(i, 0) = clamped ? T(0) : T((p_raw - y) / n);
    }
  }
  return loss / n;
}

template <class T>
std::vector<float> occupancy_probs(const Seq<T>& logits) {
  constexpr double eps = 1e-7;
  std::vector<float> out(logits.n);
  for (int i = 0; i < logits.n; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-double(logits.at(i, 0))));
    out[i] = float(std::clamp(p, eps, 1.0 - eps));
  }
  return out;
}

}  // namespace imam
