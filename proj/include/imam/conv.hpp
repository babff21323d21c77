#pragma once

#include "imam/nn.hpp"

namespace imam {

template <class T>
void im2col(const Map2<T>& x, int k, int stride, int pad, Seq<T>& cols) {
  const int ho = (x.h + 2 * pad - k) / stride + 1;
  const int wo = (x.w + 2 * pad - k) / stride + 1;
  cols = Seq<T>(ho * wo, k * k * x.c);
  for (int i = 0; i < ho; ++i) {
    for (int j = 0; j < wo; ++j) {
      T* dst = cols.row(i * wo + j);
      for (int ki = 0; ki < k; ++ki) {
        const int si = i * stride - pad + ki;
        for (int kj = 0; kj < k; ++kj) {
          const int sj = j * stride - pad + kj;
          if (si >= 0 && si < x.h && sj >= 0 && sj < x.w)
            std::copy_n(x.at(si, sj), x.c, dst);
          dst += x.c;
        }
      }
    }
  }
}

template <class T>
void col2im_add(const Seq<T>& cols, int k, int stride, int pad, Map2<T>& x) {
  const int ho = (x.h + 2 * pad - k) / stride + 1;
  const int wo = (x.w + 2 * pad - k) / stride + 1;
  for (int i = 0; i < ho; ++i) {
    for (int j = 0; j < wo; ++j) {
      const T* src = cols.row(i * wo + j);
      for (int ki = 0; ki < k; ++ki) {
        const int si = i * stride - pad + ki;
        for (int kj = 0; kj < k; ++kj) {
          const int sj = j * stride - pad + kj;
          if (si >= 0 && si < x.h && sj >= 0 && sj < x.w) {
            T* dst = x.at(si, sj);
            for (int c = 0; c < x.c; ++c) dst[c] += src[c];
          }
          src += x.c;
        }
      }
    }
  }
}

template <class T>
struct Conv2d {
  int cin = 0, cout = 0, k = 1, stride = 1, pad = 0;
  Act act = Act::none;
  Param<T> W, b;

  struct Ctx {
    int h = 0, w = 0;
    Seq<T> cols;
    std::vector<T> z;  // pre-activation, kept only when act != none
  };
  std::vector<Ctx> ctx;

  Conv2d() = default;
  Conv2d(int cin_, int cout_, int k_, int stride_, int pad_, Act act_ = Act::none)
      : cin(cin_), cout(cout_), k(k_), stride(stride_), pad(pad_), act(act_) {
    W.resize({k * k * cin, cout});
    b.resize({cout});
  }
  void init(Rng& rng) { glorot_init(W, k * k * cin, k * k * cout, rng); }
  void reg(ParamStore<T>& s, const std::string& prefix) {
    s.reg(W, prefix + ".W");
    s.reg(b, prefix + ".b");
  }

  Map2<T> fwd(const Map2<T>& x, bool track = true) {
    Ctx c;
    c.h = x.h;
    c.w = x.w;
    im2col(x, k, stride, pad, c.cols);
    const int ho = (x.h + 2 * pad - k) / stride + 1;
    const int wo = (x.w + 2 * pad - k) / stride + 1;
    Map2<T> y(ho, wo, cout);
    gemm<T>(false, false, ho * wo, cout, k * k * cin, c.cols.v.data(), W.w.data(),
            y.v.data());
    for (int p = 0; p < ho * wo; ++p) {
      T* row = y.v.data() + size_t(p) * cout;
      for (int j = 0; j < cout; ++j) row[j] += b.w[j];
    }
    if (act != Act::none) {
      c.z.assign(y.v.begin(), y.v.end());
      for (auto& v : y.v) v = act_forward(act, v);
    }
    if (track) ctx.push_back(std::move(c));
    return y;
  }

  Map2<T> bwd(Map2<T> dy) {
    Ctx c = std::move(ctx.back());
    ctx.pop_back();
    if (act != Act::none)
      for (size_t i = 0; i < dy.v.size(); ++i) dy.v[i] *= act_grad(act, c.z[i]);
    const int npos = dy.h * dy.w;
    gemm<T>(true, false, k * k * cin, cout, npos, c.cols.v.data(), dy.v.data(),
            W.g.data(), T(1));
    for (int p = 0; p < npos; ++p) {
      const T* row = dy.v.data() + size_t(p) * cout;
      for (int j = 0; j < cout; ++j) b.g[j] += row[j];
    }
    Seq<T> dcols(npos, k * k * cin);
    gemm<T>(false, true, npos, k * k * cin, cout, dy.v.data(), W.w.data(),
            dcols.v.data());
    Map2<T> dx(c.h, c.w, cin);
    col2im_add(dcols, k, stride, pad, dx);
    return dx;
  }
};

// 2x upsampling transpose convolution (kernel 2, stride 2).
template <class T>
struct ConvT2d {
  int cin = 0, cout = 0;
  Act act = Act::none;
  Param<T> W, b;  // W: (cin, 4 * cout), one column block per output subpixel

  struct Ctx {
    Map2<T> x;
    std::vector<T> z;
  };
  std::vector<Ctx> ctx;

  ConvT2d() = default;
  ConvT2d(int cin_, int cout_, Act act_ = Act::none) : cin(cin_), cout(cout_), act(act_) {
    W.resize({cin, 4 * cout});
    b.resize({cout});
  }
  void init(Rng& rng) { glorot_init(W, cin, 4 * cout, rng); }
  void reg(ParamStore<T>& s, const std::string& prefix) {
    s.reg(W, prefix + ".W");
    s.reg(b, prefix + ".b");
  }

  Map2<T> fwd(const Map2<T>& x, bool track = true) {
    Seq<T> y4(x.h * x.w, 4 * cout);
    gemm<T>(false, false, x.h * x.w, 4 * cout, cin, x.v.data(), W.w.data(), y4.v.data());
    Map2<T> y(2 * x.h, 2 * x.w, cout);
    for (int i = 0; i < x.h; ++i)
      for (int j = 0; j < x.w; ++j) {
        const T* src = y4.row(i * x.w + j);
        for (int di = 0; di < 2; ++di)
          for (int dj = 0; dj < 2; ++dj) {
            T* dst = y.at(2 * i + di, 2 * j + dj);
            const T* s = src + (di * 2 + dj) * cout;
            for (int c = 0; c < cout; ++c) dst[c] = s[c] + b.w[c];
          }
      }
    Ctx c;
    c.x = x;
    if (act != Act::none) {
      c.z.assign(y.v.begin(), y.v.end());
      for (auto& v : y.v) v = act_forward(act, v);
    }
    if (track) ctx.push_back(std::move(c));
    return y;
  }

  Map2<T> bwd(Map2<T> dy) {
    Ctx c = std::move(ctx.back());
    ctx.pop_back();
    if (act != Act::none)
      for (size_t i = 0; i < dy.v.size(); ++i) dy.v[i] *= act_grad(act, c.z[i]);
    const int h = c.x.h, w = c.x.w;
    Seq<T> dy4(h * w, 4 * cout);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        T* dst = dy4.row(i * w + j);
        for (int di = 0; di < 2; ++di)
          for (int dj = 0; dj < 2; ++dj) {
            const T* src = dy.at(2 * i + di, 2 * j + dj);
            T* d = dst + (di * 2 + dj) * cout;
            for (int cc = 0; cc < cout; ++cc) {
              d[cc] = src[cc];
              b.g[cc] += src[cc];
            }
          }
      }
    gemm<T>(true, false, cin, 4 * cout, h * w, c.x.v.data(), dy4.v.data(), W.g.data(),
            T(1));
    Map2<T> dx(h, w, cin);
    gemm<T>(false, true, h * w, cin, 4 * cout, dy4.v.data(), W.w.data(), dx.v.data());
    return dx;
  }
};

template <class T>
struct AvgPool2d {
  std::vector<std::pair<int, int>> ctx;

  Map2<T> fwd(const Map2<T>& x, bool track = true) {
    Map2<T> y(x.h / 2, x.w / 2, x.c);
    for (int i = 0; i < y.h; ++i)
      for (int j = 0; j < y.w; ++j) {
        T* dst = y.at(i, j);
        for (int di = 0; di < 2; ++di)
          for (int dj = 0; dj < 2; ++dj) {
            const T* src = x.at(2 * i + di, 2 * j + dj);
            for (int c = 0; c < x.c; ++c) dst[c] += T(0.25) * src[c];
          }
      }
    if (track) ctx.push_back({x.h, x.w});
    return y;
  }

  Map2<T> bwd(const Map2<T>& dy) {
    const auto [h, w] = ctx.back();
    ctx.pop_back();
    Map2<T> dx(h, w, dy.c);
    for (int i = 0; i < dy.h; ++i)
      for (int j = 0; j < dy.w; ++j) {
        const T* src = dy.at(i, j);
        for (int di = 0; di < 2; ++di)
          for (int dj = 0; dj < 2; ++dj) {
            T* dst = dx.at(2 * i + di, 2 * j + dj);
            for (int c = 0; c < dy.c; ++c) dst[c] = T(0.25) * src[c];
          }
      }
    return dx;
  }
};

template <class T>
Map2<T> concat_channels(const Map2<T>& a, const Map2<T>& b) {
  Map2<T> y(a.h, a.w, a.c + b.c);
  for (int i = 0; i < a.h; ++i)
    for (int j = 0; j < a.w; ++j) {
      std::copy_n(a.at(i, j), a.c, y.at(i, j));
      std::copy_n(b.at(i, j), b.c, y.at(i, j) + a.c);
    }
  return y;
}

template <class T>
void split_channels(const Map2<T>& y, Map2<T>& a, Map2<T>& b) {
  for (int i = 0; i < y.h; ++i)
    for (int j = 0; j < y.w; ++j) {
      std::copy_n(y.at(i, j), a.c, a.at(i, j));
      std::copy_n(y.at(i, j) + a.c, b.c, b.at(i, j));
    }
}

// Symmetric U-Net over a square map with constant channel width: per level a
// 3x3 conv and 2x2 average pool down, transpose conv up, skip concatenation
// merged by a 3x3 conv. Depth adapts to small inputs.
template <class T>
struct UNet2d {
  int channels = 0, depth = 0;
  Conv2d<T> conv_in, mid;
  std::vector<Conv2d<T>> enc;
  std::vector<ConvT2d<T>> up;
  std::vector<Conv2d<T>> merge;
  AvgPool2d<T> pool;

  std::vector<int> ctx;  // effective depth per forward

  UNet2d() = default;
  UNet2d(int channels_, int depth_) : channels(channels_), depth(depth_) {
    conv_in = Conv2d<T>(channels, channels, 3, 1, 1, Act::relu);
    mid = Conv2d<T>(channels, channels, 3, 1, 1, Act::relu);
    for (int d = 0; d < depth; ++d) {
      enc.emplace_back(channels, channels, 3, 1, 1, Act::relu);
      up.emplace_back(channels, channels, Act::relu);
      merge.emplace_back(2 * channels, channels, 3, 1, 1, Act::relu);
    }
  }
  void init(Rng& rng) {
    conv_in.init(rng);
    mid.init(rng);
    for (auto& l : enc) l.init(rng);
    for (auto& l : up) l.init(rng);
    for (auto& l : merge) l.init(rng);
  }
  void reg(ParamStore<T>& s, const std::string& prefix) {
    conv_in.reg(s, prefix + ".in");
    mid.reg(s, prefix + ".mid");
    for (int d = 0; d < depth; ++d) {
      enc[d].reg(s, prefix + ".enc" + std::to_string(d));
      up[d].reg(s, prefix + ".up" + std::to_string(d));
      merge[d].reg(s, prefix + ".merge" + std::to_string(d));
    }
  }

  int effective_depth(int h) const {
    int d = 0, r = h;
    while (d < depth && r % 2 == 0 && r >= 4) {
      r /= 2;
      ++d;
    }
    return d;
  }

  Map2<T> fwd(const Map2<T>& x, bool track = true) {
    const int d_eff = effective_depth(x.h);
    std::vector<Map2<T>> skips;
    Map2<T> cur = conv_in.fwd(x, track);
    for (int d = 0; d < d_eff; ++d) {
      skips.push_back(enc[d].fwd(cur, track));
      cur = pool.fwd(skips.back(), track);
    }
    cur = mid.fwd(cur, track);
    for (int d = d_eff - 1; d >= 0; --d) {
      cur = up[d].fwd(cur, track);
      cur = merge[d].fwd(concat_channels(cur, skips[d]), track);
    }
    if (track) ctx.push_back(d_eff);
    return cur;
  }

  Map2<T> bwd(Map2<T> dy) {
    const int d_eff = ctx.back();
    ctx.pop_back();
    std::vector<Map2<T>> dskips(d_eff);
    for (int d = 0; d < d_eff; ++d) {
      Map2<T> dcat = merge[d].bwd(std::move(dy));
      Map2<T> dup(dcat.h, dcat.w, channels);
      dskips[d] = Map2<T>(dcat.h, dcat.w, channels);
      split_channels(dcat, dup, dskips[d]);
      dy = up[d].bwd(std::move(dup));
    }
    dy = mid.bwd(std::move(dy));
    for (int d = d_eff - 1; d >= 0; --d) {
      Map2<T> ds = pool.bwd(dy);
      for (size_t i = 0; i < ds.v.size(); ++i) ds.v[i] += dskips[d].v[i];
      dy = enc[d].bwd(std::move(ds));
    }
    return conv_in.bwd(std::move(dy));
  }
};

template <class T>
void im2col3(const Grid3<T>& x, int k, int stride, int pad, Seq<T>& cols) {
  const int d_o = (x.d + 2 * pad - k) / stride + 1;
  const int ho = (x.h + 2 * pad - k) / stride + 1;
  const int wo = (x.w + 2 * pad - k) / stride + 1;
  cols = Seq<T>(d_o * ho * wo, k * k * k * x.c);
  for (int z = 0; z < d_o; ++z)
    for (int i = 0; i < ho; ++i)
      for (int j = 0; j < wo; ++j) {
        T* dst = cols.row((z * ho + i) * wo + j);
        for (int kz = 0; kz < k; ++kz) {
          const int sz = z * stride - pad + kz;
          for (int ki = 0; ki < k; ++ki) {
            const int si = i * stride - pad + ki;
            for (int kj = 0; kj < k; ++kj) {
              const int sj = j * stride - pad + kj;
              if (sz >= 0 && sz < x.d && si >= 0 && si < x.h && sj >= 0 && sj < x.w)
                std::copy_n(x.at(sz, si, sj), x.c, dst);
              dst += x.c;
            }
          }
        }
      }
}

template <class T>
void col2im3_add(const Seq<T>& cols, int k, int stride, int pad, Grid3<T>& x) {
  const int d_o = (x.d + 2 * pad - k) / stride + 1;
  const int ho = (x.h + 2 * pad - k) / stride + 1;
  const int wo = (x.w + 2 * pad - k) / stride + 1;
  for (int z = 0; z < d_o; ++z)
    for (int i = 0; i < ho; ++i)
      for (int j = 0; j < wo; ++j) {
        const T* src = cols.row((z * ho + i) * wo + j);
        for (int kz = 0; kz < k; ++kz) {
          const int sz = z * stride - pad + kz;
          for (int ki = 0; ki < k; ++ki) {
            const int si = i * stride - pad + ki;
            for (int kj = 0; kj < k; ++kj) {
              const int sj = j * stride - pad + kj;
              if (sz >= 0 && sz < x.d && si >= 0 && si < x.h && sj >= 0 && sj < x.w) {
                T* dst = x.at(sz, si, sj);
                for (int c = 0; c < x.c; ++c) dst[c] += src[c];
              }
              src += x.c;
            }
          }
        }
      }
}

template <class T>
struct Conv3d {
  int cin = 0, cout = 0, k = 1, stride = 1, pad = 0;
  Act act = Act::none;
  Param<T> W, b;

  struct Ctx {
    int d = 0, h = 0, w = 0;
    Seq<T> cols;
    std::vector<T> z;
  };
  std::vector<Ctx> ctx;

  Conv3d() = default;
  Conv3d(int cin_, int cout_, int k_, int stride_, int pad_, Act act_ = Act::none)
      : cin(cin_), cout(cout_), k(k_), stride(stride_), pad(pad_), act(act_) {
    W.resize({k * k * k * cin, cout});
    b.resize({cout});
  }
  void init(Rng& rng) { glorot_init(W, k * k * k * cin, k * k * k * cout, rng); }
  void reg(ParamStore<T>& s, const std::string& prefix) {
    s.reg(W, prefix + ".W");
    s.reg(b, prefix + ".b");
  }

  Grid3<T> fwd(const Grid3<T>& x, bool track = true) {
    Ctx c;
    c.d = x.d;
    c.h = x.h;
    c.w = x.w;
    im2col3(x, k, stride, pad, c.cols);
    const int d_o = (x.d + 2 * pad - k) / stride + 1;
    const int ho = (x.h + 2 * pad - k) / stride + 1;
    const int wo = (x.w + 2 * pad - k) / stride + 1;
    Grid3<T> y(d_o, ho, wo, cout);
    const int npos = d_o * ho * wo;
    gemm<T>(false, false, npos, cout, k * k * k * cin, c.cols.v.data(), W.w.data(),
            y.v.data());
    for (int p = 0; p < npos; ++p) {
      T* row = y.v.data() + size_t(p) * cout;
      for (int j = 0; j < cout; ++j) row[j] += b.w[j];
    }
    if (act != Act::none) {
      c.z.assign(y.v.begin(), y.v.end());
      for (auto& v : y.v) v = act_forward(act, v);
    }
    if (track) ctx.push_back(std::move(c));
    return y;
  }

  Grid3<T> bwd(Grid3<T> dy) {
    Ctx c = std::move(ctx.back());
    ctx.pop_back();
    if (act != Act::none)
      for (size_t i = 0; i < dy.v.size(); ++i) dy.v[i] *= act_grad(act, c.z[i]);
    const int npos = dy.d * dy.h * dy.w;
    gemm<T>(true, false, k * k * k * cin, cout, npos, c.cols.v.data(), dy.v.data(),
            W.g.data(), T(1));
    for (int p = 0; p < npos; ++p) {
      const T* row = dy.v.data() + size_t(p) * cout;
      for (int j = 0; j < cout; ++j) b.g[j] += row[j];
    }
    Seq<T> dcols(npos, k * k * k * cin);
    gemm<T>(false, true, npos, k * k * k * cin, cout, dy.v.data(), W.w.data(),
            dcols.v.data());
    Grid3<T> dx(c.d, c.h, c.w, cin);
    col2im3_add(dcols, k, stride, pad, dx);
    return dx;
  }
};

// 2x upsampling transpose convolution in 3D (kernel 2, stride 2).
template <class T>
struct ConvT3d {
  int cin = 0, cout = 0;
  Act act = Act::none;
  Param<T> W, b;  // W: (cin, 8 * cout)

  struct Ctx {
    Grid3<T> x;
    std::vector<T> z;
  };
  std::vector<Ctx> ctx;

  ConvT3d() = default;
  ConvT3d(int cin_, int cout_, Act act_ = Act::none) : cin(cin_), cout(cout_), act(act_) {
    W.resize({cin, 8 * cout});
    b.resize({cout});
  }
  void init(Rng& rng) { glorot_init(W, cin, 8 * cout, rng); }
  void reg(ParamStore<T>& s, const std::string& prefix) {
    s.reg(W, prefix + ".W");
    s.reg(b, prefix + ".b");
  }

  Grid3<T> fwd(const Grid3<T>& x, bool track = true) {
    const int npos = x.d * x.h * x.w;
    Seq<T> y8(npos, 8 * cout);
    gemm<T>(false, false, npos, 8 * cout, cin, x.v.data(), W.w.data(), y8.v.data());
    Grid3<T> y(2 * x.d, 2 * x.h, 2 * x.w, cout);
    for (int z = 0; z < x.d; ++z)
      for (int i = 0; i < x.h; ++i)
        for (int j = 0; j < x.w; ++j) {
          const T* src = y8.row((z * x.h + i) * x.w + j);
          for (int dz = 0; dz < 2; ++dz)
            for (int di = 0; di < 2; ++di)
              for (int dj = 0; dj < 2; ++dj) {
                T* dst = y.at(2 * z + dz, 2 * i + di, 2 * j + dj);
                const T* s = src + ((dz * 2 + di) * 2 + dj) * cout;
                for (int c = 0; c < cout; ++c) dst[c] = s[c] + b.w[c];
              }
        }
    Ctx c;
    c.x = x;
    if (act != Act::none) {
      c.z.assign(y.v.begin(), y.v.end());
      for (auto& v : y.v) v = act_forward(act, v);
    }
    if (track) ctx.push_back(std::move(c));
    return y;
  }

  Grid3<T> bwd(Grid3<T> dy) {
    Ctx c = std::move(ctx.back());
    ctx.pop_back();
    if (act != Act::none)
      for (size_t i = 0; i < dy.v.size(); ++i) dy.v[i] *= act_grad(act, c.z[i]);
    const int d = c.x.d, h = c.x.h, w = c.x.w;
    const int npos = d * h * w;
    Seq<T> dy8(npos, 8 * cout);
    for (int z = 0; z < d; ++z)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
          T* dst = dy8.row((z * h + i) * w + j);
          for (int dz = 0; dz < 2; ++dz)
            for (int di = 0; di < 2; ++di)
              for (int dj = 0; dj < 2; ++dj) {
                const T* src = dy.at(2 * z + dz, 2 * i + di, 2 * j + dj);
                T* dd = dst + ((dz * 2 + di) * 2 + dj) * cout;
                for (int cc = 0; cc < cout; ++cc) {
                  dd[cc] = src[cc];
                  b.g[cc] += src[cc];
                }
              }
        }
    gemm<T>(true, false, cin, 8 * cout, npos, c.x.v.data(), dy8.v.data(), W.g.data(),
            T(1));
    Grid3<T> dx(d, h, w, cin);
    gemm<T>(false, true, npos, cin, 8 * cout, dy8.v.data(), W.w.data(), dx.v.data());
    return dx;
  }
};

}  // namespace imam
