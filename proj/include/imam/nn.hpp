#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "imam/blas.hpp"
#include "imam/common.hpp"
#include "imam/tensor.hpp"

namespace imam {

template <class T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> w, g, m, v;  // value, gradient, Adam first/second moment

  void resize(std::vector<int> s) {
    shape = std::move(s);
    i64 n = 1;
    for (int d : shape) n *= d;
    w.assign(n, T(0));
    g.assign(n, T(0));
    m.assign(n, T(0));
    v.assign(n, T(0));
  }
  i64 count() const { return i64(w.size()); }
};

template <class T>
struct ParamStore {
  std::vector<Param<T>*> params;

  void reg(Param<T>& p, const std::string& name) {
    p.name = name;
    params.push_back(&p);
  }
  i64 total_count() const {
    i64 n = 0;
    for (const auto* p : params) n += p->count();
    return n;
  }
  void zero_grad() {
    for (auto* p : params) std::fill(p->g.begin(), p->g.end(), T(0));
  }
  void scale_grad(T s) {
    for (auto* p : params)
      for (auto& g : p->g) g *= s;
  }
  Param<T>* find(const std::string& name) const {
    for (auto* p : params)
      if (p->name == name) return p;
    return nullptr;
  }
};

// Adam with bias correction; moments live in the params so checkpoints can
// resume bit-for-bit.
template <class T>
struct Adam {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  i64 t = 0;

  void step(ParamStore<T>& store) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, double(t));
    const double bc2 = 1.0 - std::pow(beta2, double(t));
    for (auto* p : store.params) {
      for (size_t i = 0; i < p->w.size(); ++i) {
        const double g = double(p->g[i]);
        const double m = beta1 * double(p->m[i]) + (1 - beta1) * g;
        const double v = beta2 * double(p->v[i]) + (1 - beta2) * g * g;
        p->m[i] = T(m);
        p->v[i] = T(v);
        p->w[i] -= T(lr * (m / bc1) / (std::sqrt(v / bc2) + eps));
      }
    }
  }
};

enum class Act { none, relu, gelu };

template <class T>
T act_forward(Act act, T z) {
  switch (act) {
    case Act::relu: return z > T(0) ? z : T(0);
    case Act::gelu: return T(0.5) * z * (T(1) + T(std::erf(double(z) * M_SQRT1_2)));
    default: return z;
  }
}

template <class T>
T act_grad(Act act, T z) {
  switch (act) {
    case Act::relu: return z > T(0) ? T(1) : T(0);
    case Act::gelu: {
      const double x = double(z);
      const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
      const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
      return T(cdf + x * pdf);
    }
    default: return T(1);
  }
}

template <class T>
void glorot_init(Param<T>& p, int fan_in, int fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& w : p.w) w = T(rng.uniform(-limit, limit));
}

template <class T>
void normal_init(Param<T>& p, double stddev, Rng& rng) {
  for (auto& w : p.w) w = T(rng.normal(0, stddev));
}

// Fully connected layer with optional fused activation. Forward pushes a
// context frame, backward pops it, so one instance may appear several times
// in a computation graph (weight sharing).
template <class T>
struct Linear {
  int in = 0, out = 0;
  Act act = Act::none;
  Param<T> W, b;

  struct Ctx {
    Seq<T> x;
    Seq<T> z;  // pre-activation, kept only when act != none
  };
  std::vector<Ctx> ctx;

  Linear() = default;
  Linear(int in_, int out_, Act act_ = Act::none) : in(in_), out(out_), act(act_) {
    W.resize({in, out});
    b.resize({out});
  }
  void init(Rng& rng) { glorot_init(W, in, out, rng); }
  void reg(ParamStore<T>& s, const std::string& prefix) {
    s.reg(W, prefix + ".W");
    s.reg(b, prefix + ".b");
  }

  Seq<T> fwd(const Seq<T>& x, bool track = true) {
    Seq<T> y(x.n, out);
    if (x.n > 0) gemm<T>(false, false, x.n, out, in, x.v.data(), W.w.data(), y.v.data());
    for (int i = 0; i < x.n; ++i) {
      T* row = y.row(i);
      for (int j = 0; j < out; ++j) row[j] += b.w[j];
    }
    Seq<T> z;
    if (act != Act::none) {
      z = y;
      for (auto& v : y.v) v = act_forward(act, v);
    }
    if (track) ctx.push_back({x, std::move(z)});
    return y;
  }

  Seq<T> bwd(Seq<T> dy) {
    Ctx c = std::move(ctx.back());
    ctx.pop_back();
    if (act != Act::none) {
      for (size_t i = 0; i < dy.v.size(); ++i) dy.v[i] *= act_grad(act, c.z.v[i]);
    }
    if (dy.n > 0) {
      gemm<T>(true, false, in, out, dy.n, c.x.v.data(), dy.v.data(), W.g.data(), T(1));
      for (int i = 0; i < dy.n; ++i) {
        const T* row = dy.row(i);
        for (int j = 0; j < out; ++j) b.g[j] += row[j];
      }
    }
    Seq<T> dx(dy.n, in);
    if (dy.n > 0)
      gemm<T>(false, true, dy.n, in, out, dy.v.data(), W.w.data(), dx.v.data());
    return dx;
  }
};

template <class T>
struct LayerNorm {
  int dim = 0;
  Param<T> gamma, beta;

  struct Ctx {
    Seq<T> xhat;
    std::vector<T> rstd;
  };
  std::vector<Ctx> ctx;

  LayerNorm() = default;
  explicit LayerNorm(int d) : dim(d) {
    gamma.resize({d});
    beta.resize({d});
    std::fill(gamma.w.begin(), gamma.w.end(), T(1));
  }
  void init(Rng&) {}
  void reg(ParamStore<T>& s, const std::string& prefix) {
    s.reg(gamma, prefix + ".gamma");
    s.reg(beta, prefix + ".beta");
  }

  Seq<T> fwd(const Seq<T>& x, bool track = true) {
    Seq<T> y(x.n, dim);
    Ctx c;
    c.xhat = Seq<T>(x.n, dim);
    c.rstd.resize(x.n);
    for (int i = 0; i < x.n; ++i) {
      const T* row = x.row(i);
      double mu = 0;
      for (int j = 0; j < dim; ++j) mu += double(row[j]);
      mu /= dim;
      double var = 0;
      for (int j = 0; j < dim; ++j) {
        const double d = double(row[j]) - mu;
        var += d * d;
      }
      var /= dim;
      const T rstd = T(1.0 / std::sqrt(var + 1e-5));
      c.rstd[i] = rstd;
      T* xh = c.xhat.row(i);
      T* yr = y.row(i);
      for (int j = 0; j < dim; ++j) {
        xh[j] = (row[j] - T(mu)) * rstd;
        yr[j] = gamma.w[j] * xh[j] + beta.w[j];
      }
    }
    if (track) ctx.push_back(std::move(c));
    return y;
  }

  Seq<T> bwd(const Seq<T>& dy) {
    Ctx c = std::move(ctx.back());
    ctx.pop_back();
    Seq<T> dx(dy.n, dim);
    for (int i = 0; i < dy.n; ++i) {
      const T* dyr = dy.row(i);
      const T* xh = c.xhat.row(i);
      double sum_dxh = 0, sum_dxh_xh = 0;
      for (int j = 0; j < dim; ++j) {
        const double dxh = double(dyr[j]) * double(gamma.w[j]);
        sum_dxh += dxh;
        sum_dxh_xh += dxh * double(xh[j]);
        gamma.g[j] += dyr[j] * xh[j];
        beta.g[j] += dyr[j];
      }
      const double inv_n = 1.0 / dim;
      T* dxr = dx.row(i);
      for (int j = 0; j < dim; ++j) {
        const double dxh = double(dyr[j]) * double(gamma.w[j]);
        dxr[j] = T(double(c.rstd[i]) *
                   (dxh - inv_n * sum_dxh - double(xh[j]) * inv_n * sum_dxh_xh));
      }
    }
    return dx;
  }
};

template <class T>
struct Embedding {
  int vocab = 0, dim = 0;
  Param<T> W;

  std::vector<std::vector<int>> ctx;

  Embedding() = default;
  Embedding(int vocab_, int dim_) : vocab(vocab_), dim(dim_) { W.resize({vocab, dim}); }
  void init(Rng& rng) { normal_init(W, 0.02, rng); }
  void reg(ParamStore<T>& s, const std::string& prefix) { s.reg(W, prefix + ".W"); }

  Seq<T> fwd(const std::vector<int>& ids, bool track = true) {
    Seq<T> y(int(ids.size()), dim);
    for (size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= vocab) throw Error("embedding index out of range");
      std::copy_n(W.w.data() + size_t(ids[i]) * dim, dim, y.row(int(i)));
    }
    if (track) ctx.push_back(ids);
    return y;
  }

  void bwd(const Seq<T>& dy) {
    const auto ids = std::move(ctx.back());
    ctx.pop_back();
    for (size_t i = 0; i < ids.size(); ++i) {
      T* g = W.g.data() + size_t(ids[i]) * dim;
      const T* row = dy.row(int(i));
      for (int j = 0; j < dim; ++j) g[j] += row[j];
    }
  }
};

// Causal multi-head self-attention over a single sequence.
template <class T>
struct SelfAttention {
  int dim = 0, heads = 0, head_dim = 0;
  Param<T> Wqkv, bqkv, Wo, bo;

  struct Ctx {
    Seq<T> x, qkv, probs, att;  // probs: heads stacked row blocks (h*n, n)
  };
  std::vector<Ctx> ctx;

  SelfAttention() = default;
  SelfAttention(int dim_, int heads_) : dim(dim_), heads(heads_), head_dim(dim_ / heads_) {
    if (dim % heads != 0) throw Error("attention dim must be divisible by heads");
    Wqkv.resize({dim, 3 * dim});
    bqkv.resize({3 * dim});
    Wo.resize({dim, dim});
    bo.resize({dim});
  }
  void init(Rng& rng) {
    glorot_init(Wqkv, dim, 3 * dim, rng);
    glorot_init(Wo, dim, dim, rng);
  }
  void reg(ParamStore<T>& s, const std::string& prefix) {
    s.reg(Wqkv, prefix + ".Wqkv");
    s.reg(bqkv, prefix + ".bqkv");
    s.reg(Wo, prefix + ".Wo");
    s.reg(bo, prefix + ".bo");
  }

  Seq<T> fwd(const Seq<T>& x, bool track = true) {
    const int n = x.n;
    Ctx c;
    c.x = x;
    c.qkv = Seq<T>(n, 3 * dim);
    gemm<T>(false, false, n, 3 * dim, dim, x.v.data(), Wqkv.w.data(), c.qkv.v.data());
    for (int i = 0; i < n; ++i) {
      T* row = c.qkv.row(i);
      for (int j = 0; j < 3 * dim; ++j) row[j] += bqkv.w[j];
    }

    const T scale = T(1.0 / std::sqrt(double(head_dim)));
    c.probs = Seq<T>(heads * n, n);
    c.att = Seq<T>(n, dim);
    for (int h = 0; h < heads; ++h) {
      const T* Q = c.qkv.v.data() + size_t(h) * head_dim;
      const T* K = c.qkv.v.data() + size_t(dim) + size_t(h) * head_dim;
      const T* V = c.qkv.v.data() + size_t(2) * dim + size_t(h) * head_dim;
      T* P = c.probs.row(h * n);
      // scores for all pairs; only j <= i is ever read
      gemm(false, true, n, n, head_dim, scale, Q, 3 * dim, K, 3 * dim, T(0), P, n);
      for (int i = 0; i < n; ++i) {
        T* prow = P + size_t(i) * n;
        T mx = prow[0];
        for (int j = 1; j <= i; ++j) mx = std::max(mx, prow[j]);
        double denom = 0;
        for (int j = 0; j <= i; ++j) {
          const double e = std::exp(double(prow[j] - mx));
          prow[j] = T(e);
          denom += e;
        }
        const T inv = T(1.0 / denom);
        for (int j = 0; j <= i; ++j) prow[j] *= inv;
        for (int j = i + 1; j < n; ++j) prow[j] = T(0);
      }
      gemm(false, false, n, head_dim, n, T(1), P, n, V, 3 * dim, T(0),
           c.att.v.data() + size_t(h) * head_dim, dim);
    }

    Seq<T> y(n, dim);
    gemm<T>(false, false, n, dim, dim, c.att.v.data(), Wo.w.data(), y.v.data());
    for (int i = 0; i < n; ++i) {
      T* row = y.row(i);
      for (int j = 0; j < dim; ++j) row[j] += bo.w[j];
    }
    if (track) ctx.push_back(std::move(c));
    return y;
  }

  Seq<T> bwd(const Seq<T>& dy) {
    Ctx c = std::move(ctx.back());
    ctx.pop_back();
    const int n = dy.n;

    Seq<T> datt(n, dim);
    gemm<T>(true, false, dim, dim, n, c.att.v.data(), dy.v.data(), Wo.g.data(), T(1));
    gemm<T>(false, true, n, dim, dim, dy.v.data(), Wo.w.data(), datt.v.data());
    for (int i = 0; i < n; ++i) {
      const T* row = dy.row(i);
      for (int j = 0; j < dim; ++j) bo.g[j] += row[j];
    }

    Seq<T> dqkv(n, 3 * dim);
    const T scale = T(1.0 / std::sqrt(double(head_dim)));
    Seq<T> dS(n, n);
    for (int h = 0; h < heads; ++h) {
      const T* Q = c.qkv.v.data() + size_t(h) * head_dim;
      const T* K = c.qkv.v.data() + size_t(dim) + size_t(h) * head_dim;
      const T* V = c.qkv.v.data() + size_t(2) * dim + size_t(h) * head_dim;
      T* dQ = dqkv.v.data() + size_t(h) * head_dim;
      T* dK = dqkv.v.data() + size_t(dim) + size_t(h) * head_dim;
      T* dV = dqkv.v.data() + size_t(2) * dim + size_t(h) * head_dim;
      const T* P = c.probs.row(h * n);
      const T* dA = datt.v.data() + size_t(h) * head_dim;

      // dV += P^T dA ; dP = dA V^T
      gemm(true, false, n, head_dim, n, T(1), P, n, dA, dim, T(1), dV, 3 * dim);
      gemm(false, true, n, n, head_dim, T(1), dA, dim, V, 3 * dim, T(0), dS.v.data(), n);
      for (int i = 0; i < n; ++i) {
        const T* prow = P + size_t(i) * n;
        T* dsrow = dS.row(i);
        double dot = 0;
        for (int j = 0; j <= i; ++j) dot += double(prow[j]) * double(dsrow[j]);
        for (int j = 0; j <= i; ++j)
          dsrow[j] = scale * prow[j] * (dsrow[j] - T(dot));
        for (int j = i + 1; j < n; ++j) dsrow[j] = T(0);
      }
      gemm(false, false, n, head_dim, n, T(1), dS.v.data(), n, K, 3 * dim, T(1), dQ,
           3 * dim);
      gemm(true, false, n, head_dim, n, T(1), dS.v.data(), n, Q, 3 * dim, T(1), dK,
           3 * dim);
    }

    Seq<T> dx(n, dim);
    gemm<T>(true, false, dim, 3 * dim, n, c.x.v.data(), dqkv.v.data(), Wqkv.g.data(),
            T(1));
    gemm<T>(false, true, n, dim, 3 * dim, dqkv.v.data(), Wqkv.w.data(), dx.v.data());
    for (int i = 0; i < n; ++i) {
      const T* row = dqkv.row(i);
      for (int j = 0; j < 3 * dim; ++j) bqkv.g[j] += row[j];
    }
    return dx;
  }
};

// Mean cross entropy of rows of `logits` against integer targets; fills
// dlogits with the gradient of the mean loss.
template <class T>
double softmax_nll(const Seq<T>& logits, const std::vector<int>& targets,
                   Seq<T>* dlogits = nullptr) {
  const int n = logits.n, k = logits.d;
  if (int(targets.size()) != n) throw Error("softmax_nll: target count mismatch");
  if (dlogits) *dlogits = Seq<T>(n, k);
  double loss = 0;
  std::vector<double> p(k);
  for (int i = 0; i < n; ++i) {
    const T* row = logits.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) mx = std::max(mx, double(row[j]));
    double denom = 0;
    for (int j = 0; j < k; ++j) {
      p[j] = std::exp(double(row[j]) - mx);
      denom += p[j];
    }
    const int t = targets[i];
    if (t < 0 || t >= k) throw Error("softmax_nll: target out of range");
    loss += -(double(row[t]) - mx - std::log(denom));
    if (dlogits) {
      T* drow = dlogits->row(i);
      for (int j = 0; j < k; ++j)
        drow[j] = T((p[j] / denom - (j == t ? 1.0 : 0.0)) / n);
    }
  }
  return loss / n;
}

}  // namespace imam
