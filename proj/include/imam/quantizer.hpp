#pragma once

#include "imam/nn.hpp"

namespace imam {

// Learned codebook with nearest-entry assignment. Distances are evaluated in
// double so the argmin is unambiguous; ties go to the lowest index.
template <class T>
struct Codebook {
  int entries = 0, dim = 0;
  Param<T> table;  // (entries, dim)
  std::vector<i64> usage;

  Codebook() = default;
  Codebook(int entries_, int dim_) : entries(entries_), dim(dim_) {
    table.resize({entries, dim});
    usage.assign(entries, 0);
  }
  void init(Rng& rng) {
    const double limit = 1.0 / entries;
    for (auto& w : table.w) w = T(rng.uniform(-limit, limit));
  }
  void reg(ParamStore<T>& s, const std::string& prefix) {
    s.reg(table, prefix + ".table");
  }

  int nearest(const T* f) const {
    int best = 0;
    double best_d = std::numeric_limits<double>::max();
    for (int e = 0; e < entries; ++e) {
      const T* q = table.w.data() + size_t(e) * dim;
      double d = 0;
      for (int j = 0; j < dim; ++j) {
        const double diff = double(f[j]) - double(q[j]);
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = e;
      }
    }
    return best;
  }

  std::vector<int> quantize(const Seq<T>& f) {
    std::vector<int> idx(f.n);
    for (int i = 0; i < f.n; ++i) {
      idx[i] = nearest(f.row(i));
      ++usage[idx[i]];
    }
    return idx;
  }

  Seq<T> lookup(const std::vector<int>& idx) const {
    Seq<T> q(int(idx.size()), dim);
    for (size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0 || idx[i] >= entries) throw Error("code index out of range");
      std::copy_n(table.w.data() + size_t(idx[i]) * dim, dim, q.row(int(i)));
    }
    return q;
  }

  // Per position: ||sg[f] - q||^2 + beta * ||f - sg[q]||^2, averaged over
  // positions (squared L2 summed over the code dimension).
  double loss(const Seq<T>& f, const Seq<T>& q, double beta) const {
    double total = 0;
    for (int i = 0; i < f.n; ++i) {
      const T* fi = f.row(i);
      const T* qi = q.row(i);
      double d = 0;
      for (int j = 0; j < dim; ++j) {
        const double diff = double(fi[j]) - double(qi[j]);
        d += diff * diff;
      }
      total += (1.0 + beta) * d;
    }
    return total / f.n;
  }

  // Adds the codebook-loss gradients: commitment term into df, alignment
  // term into the table entries named by idx.
  void loss_backward(const Seq<T>& f, const std::vector<int>& idx, const Seq<T>& q,
                     double beta, Seq<T>& df) {
    const double inv_n = 1.0 / f.n;
    for (int i = 0; i < f.n; ++i) {
      const T* fi = f.row(i);
      const T* qi = q.row(i);
      T* dfi = df.row(i);
      T* gq = table.g.data() + size_t(idx[i]) * dim;
      for (int j = 0; j < dim; ++j) {
        const double diff = double(fi[j]) - double(qi[j]);
        dfi[j] += T(2.0 * beta * diff * inv_n);
        gq[j] += T(-2.0 * diff * inv_n);
      }
    }
  }

  // Optional: re-seed entries unused since the last call to random rows of
  // feats. Off by default in training.
  int reseed_dead(const Seq<T>& feats, Rng& rng) {
    int reseeded = 0;
    for (int e = 0; e < entries; ++e) {
      if (usage[e] == 0 && feats.n > 0) {
        const int src = int(rng.uniform_int(u64(feats.n)));
        std::copy_n(feats.row(src), dim, table.w.data() + size_t(e) * dim);
        ++reseeded;
      }
      usage[e] = 0;
    }
    return reseeded;
  }
};

// Straight-through estimator: forward value of q, gradient passed to f.
template <class T>
Seq<T> straight_through(const Seq<T>& f, const Seq<T>& q) {
  (void)f;
  return q;
}

}  // namespace imam
