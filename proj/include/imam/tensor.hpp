#pragma once

#include <cassert>
#include <cstring>
#include <vector>

#include "imam/common.hpp"

namespace imam {

// Row-major (n, d) matrix. Also used for point features and token embeddings.
template <class T>
struct Seq {
  int n = 0;
  int d = 0;
  std::vector<T> v;

  Seq() = default;
  Seq(int n_, int d_) : n(n_), d(d_), v(size_t(n_) * d_, T(0)) {}

  T* row(int i) { return v.data() + size_t(i) * d; }
  const T* row(int i) const { return v.data() + size_t(i) * d; }
  T& at(int i, int j) { return v[size_t(i) * d + j]; }
  T at(int i, int j) const { return v[size_t(i) * d + j]; }
  size_t size() const { return v.size(); }
  void zero() { std::fill(v.begin(), v.end(), T(0)); }
};

// Channel-last (h, w, c) feature map.
template <class T>
struct Map2 {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<T> v;

  Map2() = default;
  Map2(int h_, int w_, int c_) : h(h_), w(w_), c(c_), v(size_t(h_) * w_ * c_, T(0)) {}

  T* at(int i, int j) { return v.data() + (size_t(i) * w + j) * c; }
  const T* at(int i, int j) const { return v.data() + (size_t(i) * w + j) * c; }
  size_t size() const { return v.size(); }
  void zero() { std::fill(v.begin(), v.end(), T(0)); }
};

// Channel-last (d, h, w, c) volume, used by the voxel representation.
template <class T>
struct Grid3 {
  int d = 0;
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<T> v;

  Grid3() = default;
  Grid3(int d_, int h_, int w_, int c_)
      : d(d_), h(h_), w(w_), c(c_), v(size_t(d_) * h_ * w_ * c_, T(0)) {}

  T* at(int k, int i, int j) { return v.data() + ((size_t(k) * h + i) * w + j) * c; }
  const T* at(int k, int i, int j) const {
    return v.data() + ((size_t(k) * h + i) * w + j) * c;
  }
  size_t size() const { return v.size(); }
  void zero() { std::fill(v.begin(), v.end(), T(0)); }
};

template <class T>
struct TriPlane {
  Map2<T> xy;  // indexed by (x, y)
  Map2<T> yz;  // indexed by (y, z)
  Map2<T> xz;  // indexed by (x, z)

  TriPlane() = default;
  TriPlane(int res, int c) : xy(res, res, c), yz(res, res, c), xz(res, res, c) {}

  Map2<T>& plane(int i) { return i == 0 ? xy : (i == 1 ? yz : xz); }
  const Map2<T>& plane(int i) const { return i == 0 ? xy : (i == 1 ? yz : xz); }
  void zero() {
    xy.zero();
    yz.zero();
    xz.zero();
  }
};

template <class T>
void axpy(T a, const std::vector<T>& x, std::vector<T>& y) {
  assert(x.size() == y.size());
  for (size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

}  // namespace imam
