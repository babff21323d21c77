#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace imam {

using u8 = std::uint8_t;
using u32 = std::uint32_t;
using u64 = std::uint64_t;
using i64 = std::int64_t;

using P3 = std::array<float, 3>;

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : Error {
  using Error::Error;
};
struct FormatError : IoError {
  using IoError::IoError;
};
struct ChecksumError : IoError {
  using IoError::IoError;
};
struct ConfigError : Error {
  using Error::Error;
};

inline u64 splitmix64(u64& state) {
  u64 z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Mixes an arbitrary list of integers into a single stream seed. Used to
// derive independent substreams, e.g. hash_seed(global_seed, shape_index).
inline u64 hash_seed(std::initializer_list<u64> parts) {
  u64 s = 0x6a09e667f3bcc908ull;
  for (u64 p : parts) {
    s ^= p + 0x9e3779b97f4a7c15ull + (s << 6) + (s >> 2);
    u64 t = s;
    s = splitmix64(t);
  }
  return s;
}

// xoshiro256++ with splitmix64 seeding. Self-contained so that streams are
// reproducible bit-for-bit across platforms and standard library versions.
class Rng {
 public:
  explicit Rng(u64 seed = 0) {
    u64 sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  u64 next_u64() {
    const u64 result = rotl(s_[0] + s_[3], 23) + s_[0];
    const u64 t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n).
  u64 uniform_int(u64 n) {
    if (n == 0) throw Error("uniform_int: n must be positive");
    const u64 limit = ~u64(0) - ~u64(0) % n;
    u64 x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller; second value cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = size_t(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static u64 rotl(u64 x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<u64, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// OpenBLAS thread count; everything else in the project is serial.
void set_worker_threads(int n);

double now_seconds();

std::string format_duration(double seconds);

}  // namespace imam
