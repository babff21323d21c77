#include "imam/encoder.hpp"

namespace imam {

RepMode rep_mode_from_name(const std::string& name) {
  if (name == "vector") return RepMode::vector;
  if (name == "triplane") return RepMode::triplane;
  if (name == "grid") return RepMode::grid;
  throw ConfigError("unknown representation mode '" + name + "'");
}

const char* rep_mode_name(RepMode mode) {
  switch (mode) {
    case RepMode::vector: return "vector";
    case RepMode::triplane: return "triplane";
    case RepMode::grid: return "grid";
  }
  return "?";
}

int log2_exact(int num, int den, const char* what) {
  if (den <= 0 || num % den != 0)
    throw ConfigError(std::string(what) + ": resolutions must divide evenly");
  int ratio = num / den;
  int k = 0;
  while (ratio > 1) {
    if (ratio % 2 != 0)
      throw ConfigError(std::string(what) + ": resolution ratio must be a power of two");
    ratio /= 2;
    ++k;
  }
  return k;
}

std::vector<std::string> flatten_orders_for(RepMode mode) {
  switch (mode) {
    case RepMode::vector: return {"row_major", "col_major"};
    case RepMode::triplane: return {"iter_a", "iter_b", "iter_c"};
    case RepMode::grid: return {"xyz", "yzx", "zxy"};
  }
  return {};
}

void EncoderConfig::validate() const {
  if (feat_dim <= 0 || trunk_dim <= 0 || code_dim <= 0)
    throw ConfigError("encoder dims must be positive");
  if (mode == RepMode::grid) {
    log2_exact(grid_res, grid_down_res, "grid_res");
  } else {
    log2_exact(plane_res, down_res, "plane_res");
  }
  const auto orders = flatten_orders_for(mode);
  if (std::find(orders.begin(), orders.end(), flatten_order) == orders.end()) {
    std::string valid;
    for (const auto& o : orders) valid += (valid.empty() ? "" : ", ") + o;
    throw ConfigError("flatten order '" + flatten_order + "' not valid for mode " +
                      rep_mode_name(mode) + " (expected one of: " + valid + ")");
  }
}

std::vector<int> make_flatten_perm(const EncoderConfig& cfg) {
  std::vector<int> perm(cfg.code_positions());
  if (cfg.mode == RepMode::vector) {
    const int h = cfg.down_res;
    if (cfg.flatten_order == "row_major") {
      for (int p = 0; p < h * h; ++p) perm[p] = p;
    } else {  // col_major
      for (int v = 0; v < h; ++v)
        for (int u = 0; u < h; ++u) perm[v * h + u] = u * h + v;
    }
  } else if (cfg.mode == RepMode::triplane) {
    const int s = cfg.down_res * cfg.down_res;
    // canonical plane storage is (xy, yz, xz)
    std::array<int, 3> block;
    if (cfg.flatten_order == "iter_a") block = {2, 0, 1};       // xz, xy, yz
    else if (cfg.flatten_order == "iter_b") block = {0, 2, 1};  // xy, xz, yz
    else block = {1, 2, 0};                                     // yz, xz, xy
    for (int bi = 0; bi < 3; ++bi)
      for (int q = 0; q < s; ++q) perm[bi * s + q] = block[bi] * s + q;
  } else {
    const int r = cfg.grid_down_res;
    const auto canon = [r](int x, int y, int z) { return (x * r + y) * r + z; };
    int p = 0;
    if (cfg.flatten_order == "xyz") {
      for (int x = 0; x < r; ++x)
        for (int y = 0; y < r; ++y)
          for (int z = 0; z < r; ++z) perm[p++] = canon(x, y, z);
    } else if (cfg.flatten_order == "yzx") {
      for (int y = 0; y < r; ++y)
        for (int z = 0; z < r; ++z)
          for (int x = 0; x < r; ++x) perm[p++] = canon(x, y, z);
    } else {  // zxy
      for (int z = 0; z < r; ++z)
        for (int x = 0; x < r; ++x)
          for (int y = 0; y < r; ++y) perm[p++] = canon(x, y, z);
    }
  }
  return perm;
}

}  // namespace imam
