#pragma once

#include <string>
#include <vector>

#include "imam/common.hpp"

namespace imam {

struct PointCloud {
  std::vector<P3> pts;

  PointCloud() = default;
  explicit PointCloud(std::vector<P3> p) : pts(std::move(p)) {}
  int size() const { return int(pts.size()); }
};

constexpr int kNumClasses = 5;

// Class ids: 0 box, 1 cylinder, 2 sphere, 3 table, 4 chair.
const char* class_name(int class_id);
int class_id_from_name(const std::string& name);

// A procedural solid, fully determined by (class_id, seed). params caches the
// sampled dimensions so a shape can be reconstructed from a manifest.
struct AnalyticShape {
  int class_id = 0;
  u64 seed = 0;
  std::vector<double> params;
};

AnalyticShape make_shape(int class_id, u64 seed);

// Closed-solid membership: boundary points count as occupied.
bool occupied(const AnalyticShape& shape, const P3& p);
std::vector<u8> occupancy(const AnalyticShape& shape, const std::vector<P3>& pts);

// n points on the solid's boundary, area-weighted across faces.
PointCloud sample_surface_points(const AnalyticShape& shape, int n, u64 seed);

struct OccupancySample {
  std::vector<P3> positions;
  std::vector<u8> labels;
};

// n_uniform points uniform in [-1,1]^3 plus n_near surface points perturbed
// by isotropic Gaussian noise (sigma = 0.05), labels from the oracle.
OccupancySample sample_training_points(const AnalyticShape& shape, int n_uniform,
                                       int n_near, u64 seed, double sigma = 0.05);

// Picks a random viewpoint on the sphere of radius 1.5, drops the
// ceil(fraction * n) points farthest from it, and resamples to n points.
PointCloud make_partial_viewpoint(const PointCloud& cloud, double fraction, u64 seed);

// Keeps points at or below the mid-height of the cloud's bounding box and
// resamples to the original count.
PointCloud make_partial_bottom(const PointCloud& cloud, u64 seed);

// Identity when cloud already has n points; random subset when larger;
// original points plus random duplicates when smaller.
PointCloud resample_to(const PointCloud& cloud, int n, u64 seed);

}  // namespace imam
