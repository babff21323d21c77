#pragma once

#include <functional>
#include <string>
#include <vector>

#include "imam/geometry.hpp"

namespace imam {

// Shape-similarity backend; the default is the symmetric Chamfer distance.
using ShapeDistanceFn = std::function<double(const PointCloud&, const PointCloud&)>;

ShapeDistanceFn chamfer_backend();

struct DistanceMatrix {
  int g = 0, r = 0;          // generated rows x reference columns
  std::vector<double> v;
  std::string metric = "chamfer";

  double at(int i, int j) const { return v[size_t(i) * r + j]; }
  double& at(int i, int j) { return v[size_t(i) * r + j]; }
};

DistanceMatrix distance_matrix(const std::vector<PointCloud>& gen,
                               const std::vector<PointCloud>& ref,
                               const ShapeDistanceFn& backend = chamfer_backend(),
                               const std::string& metric_name = "chamfer");

// Fraction of reference shapes that are the nearest reference of at least
// one generated shape (row argmins, ties to the lowest column).
double coverage(const DistanceMatrix& d);

// As coverage, but a row only counts when its minimum distance is < t.
double coverage_thresholded(const DistanceMatrix& d, double t);

// Mean over reference columns of the closest generated distance.
double mmd(const DistanceMatrix& d);

// Symmetric pairwise distances over the union of both sets (gen block first);
// shared by the two-sample statistics below so the matrix is built once.
struct UnionDistances {
  int g = 0, r = 0;
  std::vector<double> v;  // (g+r)^2, zero diagonal

  int n() const { return g + r; }
  double at(int i, int j) const { return v[size_t(i) * (g + r) + j]; }
};

UnionDistances union_distances(const std::vector<PointCloud>& gen,
                               const std::vector<PointCloud>& ref,
                               const ShapeDistanceFn& backend = chamfer_backend());

// Leave-one-out 1-NN two-sample classification accuracy; 0.5 is ideal.
double nna_1_from(const UnionDistances& u);
double nna_1(const std::vector<PointCloud>& gen, const std::vector<PointCloud>& ref,
             const ShapeDistanceFn& backend = chamfer_backend());

// |observed cross-set edges - expected under random labels| on the 1-NN
// graph of the union; expected = E * 2|G||R| / (N(N-1)).
double ecd_from(const UnionDistances& u);
double ecd(const std::vector<PointCloud>& gen, const std::vector<PointCloud>& ref,
           const ShapeDistanceFn& backend = chamfer_backend());

// Sum over completions of the mean Chamfer distance to the other k-1.
double tmd(const std::vector<PointCloud>& completions,
           const ShapeDistanceFn& backend = chamfer_backend());

// Mean over completions of unidirectional_hausdorff(partial, completion).
double uhd_metric(const PointCloud& partial, const std::vector<PointCloud>& completions);

// Frechet distance between Gaussian fits of two feature sets:
// |mu_g - mu_r|^2 + tr(Sg + Sr - 2 (Sg Sr)^(1/2)), eigenvalues clamped at 0.
double frechet_distance(const std::vector<std::vector<float>>& gen_feats,
                        const std::vector<std::vector<float>>& ref_feats);

}  // namespace imam
