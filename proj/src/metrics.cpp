#include "imam/metrics.hpp"

#include <cmath>
#include <set>

#include <Eigen/Dense>

namespace imam {

ShapeDistanceFn chamfer_backend() {
  return [](const PointCloud& a, const PointCloud& b) { return chamfer_distance(a, b); };
}

DistanceMatrix distance_matrix(const std::vector<PointCloud>& gen,
                               const std::vector<PointCloud>& ref,
                               const ShapeDistanceFn& backend,
                               const std::string& metric_name) {
  if (gen.empty() || ref.empty())
    throw Error("distance_matrix: both sets must be nonempty");
  DistanceMatrix d;
  d.g = int(gen.size());
  d.r = int(ref.size());
  d.metric = metric_name;
  d.v.resize(size_t(d.g) * d.r);
  for (int i = 0; i < d.g; ++i)
    for (int j = 0; j < d.r; ++j) {
      const double val = backend(gen[i], ref[j]);
      if (!std::isfinite(val) || val < 0)
        throw Error("distance_matrix: backend produced an invalid distance");
      d.at(i, j) = val;
    }
  return d;
}

static int row_argmin(const DistanceMatrix& d, int i) {
  int best = 0;
  for (int j = 1; j < d.r; ++j)
    if (d.at(i, j) < d.at(i, best)) best = j;
  return best;
}

double coverage(const DistanceMatrix& d) {
  std::set<int> hit;
  for (int i = 0; i < d.g; ++i) hit.insert(row_argmin(d, i));
  return double(hit.size()) / d.r;
}

double coverage_thresholded(const DistanceMatrix& d, double t) {
  if (t <= 0) throw Error("coverage_thresholded: threshold must be positive");
  std::set<int> hit;
  for (int i = 0; i < d.g; ++i) {
    const int j = row_argmin(d, i);
    if (d.at(i, j) < t) hit.insert(j);
  }
  return double(hit.size()) / d.r;
}

double mmd(const DistanceMatrix& d) {
  double total = 0;
  for (int j = 0; j < d.r; ++j) {
    double mn = d.at(0, j);
    for (int i = 1; i < d.g; ++i) mn = std::min(mn, d.at(i, j));
    total += mn;
  }
  return total / d.r;
}

UnionDistances union_distances(const std::vector<PointCloud>& gen,
                               const std::vector<PointCloud>& ref,
                               const ShapeDistanceFn& backend) {
  if (gen.empty() || ref.empty())
    throw Error("union_distances: both sets must be nonempty");
  UnionDistances u;
  u.g = int(gen.size());
  u.r = int(ref.size());
  const int n = u.n();
  u.v.assign(size_t(n) * n, 0.0);
  auto cloud = [&](int i) -> const PointCloud& {
    return i < u.g ? gen[i] : ref[i - u.g];
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double val = backend(cloud(i), cloud(j));
      u.v[size_t(i) * n + j] = val;
      u.v[size_t(j) * n + i] = val;
    }
  return u;
}

// Index of the nearest other element, ties to the lowest index.
static int union_nn(const UnionDistances& u, int i) {
  const int n = u.n();
  int best = -1;
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    if (best < 0 || u.at(i, j) < u.at(i, best)) best = j;
  }
  return best;
}

double nna_1_from(const UnionDistances& u) {
  const int n = u.n();
  if (n < 2) throw Error("nna_1: need at least two elements");
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    const int j = union_nn(u, i);
    if ((i < u.g) == (j < u.g)) ++correct;
  }
  return double(correct) / n;
}

double nna_1(const std::vector<PointCloud>& gen, const std::vector<PointCloud>& ref,
             const ShapeDistanceFn& backend) {
  return nna_1_from(union_distances(gen, ref, backend));
}

double ecd_from(const UnionDistances& u) {
  const int n = u.n();
  if (n < 2) throw Error("ecd: need at least two elements");
  std::set<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    const int j = union_nn(u, i);
    edges.insert({std::min(i, j), std::max(i, j)});
  }
  int cross = 0;
  for (const auto& [a, b] : edges)
    if ((a < u.g) != (b < u.g)) ++cross;
  const double expected =
      double(edges.size()) * 2.0 * u.g * u.r / (double(n) * (n - 1));
  return std::abs(double(cross) - expected);
}

double ecd(const std::vector<PointCloud>& gen, const std::vector<PointCloud>& ref,
           const ShapeDistanceFn& backend) {
  return ecd_from(union_distances(gen, ref, backend));
}

double tmd(const std::vector<PointCloud>& completions, const ShapeDistanceFn& backend) {
  const int k = int(completions.size());
  if (k < 2) return 0.0;
  std::vector<double> pair_d(size_t(k) * k, 0.0);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      const double val = backend(completions[i], completions[j]);
      pair_d[size_t(i) * k + j] = val;
      pair_d[size_t(j) * k + i] = val;
    }
  double total = 0;
  for (int i = 0; i < k; ++i) {
    double sum = 0;
    for (int j = 0; j < k; ++j)
      if (j != i) sum += pair_d[size_t(i) * k + j];
    total += sum / (k - 1);
  }
  return total;
}

double uhd_metric(const PointCloud& partial, const std::vector<PointCloud>& completions) {
  if (completions.empty()) throw Error("uhd_metric: no completions");
  double total = 0;
  for (const auto& c : completions) total += unidirectional_hausdorff(partial, c);
  return total / double(completions.size());
}

double frechet_distance(const std::vector<std::vector<float>>& gen_feats,
                        const std::vector<std::vector<float>>& ref_feats) {
  if (gen_feats.empty() || ref_feats.empty())
    throw Error("frechet_distance: both feature sets must be nonempty");
  const int dim = int(gen_feats[0].size());
  if (dim == 0 || int(ref_feats[0].size()) != dim)
    throw Error("frechet_distance: feature dimension mismatch");

  auto stats = [dim](const std::vector<std::vector<float>>& feats,
                     Eigen::VectorXd& mu, Eigen::MatrixXd& sigma) {
    const int n = int(feats.size());
    Eigen::MatrixXd x(n, dim);
    for (int i = 0; i < n; ++i) {
      if (int(feats[i].size()) != dim)
        throw Error("frechet_distance: ragged feature set");
      for (int j = 0; j < dim; ++j) x(i, j) = feats[i][j];
    }
    mu = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
    const double denom = n > 1 ? double(n - 1) : 1.0;
    sigma = centered.transpose() * centered / denom;
  };

  Eigen::VectorXd mu_g, mu_r;
  Eigen::MatrixXd sig_g, sig_r;
  stats(gen_feats, mu_g, sig_g);
  stats(ref_feats, mu_r, sig_r);

  // sqrt of the symmetric PSD matrix m, eigenvalues clamped at zero.
  auto sqrt_psd = [](const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd ev = es.eigenvalues();
    for (int i = 0; i < ev.size(); ++i) ev(i) = std::sqrt(std::max(0.0, ev(i)));
    return Eigen::MatrixXd(es.eigenvectors() * ev.asDiagonal() *
                           es.eigenvectors().transpose());
  };

  // tr((Sg Sr)^(1/2)) computed through the symmetric form
  // (Sg^(1/2) Sr Sg^(1/2))^(1/2), which shares its eigenvalues.
  const Eigen::MatrixXd root_g = sqrt_psd(sig_g);
  const Eigen::MatrixXd inner = root_g * sig_r * root_g;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
  double tr_sqrt = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    tr_sqrt += std::sqrt(std::max(0.0, es.eigenvalues()(i)));

  const double mean_term = (mu_g - mu_r).squaredNorm();
  return mean_term + sig_g.trace() + sig_r.trace() - 2.0 * tr_sqrt;
}

}  // namespace imam
