#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "doctest.h"
#include "imam/metrics.hpp"
#include "test_util.hpp"

using namespace imam;

namespace {

std::vector<PointCloud> random_set(int count, int points, u64 seed) {
  std::vector<PointCloud> out;
  for (int i = 0; i < count; ++i)
    out.push_back(testutil::random_cloud(points, seed * 1000 + u64(i)));
  return out;
}

// shift & scale a set to a far-away region so cross-set distances dominate
std::vector<PointCloud> shifted(const std::vector<PointCloud>& in, float dx) {
  std::vector<PointCloud> out = in;
  for (auto& c : out)
    for (auto& p : c.pts) p[0] += dx;
  return out;
}

DistanceMatrix hand_matrix(int g, int r, std::vector<double> vals) {
  DistanceMatrix d;
  d.g = g;
  d.r = r;
  d.v = std::move(vals);
  return d;
}

double coverage_brute(const DistanceMatrix& d) {
  std::set<int> hit;
  for (int i = 0; i < d.g; ++i) {
    int best = 0;
    for (int j = 1; j < d.r; ++j)
      if (d.at(i, j) < d.at(i, best)) best = j;
    hit.insert(best);
  }
  return double(hit.size()) / d.r;
}

double mmd_brute(const DistanceMatrix& d) {
  double total = 0;
  for (int j = 0; j < d.r; ++j) {
    double best = std::numeric_limits<double>::max();
    for (int i = 0; i < d.g; ++i) best = std::min(best, d.at(i, j));
    total += best;
  }
  return total / d.r;
}

double nna_brute(const UnionDistances& u) {
  const int n = u.n();
  int same = 0;
  for (int i = 0; i < n; ++i) {
    int best = -1;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      if (best < 0 || u.at(i, j) < u.at(i, best)) best = j;
    }
    const bool i_gen = i < u.g;
    const bool b_gen = best < u.g;
    same += i_gen == b_gen;
  }
  return double(same) / n;
}

}  // namespace

TEST_CASE("distance matrix stores chamfer distances") {
  const auto gen = random_set(3, 24, 1);
  const auto ref = random_set(4, 24, 2);
  const DistanceMatrix d = distance_matrix(gen, ref);
  REQUIRE(d.g == 3);
  REQUIRE(d.r == 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(d.at(i, j) == chamfer_distance(gen[i], ref[j]));
  CHECK_THROWS_AS(distance_matrix({}, ref), Error);
}

TEST_CASE("coverage counts distinct nearest references") {
  // rows: g0 -> r1, g1 -> r1, g2 -> r0; r2 never hit
  const DistanceMatrix d = hand_matrix(3, 3,
                                       {5.0, 1.0, 9.0,
                                        4.0, 2.0, 8.0,
                                        0.5, 3.0, 7.0});
  CHECK(coverage(d) == doctest::Approx(2.0 / 3.0));
  CHECK(coverage(d) == coverage_brute(d));

  // a tie in a row goes to the lowest column
  const DistanceMatrix t = hand_matrix(1, 3, {2.0, 2.0, 5.0});
  CHECK(coverage(t) == doctest::Approx(1.0 / 3.0));
  CHECK(coverage_brute(t) == coverage(t));
}

TEST_CASE("thresholded coverage is monotone and reaches plain coverage") {
  const DistanceMatrix d = hand_matrix(3, 3,
                                       {5.0, 1.0, 9.0,
                                        4.0, 2.0, 8.0,
                                        0.5, 3.0, 7.0});
  CHECK(coverage_thresholded(d, 0.6) == doctest::Approx(1.0 / 3.0));
  CHECK(coverage_thresholded(d, 1.5) == doctest::Approx(2.0 / 3.0));
  CHECK(coverage_thresholded(d, 0.1) == 0.0);
  // the bound is strict: a row exactly at t does not count
  CHECK(coverage_thresholded(d, 0.5) == 0.0);

  double prev = -1;
  for (double t : {0.1, 0.6, 1.5, 3.0, 100.0}) {
    const double c = coverage_thresholded(d, t);
    CHECK(c >= prev);
    prev = c;
  }
  CHECK(coverage_thresholded(d, std::numeric_limits<double>::infinity()) ==
        coverage(d));
  CHECK_THROWS_AS(coverage_thresholded(d, 0.0), Error);
  CHECK_THROWS_AS(coverage_thresholded(d, -1.0), Error);
}

TEST_CASE("mmd averages per-reference closest distances") {
  const DistanceMatrix d = hand_matrix(2, 3,
                                       {5.0, 1.0, 9.0,
                                        4.0, 2.0, 8.0});
  CHECK(mmd(d) == doctest::Approx((4.0 + 1.0 + 8.0) / 3.0));
  CHECK(mmd(d) == mmd_brute(d));
}

TEST_CASE("metric helpers agree with brute force on random sets") {
  const auto gen = random_set(16, 32, 5);
  const auto ref = random_set(12, 32, 6);
  const DistanceMatrix d = distance_matrix(gen, ref);
  CHECK(coverage(d) == coverage_brute(d));
  CHECK(mmd(d) == mmd_brute(d));

  const UnionDistances u = union_distances(gen, ref);
  REQUIRE(u.g == 16);
  REQUIRE(u.r == 12);
  for (int i = 0; i < u.n(); ++i) {
    CHECK(u.at(i, i) == 0.0);
    for (int j = 0; j < u.n(); ++j) CHECK(u.at(i, j) == u.at(j, i));
  }
  CHECK(nna_1_from(u) == nna_brute(u));
}

TEST_CASE("twin sets defeat the 1-nn classifier") {
  const auto gen = random_set(10, 24, 7);
  const auto ref = gen;  // every shape's nearest neighbour is its twin
  CHECK(nna_1(gen, ref) == 0.0);
}

TEST_CASE("disjoint clusters saturate the 1-nn classifier") {
  const auto gen = random_set(10, 24, 8);
  const auto ref = shifted(random_set(10, 24, 9), 50.0f);
  CHECK(nna_1(gen, ref) == 1.0);
}

TEST_CASE("edge-count distance on separable and mixed sets") {
  // two tight, far-apart clusters: every 1-nn edge stays inside its own set,
  // observed cross count is 0, so the statistic equals the expected value
  const auto gen = random_set(4, 16, 10);
  const auto ref = shifted(random_set(4, 16, 11), 50.0f);
  const UnionDistances u = union_distances(gen, ref);

  // count distinct undirected 1-nn edges by hand
  std::set<std::pair<int, int>> edges;
  for (int i = 0; i < u.n(); ++i) {
    int best = -1;
    for (int j = 0; j < u.n(); ++j) {
      if (j == i) continue;
      if (best < 0 || u.at(i, j) < u.at(i, best)) best = j;
    }
    edges.insert({std::min(i, best), std::max(i, best)});
  }
  const double expected = double(edges.size()) * 2.0 * 4.0 * 4.0 / (8.0 * 7.0);
  CHECK(ecd_from(u) == doctest::Approx(expected));

  // twin sets: every edge crosses, |E - expected| = E * (1 - 2gr/(N(N-1)))
  const auto twins = random_set(6, 24, 12);
  const UnionDistances tu = union_distances(twins, twins);
  std::set<std::pair<int, int>> tedges;
  for (int i = 0; i < tu.n(); ++i) {
    int best = -1;
    for (int j = 0; j < tu.n(); ++j) {
      if (j == i) continue;
      if (best < 0 || tu.at(i, j) < tu.at(i, best)) best = j;
    }
    tedges.insert({std::min(i, best), std::max(i, best)});
  }
  const double texp = double(tedges.size()) * 2.0 * 36.0 / (12.0 * 11.0);
  CHECK(ecd_from(tu) == doctest::Approx(std::abs(double(tedges.size()) - texp)));
}

TEST_CASE("total mutual difference sums mean pairwise distances") {
  std::vector<PointCloud> comp;
  comp.push_back(testutil::random_cloud(16, 20));
  comp.push_back(testutil::random_cloud(16, 21));
  comp.push_back(testutil::random_cloud(16, 22));
  const double d01 = chamfer_distance(comp[0], comp[1]);
  const double d02 = chamfer_distance(comp[0], comp[2]);
  const double d12 = chamfer_distance(comp[1], comp[2]);
  const double expect = (d01 + d02) / 2 + (d01 + d12) / 2 + (d02 + d12) / 2;
  CHECK(tmd(comp) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(tmd({comp[0]}) == 0.0);

  // identical completions have no mutual difference
  CHECK(tmd({comp[0], comp[0], comp[0]}) == 0.0);
}

TEST_CASE("completion fidelity averages partial-to-completion distances") {
  const PointCloud partial = testutil::random_cloud(20, 30);
  std::vector<PointCloud> comps;
  comps.push_back(testutil::random_cloud(24, 31));
  comps.push_back(testutil::random_cloud(24, 32));
  const double expect = 0.5 * (unidirectional_hausdorff(partial, comps[0]) +
                               unidirectional_hausdorff(partial, comps[1]));
  CHECK(uhd_metric(partial, comps) == doctest::Approx(expect).epsilon(1e-12));

  // a completion containing the partial costs nothing
  CHECK(uhd_metric(partial, {partial}) == 0.0);
}

TEST_CASE("frechet distance closed forms") {
  // identical sets: zero
  std::vector<std::vector<float>> a;
  Rng rng(40);
  for (int i = 0; i < 64; ++i) {
    std::vector<float> f(6);
    for (auto& x : f) x = float(rng.normal());
    a.push_back(f);
  }
  CHECK(frechet_distance(a, a) <= 1e-6);

  // shared covariance: distance reduces to the squared mean gap
  std::vector<std::vector<float>> b = a;
  for (auto& f : b) f[0] += 3.0f;
  CHECK(frechet_distance(a, b) == doctest::Approx(9.0).epsilon(1e-3));

  CHECK(frechet_distance(a, b) >= 0.0);
}
