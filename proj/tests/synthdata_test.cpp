#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "imam/dataset.hpp"
#include "imam/geometry.hpp"
#include "imam/synthdata.hpp"
#include "test_util.hpp"

using namespace imam;

namespace {

bool same_point(const P3& a, const P3& b) {
  return a[0] == b[0] && a[1] == b[1] && a[2] == b[2];
}

// multiset comparison with exact float equality
bool same_multiset(const std::vector<P3>& a, const std::vector<P3>& b) {
  if (a.size() != b.size()) return false;
  auto key = [](const P3& p) { return std::make_tuple(p[0], p[1], p[2]); };
  std::multiset<std::tuple<float, float, float>> ma, mb;
  for (const auto& p : a) ma.insert(key(p));
  for (const auto& p : b) mb.insert(key(p));
  return ma == mb;
}

bool in_cloud(const P3& p, const PointCloud& c) {
  for (const auto& q : c.pts)
    if (same_point(p, q)) return true;
  return false;
}

size_t distinct_count(const PointCloud& c) {
  std::set<std::tuple<float, float, float>> s;
  for (const auto& p : c.pts) s.insert(std::make_tuple(p[0], p[1], p[2]));
  return s.size();
}

}  // namespace

TEST_CASE("class names round trip") {
  CHECK(kNumClasses == 5);
  CHECK(class_name(0) == std::string("box"));
  CHECK(class_name(1) == std::string("cylinder"));
  CHECK(class_name(2) == std::string("sphere"));
  CHECK(class_name(3) == std::string("table"));
  CHECK(class_name(4) == std::string("chair"));
  for (int c = 0; c < kNumClasses; ++c) CHECK(class_id_from_name(class_name(c)) == c);
  CHECK_THROWS_AS(class_id_from_name("teapot"), Error);
  CHECK_THROWS_AS(class_name(5), Error);
}

TEST_CASE("make_shape is deterministic and respects parameter ranges") {
  for (int c = 0; c < kNumClasses; ++c) {
    for (u64 seed : {u64(0), u64(7), u64(12345)}) {
      AnalyticShape a = make_shape(c, seed);
      AnalyticShape b = make_shape(c, seed);
      CHECK(a.class_id == c);
      CHECK(a.seed == seed);
      REQUIRE(a.params.size() == b.params.size());
      for (size_t i = 0; i < a.params.size(); ++i) CHECK(a.params[i] == b.params[i]);
    }
  }

  auto in_range = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  for (u64 seed = 0; seed < 50; ++seed) {
    AnalyticShape box = make_shape(0, seed);
    REQUIRE(box.params.size() == 3);
    for (double h : box.params) CHECK(in_range(h, 0.25, 0.8));

    AnalyticShape cyl = make_shape(1, seed);
    REQUIRE(cyl.params.size() == 2);
    CHECK(in_range(cyl.params[0], 0.2, 0.7));
    CHECK(in_range(cyl.params[1], 0.3, 0.8));

    AnalyticShape sph = make_shape(2, seed);
    REQUIRE(sph.params.size() == 1);
    CHECK(in_range(sph.params[0], 0.3, 0.8));

    AnalyticShape table = make_shape(3, seed);
    REQUIRE(table.params.size() == 6);
    CHECK(in_range(table.params[0], 0.45, 0.8));
    CHECK(in_range(table.params[1], 0.45, 0.8));
    CHECK(in_range(table.params[2], 0.06, 0.14));
    CHECK(in_range(table.params[3], 0.25, 0.6));
    CHECK(in_range(table.params[4], 0.05, 0.1));
    CHECK(in_range(table.params[5], -0.7, -0.3));

    AnalyticShape chair = make_shape(4, seed);
    REQUIRE(chair.params.size() == 7);
    CHECK(in_range(chair.params[0], 0.35, 0.6));
    CHECK(in_range(chair.params[1], 0.05, 0.12));
    CHECK(in_range(chair.params[2], -0.2, 0.1));
    CHECK(in_range(chair.params[3], 0.05, 0.09));
    CHECK(in_range(chair.params[4], -0.75, -0.45));
    CHECK(in_range(chair.params[5], 0.35, 0.7));
    CHECK(in_range(chair.params[6], 0.05, 0.1));
  }
}

TEST_CASE("occupancy boundary is closed") {
  // handmade parameters with exact float representations
  AnalyticShape box{0, 0, {0.5, 0.5, 0.25}};
  CHECK(occupied(box, {0, 0, 0}));
  CHECK(occupied(box, {0.5f, 0, 0}));
  CHECK(occupied(box, {0.5f, 0.5f, 0.25f}));
  CHECK_FALSE(occupied(box, {std::nextafter(0.5f, 1.0f), 0, 0}));
  CHECK_FALSE(occupied(box, {0, 0, std::nextafter(0.25f, 1.0f)}));
  CHECK_FALSE(occupied(box, {0.9f, 0, 0}));

  AnalyticShape sph{2, 0, {0.5}};
  CHECK(occupied(sph, {0, 0, 0}));
  CHECK(occupied(sph, {0.5f, 0, 0}));
  CHECK(occupied(sph, {0, -0.5f, 0}));
  CHECK_FALSE(occupied(sph, {std::nextafter(0.5f, 1.0f), 0, 0}));
  CHECK_FALSE(occupied(sph, {0.4f, 0.4f, 0}));

  AnalyticShape cyl{1, 0, {0.5, 0.25}};
  CHECK(occupied(cyl, {0.5f, 0, 0}));
  CHECK(occupied(cyl, {0, 0.5f, 0.25f}));
  CHECK_FALSE(occupied(cyl, {std::nextafter(0.5f, 1.0f), 0, 0}));
  CHECK_FALSE(occupied(cyl, {0, 0, std::nextafter(0.25f, 1.0f)}));
}

TEST_CASE("occupancy batch matches pointwise predicate") {
  for (int c = 0; c < kNumClasses; ++c) {
    AnalyticShape shape = make_shape(c, 3);
    std::vector<P3> pts = testutil::random_points(500, 100 + c);
    auto occ = occupancy(shape, pts);
    REQUIRE(occ.size() == pts.size());
    int inside = 0;
    for (size_t i = 0; i < pts.size(); ++i) {
      CHECK(occ[i] == (occupied(shape, pts[i]) ? 1 : 0));
      inside += occ[i];
    }
    CHECK(inside > 0);  // every class fills a visible chunk of the unit cube
    CHECK(inside < int(pts.size()));
  }
}

TEST_CASE("rasterized box occupancy count is exact") {
  AnalyticShape box{0, 0, {0.5, 0.5, 0.5}};
  OccupancyGrid g = rasterize_shape(box, 32);
  i64 count = 0;
  for (float v : g.v) count += v > 0.5f;
  // cell centers (2i+1-32)/32 fall inside |x|<=0.5 for i in [8,23]
  CHECK(count == 16 * 16 * 16);
}

TEST_CASE("surface samples are deterministic, bounded, and on the boundary") {
  for (int c = 0; c < kNumClasses; ++c) {
    AnalyticShape shape = make_shape(c, 11);
    PointCloud s1 = sample_surface_points(shape, 256, 5);
    PointCloud s2 = sample_surface_points(shape, 256, 5);
    PointCloud s3 = sample_surface_points(shape, 256, 6);
    REQUIRE(s1.size() == 256);
    CHECK(same_multiset(s1.pts, s2.pts));
    CHECK_FALSE(same_multiset(s1.pts, s3.pts));
    for (const auto& p : s1.pts)
      for (float v : p) CHECK(std::abs(v) <= 1.0f);
  }

  AnalyticShape box = make_shape(0, 2);
  const double hx = box.params[0], hy = box.params[1], hz = box.params[2];
  PointCloud s = sample_surface_points(box, 512, 9);
  for (const auto& p : s.pts) {
    const double m =
        std::max({std::abs(p[0]) / hx, std::abs(p[1]) / hy, std::abs(p[2]) / hz});
    CHECK(m == doctest::Approx(1.0).epsilon(1e-5));
  }

  AnalyticShape sph = make_shape(2, 2);
  const double r = sph.params[0];
  s = sample_surface_points(sph, 512, 9);
  for (const auto& p : s.pts) {
    const double n = std::sqrt(double(p[0]) * p[0] + double(p[1]) * p[1] +
                               double(p[2]) * p[2]);
    CHECK(n == doctest::Approx(r).epsilon(1e-5));
  }

  AnalyticShape cyl = make_shape(1, 2);
  const double cr = cyl.params[0], ch = cyl.params[1];
  s = sample_surface_points(cyl, 512, 9);
  for (const auto& p : s.pts) {
    const double rr = std::sqrt(double(p[0]) * p[0] + double(p[1]) * p[1]);
    CHECK(rr <= cr * (1 + 1e-5));
    CHECK(std::abs(p[2]) <= ch * (1 + 1e-5));
    const bool on_side = std::abs(rr - cr) < 1e-4;
    const bool on_cap = std::abs(std::abs(p[2]) - ch) < 1e-4;
    CHECK((on_side || on_cap));
  }
}

TEST_CASE("training point batches carry exact occupancy labels") {
  for (int c = 0; c < kNumClasses; ++c) {
    AnalyticShape shape = make_shape(c, 17);
    OccupancySample batch = sample_training_points(shape, 128, 64, 3);
    REQUIRE(batch.positions.size() == 192);
    REQUIRE(batch.labels.size() == 192);
    auto occ = occupancy(shape, batch.positions);
    int pos = 0;
    for (size_t i = 0; i < occ.size(); ++i) {
      CHECK(batch.labels[i] == float(occ[i]));
      pos += occ[i];
      for (float v : batch.positions[i]) CHECK(std::abs(v) <= 1.0f);
    }
    CHECK(pos > 0);

    OccupancySample again = sample_training_points(shape, 128, 64, 3);
    for (size_t i = 0; i < batch.positions.size(); ++i)
      CHECK(same_point(batch.positions[i], again.positions[i]));
  }
}

TEST_CASE("viewpoint partials subset the input and drop the far side") {
  AnalyticShape shape = make_shape(3, 4);
  PointCloud cloud = sample_surface_points(shape, 400, 21);
  const double fraction = 0.5;
  PointCloud part = make_partial_viewpoint(cloud, fraction, 77);
  PointCloud part2 = make_partial_viewpoint(cloud, fraction, 77);

  REQUIRE(part.size() == cloud.size());
  CHECK(same_multiset(part.pts, part2.pts));
  for (const auto& p : part.pts) CHECK(in_cloud(p, cloud));
  CHECK(unidirectional_hausdorff(part, cloud) == 0.0);

  const size_t drop = size_t(std::ceil(fraction * cloud.size()));
  CHECK(distinct_count(part) <= cloud.size() - drop);
  CHECK(distinct_count(part) >= 1);

  // a different seed picks a different viewpoint
  PointCloud other = make_partial_viewpoint(cloud, fraction, 78);
  CHECK_FALSE(same_multiset(part.pts, other.pts));

  // fraction 0 keeps the whole cloud (possibly reordered)
  PointCloud keep = make_partial_viewpoint(cloud, 0.0, 5);
  CHECK(same_multiset(keep.pts, cloud.pts));
}

TEST_CASE("bottom partials keep only the lower half") {
  AnalyticShape shape = make_shape(4, 9);
  PointCloud cloud = sample_surface_points(shape, 300, 13);
  float zmin = 1e9f, zmax = -1e9f;
  for (const auto& p : cloud.pts) {
    zmin = std::min(zmin, p[2]);
    zmax = std::max(zmax, p[2]);
  }
  const float zmid = 0.5f * (zmin + zmax);

  PointCloud part = make_partial_bottom(cloud, 31);
  REQUIRE(part.size() == cloud.size());
  for (const auto& p : part.pts) {
    CHECK(p[2] <= zmid);
    CHECK(in_cloud(p, cloud));
  }
  PointCloud again = make_partial_bottom(cloud, 31);
  CHECK(same_multiset(part.pts, again.pts));
}

TEST_CASE("resample_to handles equal, shrink, and grow") {
  PointCloud c;
  c.pts = testutil::random_points(20, 8);

  PointCloud same = resample_to(c, 20, 3);
  REQUIRE(same.size() == 20);
  for (int i = 0; i < 20; ++i) CHECK(same_point(same.pts[i], c.pts[i]));

  PointCloud small = resample_to(c, 7, 3);
  REQUIRE(small.size() == 7);
  CHECK(distinct_count(small) == 7);
  for (const auto& p : small.pts) CHECK(in_cloud(p, c));

  PointCloud big = resample_to(c, 33, 3);
  REQUIRE(big.size() == 33);
  for (const auto& p : big.pts) CHECK(in_cloud(p, c));
  // every original survives at the front
  for (int i = 0; i < 20; ++i) CHECK(same_point(big.pts[i], c.pts[i]));
  CHECK(distinct_count(big) == 20);
}

TEST_CASE("dataset splits are class major with disjoint seeds") {
  DatasetSpec spec;
  spec.per_class_train = 4;
  spec.per_class_test = 2;
  spec.cloud_points = 64;
  spec.occ_uniform = 32;
  spec.occ_near = 32;
  Dataset train = make_dataset(spec, "train");
  Dataset test = make_dataset(spec, "test");
  REQUIRE(train.size() == 20);
  REQUIRE(test.size() == 10);

  std::set<u64> train_seeds, test_seeds;
  for (size_t i = 0; i < train.records.size(); ++i) {
    const auto& r = train.records[i];
    CHECK(r.shape.class_id == int(i) / 4);
    CHECK(r.cloud.size() == 64);
    CHECK(r.occ.positions.size() == 64);
    train_seeds.insert(r.shape.seed);
    AnalyticShape ref = make_shape(r.shape.class_id, r.shape.seed);
    REQUIRE(ref.params.size() == r.shape.params.size());
    for (size_t k = 0; k < ref.params.size(); ++k) CHECK(ref.params[k] == r.shape.params[k]);
  }
  for (const auto& r : test.records) test_seeds.insert(r.shape.seed);
  for (u64 s : train_seeds) CHECK(test_seeds.count(s) == 0);

  Dataset train2 = make_dataset(spec, "train");
  for (size_t i = 0; i < train.records.size(); ++i) {
    const auto& a = train.records[i].cloud.pts;
    const auto& b = train2.records[i].cloud.pts;
    REQUIRE(a.size() == b.size());
    for (size_t k = 0; k < a.size(); ++k) CHECK(same_point(a[k], b[k]));
  }
}

TEST_CASE("dataset archive round trips through disk") {
  DatasetSpec spec;
  spec.per_class_train = 2;
  spec.per_class_test = 1;
  spec.cloud_points = 32;
  spec.occ_uniform = 16;
  spec.occ_near = 16;
  Dataset train = make_dataset(spec, "train");

  const std::string dir = testutil::fresh_dir("dataset_rt");
  write_dataset(train, dir);
  Dataset loaded = read_dataset(dir);
  CHECK(loaded.split == "train");
  REQUIRE(loaded.size() == train.size());
  for (size_t i = 0; i < train.records.size(); ++i) {
    const auto& a = train.records[i];
    const auto& b = loaded.records[i];
    CHECK(a.shape.class_id == b.shape.class_id);
    CHECK(a.shape.seed == b.shape.seed);
    REQUIRE(a.cloud.size() == b.cloud.size());
    for (size_t k = 0; k < a.cloud.pts.size(); ++k)
      CHECK(same_point(a.cloud.pts[k], b.cloud.pts[k]));
    REQUIRE(a.occ.positions.size() == b.occ.positions.size());
    for (size_t k = 0; k < a.occ.labels.size(); ++k)
      CHECK(a.occ.labels[k] == b.occ.labels[k]);
  }

  // identical content in a second directory fingerprints identically
  const std::string dir2 = testutil::fresh_dir("dataset_rt2");
  write_dataset(train, dir2);
  CHECK(dataset_fingerprint(dir) == dataset_fingerprint(dir2));
}
