#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "imam/classifier.hpp"
#include "test_util.hpp"

using namespace imam;

TEST_CASE("classifier logits are permutation invariant") {
  PointClassifier clf(ClassifierConfig{}, 5);
  PointCloud cloud = testutil::random_cloud(64, 9);

  std::vector<float> feat_a;
  const Seq<float> logits_a = clf.forward(cloud, false, &feat_a);
  REQUIRE(logits_a.n == 1);
  REQUIRE(logits_a.d == clf.cfg.classes);
  REQUIRE(int(feat_a.size()) == clf.cfg.feature_dim);

  PointCloud shuffled = cloud;
  Rng rng(3);
  rng.shuffle(shuffled.pts);
  std::vector<float> feat_b;
  const Seq<float> logits_b = clf.forward(shuffled, false, &feat_b);

  // channelwise max pooling makes the order irrelevant, bit for bit
  for (int k = 0; k < logits_a.d; ++k) CHECK(logits_a.at(0, k) == logits_b.at(0, k));
  for (size_t k = 0; k < feat_a.size(); ++k) CHECK(feat_a[k] == feat_b[k]);

  CHECK(clf.classify(cloud) == clf.classify(shuffled));
  CHECK(clf.features(cloud) == clf.features(shuffled));
}

TEST_CASE("accuracy helpers count matches") {
  PointClassifier clf(ClassifierConfig{}, 8);
  std::vector<PointCloud> clouds;
  std::vector<int> labels;
  for (int i = 0; i < 6; ++i) {
    clouds.push_back(testutil::random_cloud(32, 50 + u64(i)));
    labels.push_back(clf.classify(clouds.back()));
  }
  CHECK(classifier_accuracy(clf, clouds, labels) == 1.0);
  CHECK(condition_accuracy(clf, clouds, labels) == 1.0);

  std::vector<int> wrong = labels;
  for (auto& l : wrong) l = (l + 1) % clf.cfg.classes;
  CHECK(classifier_accuracy(clf, clouds, wrong) == 0.0);
}

TEST_CASE("feature-based distance vanishes on identical sets") {
  PointClassifier clf(ClassifierConfig{}, 2);
  std::vector<PointCloud> set;
  for (int i = 0; i < 40; ++i) set.push_back(testutil::random_cloud(48, 80 + u64(i)));
  CHECK(fpd(clf, set, set) <= 1e-6);
}

TEST_CASE("short training separates the toy classes") {
  DatasetSpec spec;
  spec.per_class_train = 6;
  spec.per_class_test = 2;
  spec.cloud_points = 256;
  spec.occ_uniform = 16;
  spec.occ_near = 16;
  const Dataset train = make_dataset(spec, "train");
  const Dataset test = make_dataset(spec, "test");

  ClassifierTrainSettings settings;
  settings.iters = 300;
  settings.batch = 8;
  settings.subsample = 128;
  json log = json::array();
  auto clf = train_toy_classifier(train, 7, settings, &log);
  REQUIRE(clf != nullptr);

  std::vector<PointCloud> clouds;
  std::vector<int> labels;
  for (const auto& r : train.records) {
    clouds.push_back(r.cloud);
    labels.push_back(r.shape.class_id);
  }
  const double train_acc = classifier_accuracy(*clf, clouds, labels);
  CHECK(train_acc > 1.0 / kNumClasses);  // clearly better than chance

  // training is deterministic in the seed
  auto clf2 = train_toy_classifier(train, 7, settings, nullptr);
  for (size_t pi = 0; pi < clf->params.params.size(); ++pi) {
    const auto* a = clf->params.params[pi];
    const auto* b = clf2->params.params[pi];
    REQUIRE(a->w.size() == b->w.size());
    for (size_t k = 0; k < a->w.size(); ++k) CHECK(a->w[k] == b->w[k]);
  }

  CHECK(log.is_array());
  CHECK(!log.empty());
  CHECK(log.front().contains("loss"));
}
