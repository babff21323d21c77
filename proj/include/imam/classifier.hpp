#pragma once

#include <memory>

#include "imam/dataset.hpp"
#include "imam/nn.hpp"

namespace imam {

struct ClassifierConfig {
  int classes = kNumClasses;
  int width1 = 64;
  int width2 = 128;
  int fc_dim = 64;
  int feature_dim = 32;
};

// Permutation-invariant point classifier: shared per-point MLP, channelwise
// max pool, small head. The penultimate activation is the shape feature used
// by the Frechet metric and by feature-conditioned generation.
struct PointClassifier {
  ClassifierConfig cfg;
  Linear<float> p1, p2;
  Linear<float> f1, f2, f3;
  ParamStore<float> params;
  std::vector<int> pool_idx;  // argmax rows of the last tracked forward

  PointClassifier(const ClassifierConfig& cfg_, u64 init_seed);
  PointClassifier(const PointClassifier&) = delete;
  PointClassifier& operator=(const PointClassifier&) = delete;

  Seq<float> forward(const PointCloud& cloud, bool track, std::vector<float>* feature);
  void backward(const Seq<float>& dlogits);

  int classify(const PointCloud& cloud);
  std::vector<float> features(const PointCloud& cloud);
};

struct ClassifierTrainSettings {
  int iters = 4000;
  int batch = 16;
  double lr = 1e-3;
  int subsample = 512;   // training points drawn per cloud per step
  double jitter = 0.01;  // isotropic noise sigma during training
};

std::unique_ptr<PointClassifier> train_toy_classifier(
    const Dataset& train, u64 seed,
    const ClassifierTrainSettings& settings = ClassifierTrainSettings(),
    json* log = nullptr);

double classifier_accuracy(PointClassifier& clf, const std::vector<PointCloud>& clouds,
                           const std::vector<int>& labels);

// Fraction of class-conditioned samples classified as their target class.
double condition_accuracy(PointClassifier& clf, const std::vector<PointCloud>& clouds,
                          const std::vector<int>& target_class);

// Frechet distance between Gaussian fits of classifier features.
double fpd(PointClassifier& clf, const std::vector<PointCloud>& gen,
           const std::vector<PointCloud>& ref);

}  // namespace imam
