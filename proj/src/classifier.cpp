#include "imam/classifier.hpp"

#include "imam/metrics.hpp"

namespace imam {

PointClassifier::PointClassifier(const ClassifierConfig& cfg_, u64 init_seed)
    : cfg(cfg_) {
  p1 = Linear<float>(3, cfg.width1, Act::relu);
  p2 = Linear<float>(cfg.width1, cfg.width2, Act::relu);
  f1 = Linear<float>(cfg.width2, cfg.fc_dim, Act::relu);
  f2 = Linear<float>(cfg.fc_dim, cfg.feature_dim, Act::relu);
  f3 = Linear<float>(cfg.feature_dim, cfg.classes, Act::none);
  Rng rng(hash_seed({init_seed, 0xc1f5ull}));
  p1.init(rng);
  p2.init(rng);
  f1.init(rng);
  f2.init(rng);
  f3.init(rng);
  p1.reg(params, "p1");
  p2.reg(params, "p2");
  f1.reg(params, "f1");
  f2.reg(params, "f2");
  f3.reg(params, "f3");
}

Seq<float> PointClassifier::forward(const PointCloud& cloud, bool track,
                                    std::vector<float>* feature) {
  const int n = cloud.size();
  if (n < 1) throw Error("classifier: empty cloud");
  Seq<float> x(n, 3);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) x.at(i, k) = cloud.pts[i][k];
  const Seq<float> h = p2.fwd(p1.fwd(x, track), track);

  Seq<float> pooled(1, cfg.width2);
  std::vector<int> idx(cfg.width2, 0);
  for (int c = 0; c < cfg.width2; ++c) {
    float best = h.at(0, c);
    for (int i = 1; i < n; ++i)
      if (h.at(i, c) > best) {
        best = h.at(i, c);
        idx[c] = i;
      }
    pooled.at(0, c) = best;
  }
  if (track) pool_idx = std::move(idx);

  const Seq<float> feat = f2.fwd(f1.fwd(pooled, track), track);
  if (feature) feature->assign(feat.row(0), feat.row(0) + cfg.feature_dim);
  return f3.fwd(feat, track);
}

void PointClassifier::backward(const Seq<float>& dlogits) {
  const Seq<float> dpool = f1.bwd(f2.bwd(f3.bwd(dlogits)));
  const int n = p2.ctx.back().x.n;
  Seq<float> dh(n, cfg.width2);
  for (int c = 0; c < cfg.width2; ++c) dh.at(pool_idx[c], c) = dpool.at(0, c);
  p1.bwd(p2.bwd(dh));
}

int PointClassifier::classify(const PointCloud& cloud) {
  const Seq<float> logits = forward(cloud, /*track=*/false, nullptr);
  int best = 0;
  for (int c = 1; c < cfg.classes; ++c)
    if (logits.at(0, c) > logits.at(0, best)) best = c;
  return best;
}

std::vector<float> PointClassifier::features(const PointCloud& cloud) {
  std::vector<float> feat;
  forward(cloud, /*track=*/false, &feat);
  return feat;
}

std::unique_ptr<PointClassifier> train_toy_classifier(
    const Dataset& train, u64 seed, const ClassifierTrainSettings& settings,
    json* log) {
  if (train.size() < 1) throw Error("classifier training set is empty");
  auto clf = std::make_unique<PointClassifier>(ClassifierConfig(), seed);
  Adam<float> opt;
  opt.lr = settings.lr;

  for (int iter = 0; iter < settings.iters; ++iter) {
    clf->params.zero_grad();
    double loss_sum = 0;
    Rng pick(hash_seed({seed, 0xc1a55ull, u64(iter)}));
    for (int b = 0; b < settings.batch; ++b) {
      const int rec = int(pick.uniform_int(u64(train.size())));
      const auto& full = train.records[rec].cloud;
      Rng aug(hash_seed({seed, 0xc1a55ull, u64(iter), u64(b) + 1}));
      PointCloud cloud;
      cloud.pts.resize(settings.subsample);
      for (auto& p : cloud.pts) {
        const auto& src = full.pts[aug.uniform_int(u64(full.size()))];
        for (int k = 0; k < 3; ++k)
          p[k] = float(src[k] + settings.jitter * aug.normal(0, 1));
      }
      Seq<float> logits = clf->forward(cloud, /*track=*/true, nullptr);
      Seq<float> dl;
      loss_sum += softmax_nll(logits, {train.records[rec].shape.class_id}, &dl);
      clf->backward(dl);
    }
    clf->params.scale_grad(1.0f / settings.batch);
    opt.step(clf->params);
    if (log && (iter % 200 == 0 || iter == settings.iters - 1))
      log->push_back({{"iter", iter}, {"loss", loss_sum / settings.batch}});
  }
  return clf;
}

double classifier_accuracy(PointClassifier& clf, const std::vector<PointCloud>& clouds,
                           const std::vector<int>& labels) {
  if (clouds.empty() || clouds.size() != labels.size())
    throw Error("classifier_accuracy: size mismatch");
  int correct = 0;
  for (size_t i = 0; i < clouds.size(); ++i)
    if (clf.classify(clouds[i]) == labels[i]) ++correct;
  return double(correct) / double(clouds.size());
}

double condition_accuracy(PointClassifier& clf, const std::vector<PointCloud>& clouds,
                          const std::vector<int>& target_class) {
  return classifier_accuracy(clf, clouds, target_class);
}

double fpd(PointClassifier& clf, const std::vector<PointCloud>& gen,
           const std::vector<PointCloud>& ref) {
  std::vector<std::vector<float>> fg, fr;
  fg.reserve(gen.size());
  fr.reserve(ref.size());
  for (const auto& c : gen) fg.push_back(clf.features(c));
  for (const auto& c : ref) fr.push_back(clf.features(c));
  return frechet_distance(fg, fr);
}

}  // namespace imam
