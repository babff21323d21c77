#include "imam/checkpoint.hpp"

#include <set>

namespace imam {

static json adam_to_json(const Adam<float>& a) {
  return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2},
          {"eps", a.eps}, {"t", a.t}};
}

static Adam<float> adam_from_json(const json& j) {
  Adam<float> a;
  a.lr = j["lr"].get<double>();
  a.beta1 = j["beta1"].get<double>();
  a.beta2 = j["beta2"].get<double>();
  a.eps = j["eps"].get<double>();
  a.t = j["t"].get<i64>();
  return a;
}

static void params_to_archive(const ParamStore<float>& store, Archive& a) {
  for (const auto* p : store.params) {
    std::vector<i64> shape(p->shape.begin(), p->shape.end());
    a.put_f32("w:" + p->name, shape, p->w.data());
    a.put_f32("m:" + p->name, shape, p->m.data());
    a.put_f32("v:" + p->name, shape, p->v.data());
  }
}

static void params_from_archive(ParamStore<float>& store, const Archive& a) {
  std::set<std::string> expected;
  for (auto* p : store.params) {
    for (const char* pre : {"w:", "m:", "v:"}) expected.insert(pre + p->name);
    const auto& ref = a.get("w:" + p->name);
    const std::vector<i64> shape(p->shape.begin(), p->shape.end());
    if (ref.shape != shape)
      throw FormatError("checkpoint shape mismatch for parameter " + p->name);
    const auto load = [&](const char* pre, std::vector<float>& dst) {
      const auto vals = a.get_f32(pre + p->name);
      if (i64(vals.size()) != p->count())
        throw FormatError("checkpoint size mismatch for parameter " + p->name);
      dst = vals;
    };
    load("w:", p->w);
    load("m:", p->m);
    load("v:", p->v);
  }
  for (const auto& arr : a.arrays)
    if (arr.name.compare(0, 2, "w:") == 0 || arr.name.compare(0, 2, "m:") == 0 ||
        arr.name.compare(0, 2, "v:") == 0)
      if (!expected.count(arr.name))
        throw FormatError("checkpoint carries unknown parameter " + arr.name);
}

static Archive make_header(const std::string& kind, const RunConfig& cfg,
                           const TrainMeta& meta) {
  Archive a;
  a.meta["section"] = "CKPT";
  a.meta["version"] = kCheckpointVersion;
  a.meta["kind"] = kind;
  a.meta["iteration"] = meta.iteration;
  a.meta["adam"] = adam_to_json(meta.opt);
  a.meta["config"] = run_config_to_json(cfg);
  return a;
}

static void check_header(const Archive& a, const std::string& kind) {
  if (!a.meta.contains("section") || a.meta["section"] != "CKPT")
    throw FormatError("not a checkpoint file");
  if (!a.meta.contains("version") || int(a.meta["version"]) != kCheckpointVersion)
    throw VersionError("unsupported checkpoint version");
  const std::string found = a.meta.value("kind", "");
  if (found != kind)
    throw FormatError("checkpoint kind mismatch: expected " + kind + ", found " + found);
}

void save_stage1_checkpoint(const std::string& path, const Stage1Model<float>& model,
                            const RunConfig& cfg, const TrainMeta& meta) {
  Archive a = make_header("stage1", cfg, meta);
  params_to_archive(model.params, a);
  a.put_i64("book.usage", {i64(model.book.usage.size())}, model.book.usage.data());
  write_archive(path, a);
}

void save_prior_checkpoint(const std::string& path, const Prior<float>& model,
                           const RunConfig& cfg, const TrainMeta& meta) {
  Archive a = make_header("prior", cfg, meta);
  params_to_archive(model.params, a);
  write_archive(path, a);
}

void save_classifier_checkpoint(const std::string& path, const PointClassifier& clf,
                                u64 init_seed) {
  Archive a;
  a.meta["section"] = "CKPT";
  a.meta["version"] = kCheckpointVersion;
  a.meta["kind"] = "classifier";
  a.meta["seed"] = init_seed;
  a.meta["config"] = {{"classes", clf.cfg.classes},
                      {"width1", clf.cfg.width1},
                      {"width2", clf.cfg.width2},
                      {"fc_dim", clf.cfg.fc_dim},
                      {"feature_dim", clf.cfg.feature_dim}};
  params_to_archive(clf.params, a);
  write_archive(path, a);
}

Stage1Checkpoint load_stage1_checkpoint(const std::string& path) {
  const Archive a = read_archive(path);
  check_header(a, "stage1");
  Stage1Checkpoint ck;
  ck.cfg = run_config_from_json(a.meta["config"]);
  ck.meta.iteration = a.meta["iteration"].get<i64>();
  ck.meta.opt = adam_from_json(a.meta["adam"]);
  ck.model = std::make_unique<Stage1Model<float>>(stage1_config(ck.cfg), ck.cfg.seed);
  params_from_archive(ck.model->params, a);
  const auto usage = a.get_i64("book.usage");
  if (usage.size() != ck.model->book.usage.size())
    throw FormatError("checkpoint codebook usage size mismatch");
  ck.model->book.usage = usage;
  return ck;
}

PriorCheckpoint load_prior_checkpoint(const std::string& path) {
  const Archive a = read_archive(path);
  check_header(a, "prior");
  PriorCheckpoint ck;
  ck.cfg = run_config_from_json(a.meta["config"]);
  ck.meta.iteration = a.meta["iteration"].get<i64>();
  ck.meta.opt = adam_from_json(a.meta["adam"]);
  ck.model = std::make_unique<Prior<float>>(prior_config(ck.cfg), ck.cfg.seed);
  params_from_archive(ck.model->params, a);
  return ck;
}

std::unique_ptr<PointClassifier> load_classifier_checkpoint(const std::string& path) {
  const Archive a = read_archive(path);
  check_header(a, "classifier");
  ClassifierConfig cfg;
  const json& c = a.meta["config"];
  cfg.classes = c["classes"].get<int>();
  cfg.width1 = c["width1"].get<int>();
  cfg.width2 = c["width2"].get<int>();
  cfg.fc_dim = c["fc_dim"].get<int>();
  cfg.feature_dim = c["feature_dim"].get<int>();
  auto clf = std::make_unique<PointClassifier>(cfg, a.meta["seed"].get<u64>());
  params_from_archive(clf->params, a);
  return clf;
}

std::string checkpoint_kind(const std::string& path) {
  const Archive a = read_archive(path);
  if (!a.meta.contains("section") || a.meta["section"] != "CKPT")
    throw FormatError("not a checkpoint file");
  return a.meta.value("kind", "");
}

}  // namespace imam
