#include "imam/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

namespace imam {

namespace fs = std::filesystem;

std::string run_dir(const RunConfig& cfg) {
  const std::string dir = cfg.out_dir + "/" + cfg.tag;
  fs::create_directories(dir);
  return dir;
}

static std::string cache_dir(const RunConfig& cfg) {
  const std::string dir = cfg.out_dir + "/cache";
  fs::create_directories(dir);
  return dir;
}

static void require_exists(const std::string& path, const char* what) {
  if (path.empty() || !fs::exists(path))
    throw IoError(std::string("missing ") + what + ": " +
                  (path.empty() ? "(no path given)" : path));
}

static json finish_record(const RunConfig& cfg, const std::string& command,
                          json inputs, json results) {
  json rec;
  rec["command"] = command;
  rec["config"] = run_config_to_json(cfg);
  rec["inputs"] = std::move(inputs);
  rec["results"] = std::move(results);
  write_json_file(run_dir(cfg) + "/" + command + ".json", rec);
  return rec;
}

static Dataset load_split(const RunConfig& cfg, const std::string& split) {
  const std::string dir = cfg.resolved_data_dir() + "/" + split;
  if (!fs::exists(dir + "/manifest.json"))
    throw IoError("missing dataset: " + dir + " (run gen-data first)");
  return read_dataset(dir);
}

static std::string split_fingerprint(const RunConfig& cfg, const std::string& split) {
  return dataset_fingerprint(cfg.resolved_data_dir() + "/" + split);
}

void write_cloud_set(const std::string& path, const CloudSet& set, const json& meta) {
  if (set.clouds.empty()) throw Error("write_cloud_set: empty set");
  const i64 n = i64(set.clouds.size());
  const i64 p = set.clouds[0].size();
  std::vector<float> flat(size_t(n) * p * 3);
  for (i64 i = 0; i < n; ++i) {
    if (set.clouds[i].size() != p) throw Error("write_cloud_set: ragged clouds");
    for (i64 j = 0; j < p; ++j)
      for (int k = 0; k < 3; ++k)
        flat[(size_t(i) * p + j) * 3 + k] = set.clouds[i].pts[j][k];
  }
  Archive a;
  a.meta = meta;
  a.meta["kind"] = "clouds";
  a.put_f32("clouds", {n, p, 3}, flat.data());
  if (!set.class_ids.empty()) {
    if (i64(set.class_ids.size()) != n)
      throw Error("write_cloud_set: class id count mismatch");
    std::vector<i64> ids(set.class_ids.begin(), set.class_ids.end());
    a.put_i64("class_ids", {n}, ids.data());
  }
  write_archive(path, a);
}

CloudSet read_cloud_set(const std::string& path) {
  std::string file = path;
  if (fs::is_directory(path)) file = path + "/clouds.imam";
  require_exists(file, "cloud set");
  const Archive a = read_archive(file);
  const auto& arr = a.get("clouds");
  if (arr.shape.size() != 3 || arr.shape[2] != 3)
    throw FormatError("cloud set must have shape [n, p, 3]");
  const auto flat = a.get_f32("clouds");
  CloudSet set;
  const i64 n = arr.shape[0], p = arr.shape[1];
  set.clouds.resize(n);
  for (i64 i = 0; i < n; ++i) {
    set.clouds[i].pts.resize(p);
    for (i64 j = 0; j < p; ++j)
      for (int k = 0; k < 3; ++k)
        set.clouds[i].pts[j][k] = flat[(size_t(i) * p + j) * 3 + k];
  }
  if (a.has("class_ids")) {
    const auto ids = a.get_i64("class_ids");
    set.class_ids.assign(ids.begin(), ids.end());
  }
  return set;
}

std::unique_ptr<PointClassifier> obtain_classifier(const RunConfig& cfg,
                                                   const std::string& path) {
  if (!path.empty()) {
    require_exists(path, "checkpoint");
    return load_classifier_checkpoint(path);
  }
  const Dataset train = load_split(cfg, "train");
  const std::string key =
      config_fingerprint(cfg, {"classifier", split_fingerprint(cfg, "train")});
  const std::string cached = cache_dir(cfg) + "/clf-" + key + ".ckpt";
  if (fs::exists(cached)) return load_classifier_checkpoint(cached);
  std::fprintf(stderr, "training toy classifier (%d shapes)\n", train.size());
  auto clf = train_toy_classifier(train, cfg.seed);
  save_classifier_checkpoint(cached, *clf, cfg.seed);
  return clf;
}

std::unique_ptr<Stage1Model<float>> clone_stage1_with_order(
    const Stage1Model<float>& src, const RunConfig& cfg, const std::string& order) {
  RunConfig c2 = cfg;
  c2.flatten_order = order;
  auto dst = std::make_unique<Stage1Model<float>>(stage1_config(c2), c2.seed);
  for (auto* p : dst->params.params) {
    const Param<float>* q = src.params.find(p->name);
    if (!q || q->shape != p->shape)
      throw Error("order clone parameter mismatch: " + p->name);
    p->w = q->w;
    p->m = q->m;
    p->v = q->v;
  }
  dst->book.usage = src.book.usage;
  return dst;
}

static PointCloud degenerate_cloud(int points) {
  PointCloud c;
  c.pts.assign(points, P3{0, 0, 0});
  return c;
}

SampledSet sample_clouds(Prior<float>& prior, Stage1Model<float>& stage1,
                         const Condition& cond, int count, int res, int cloud_points,
                         int top_k, double temperature, u64 seed) {
  SampledSet out;
  for (int i = 0; i < count; ++i) {
    std::vector<int> codes =
        prior.sample(cond, top_k, temperature, hash_seed({seed, u64(i)}));
    Mesh mesh = stage1.mesh_from_codes(codes, res);
    if (mesh.empty()) {
      ++out.empty_meshes;
      out.set.clouds.push_back(degenerate_cloud(cloud_points));
    } else {
      out.set.clouds.push_back(
          sample_mesh_points(mesh, cloud_points, hash_seed({seed, u64(i), 1})));
    }
    out.codes.push_back(std::move(codes));
    out.meshes.push_back(std::move(mesh));
  }
  return out;
}

// Layout keys that must agree between a stage-1 checkpoint and the prior
// that consumes its codes.
static json layout_signature(const RunConfig& c) {
  const Stage1Config s = stage1_config(c);
  return json{{"mode", rep_mode_name(s.enc.mode)},
              {"plane_res", s.enc.plane_res},
              {"down_res", s.enc.down_res},
              {"feat_dim", s.enc.feat_dim},
              {"trunk_dim", s.enc.trunk_dim},
              {"code_dim", s.enc.code_dim},
              {"aggregation", aggregation_name(s.enc.aggregation)},
              {"flatten_order", s.enc.flatten_order},
              {"grid_res", s.enc.grid_res},
              {"grid_down_res", s.enc.grid_down_res},
              {"codebook_entries", s.codebook_entries}};
}

static void check_layout(const RunConfig& a, const RunConfig& b, const char* what) {
  if (layout_signature(a) != layout_signature(b))
    throw ConfigError(std::string("stage-1 layout mismatch: ") + what);
}

json cmd_gen_data(const RunConfig& cfg) {
  const DatasetSpec spec = dataset_spec(cfg);
  const std::string root = cfg.resolved_data_dir();
  json results;
  for (const char* split : {"train", "test"}) {
    const Dataset ds = make_dataset(spec, split);
    write_dataset(ds, root + "/" + split);
    results[split] = {{"shapes", ds.size()},
                      {"dir", root + std::string("/") + split},
                      {"fingerprint", dataset_fingerprint(root + "/" + split)}};
    std::printf("gen-data: wrote %d %s shapes to %s/%s\n", ds.size(), split,
                root.c_str(), split);
  }
  return finish_record(cfg, "gen-data", json::object(), results);
}

json cmd_train_ae(const RunConfig& cfg, const std::string& resume) {
  const Dataset train = load_split(cfg, "train");
  std::unique_ptr<Stage1Model<float>> model;
  TrainMeta meta;
  if (!resume.empty()) {
    require_exists(resume, "checkpoint");
    Stage1Checkpoint ck = load_stage1_checkpoint(resume);
    check_layout(ck.cfg, cfg, "resume checkpoint disagrees with the run config");
    model = std::move(ck.model);
    meta = ck.meta;
    meta.opt.lr = cfg.lr;
  } else {
    model = std::make_unique<Stage1Model<float>>(stage1_config(cfg), cfg.seed);
    meta.opt.lr = cfg.lr;
  }

  const std::string ckpt = run_dir(cfg) + "/stage1.ckpt";
  json log = json::array();
  train_stage1(*model, meta, train, cfg, ckpt, log);
  save_stage1_checkpoint(ckpt, *model, cfg, meta);
  write_json_file(run_dir(cfg) + "/train-ae-log.json", log);

  json results = {{"checkpoint", ckpt},
                  {"checkpoint_sha256", sha256_file(ckpt)},
                  {"iterations", meta.iteration},
                  {"log", run_dir(cfg) + "/train-ae-log.json"}};
  if (!log.empty()) {
    for (auto it = log.rbegin(); it != log.rend(); ++it)
      if (it->contains("loss")) {
        results["final_loss"] = (*it)["loss"];
        break;
      }
  }
  json inputs = {{cfg.resolved_data_dir() + "/train/data.imam",
                  split_fingerprint(cfg, "train")}};
  return finish_record(cfg, "train-ae", inputs, results);
}

json cmd_train_prior(const RunConfig& cfg, const std::string& stage1_path,
                     const std::string& classifier_path, const std::string& resume) {
  require_exists(stage1_path, "checkpoint");
  Stage1Checkpoint s1 = load_stage1_checkpoint(stage1_path);
  check_layout(s1.cfg, cfg, "stage-1 checkpoint disagrees with the run config");
  const Dataset train = load_split(cfg, "train");

  const CondMode mode = cond_mode_from_name(cfg.cond_mode);
  std::unique_ptr<PointClassifier> clf;
  if (mode == CondMode::feature) clf = obtain_classifier(cfg, classifier_path);
  std::fprintf(stderr, "pre-encoding %d shapes\n", train.size());
  const auto data = encode_dataset(*s1.model, train, cfg, mode, clf.get());

  std::unique_ptr<Prior<float>> prior;
  TrainMeta meta;
  if (!resume.empty()) {
    require_exists(resume, "checkpoint");
    PriorCheckpoint ck = load_prior_checkpoint(resume);
    check_layout(ck.cfg, cfg, "resume checkpoint disagrees with the run config");
    if (cond_mode_from_name(ck.cfg.cond_mode) != mode)
      throw ConfigError("resume checkpoint uses a different cond_mode");
    prior = std::move(ck.model);
    meta = ck.meta;
    meta.opt.lr = cfg.lr;
  } else {
    prior = std::make_unique<Prior<float>>(prior_config(cfg), cfg.seed);
    meta.opt.lr = cfg.lr;
  }

  const std::string ckpt = run_dir(cfg) + "/prior.ckpt";
  json log = json::array();
  train_prior(*prior, meta, data, cfg, ckpt, log);
  save_prior_checkpoint(ckpt, *prior, cfg, meta);
  write_json_file(run_dir(cfg) + "/train-prior-log.json", log);

  json results = {{"checkpoint", ckpt},
                  {"checkpoint_sha256", sha256_file(ckpt)},
                  {"iterations", meta.iteration},
                  {"cond_mode", cfg.cond_mode},
                  {"log", run_dir(cfg) + "/train-prior-log.json"}};
  if (!log.empty()) results["final_nll"] = log.back()["nll"];
  json inputs = {{stage1_path, sha256_file(stage1_path)},
                 {cfg.resolved_data_dir() + "/train/data.imam",
                  split_fingerprint(cfg, "train")}};
  return finish_record(cfg, "train-prior", inputs, results);
}

json cmd_reconstruct(const RunConfig& cfg, const std::string& stage1_path,
                     const std::string& split, int count, const std::string& out) {
  require_exists(stage1_path, "checkpoint");
  Stage1Checkpoint s1 = load_stage1_checkpoint(stage1_path);
  const Dataset ds = load_split(cfg, split);
  if (ds.size() == 0) throw Error("reconstruct: empty split");
  const int n = count > 0 ? std::min(count, ds.size()) : ds.size();
  const std::string dir = out.empty() ? run_dir(cfg) + "/recon" : out;
  fs::create_directories(dir);

  const int res = cfg.field_res;
  json rows = json::array();
  double iou_sum = 0, cd_sum = 0;
  int cd_count = 0;
  for (int i = 0; i < n; ++i) {
    const int rec = i * ds.size() / n;
    const auto& r = ds.records[rec];
    const OccupancyGrid pred = s1.model->field_from_points(r.cloud.pts, res);
    const OccupancyGrid truth = rasterize_shape(r.shape, res);
    const double iou = voxel_iou(pred, truth, s1.model->cfg.mc_threshold);
    const Mesh mesh = marching_cubes(pred, s1.model->cfg.mc_threshold);
    json row = {{"record", rec},
                {"class", class_name(r.shape.class_id)},
                {"iou", iou},
                {"empty_mesh", mesh.empty()}};
    if (!mesh.empty()) {
      char name[64];
      std::snprintf(name, sizeof name, "recon_%03d.obj", i);
      write_obj(dir + "/" + name, mesh);
      const PointCloud pts = sample_mesh_points(mesh, cfg.cloud_points,
                                                hash_seed({cfg.seed, 0x4ec0ull, u64(i)}));
      const double cd = chamfer_distance(pts, r.cloud);
      row["chamfer"] = cd;
      cd_sum += cd;
      ++cd_count;
    }
    iou_sum += iou;
    rows.push_back(std::move(row));
    std::fprintf(stderr, "reconstruct %d/%d iou %.4f\n", i + 1, n, iou);
  }
  json results = {{"split", split},
                  {"count", n},
                  {"resolution", res},
                  {"mean_iou", iou_sum / n},
                  {"out", dir},
                  {"shapes", rows}};
  if (cd_count > 0) results["mean_chamfer"] = cd_sum / cd_count;
  std::printf("reconstruct: mean voxel iou %.4f over %d %s shapes\n", iou_sum / n, n,
              split.c_str());
  json inputs = {{stage1_path, sha256_file(stage1_path)}};
  return finish_record(cfg, "reconstruct", inputs, results);
}

static void write_codes_archive(const std::string& path,
                                const std::vector<std::vector<int>>& codes,
                                const json& meta) {
  if (codes.empty()) return;
  const i64 n = i64(codes.size()), m = i64(codes[0].size());
  std::vector<i64> flat(size_t(n) * m);
  for (i64 i = 0; i < n; ++i)
    for (i64 j = 0; j < m; ++j) flat[size_t(i) * m + j] = codes[i][j];
  Archive a;
  a.meta = meta;
  a.meta["kind"] = "codes";
  a.put_i64("codes", {n, m}, flat.data());
  write_archive(path, a);
}

json cmd_sample(const RunConfig& cfg, const std::string& prior_path,
                const std::string& stage1_path, int count, int class_id,
                const std::string& feature_file, const std::string& out) {
  require_exists(prior_path, "checkpoint");
  require_exists(stage1_path, "checkpoint");
  PriorCheckpoint pr = load_prior_checkpoint(prior_path);
  Stage1Checkpoint s1 = load_stage1_checkpoint(stage1_path);
  check_layout(pr.cfg, s1.cfg, "prior and stage-1 checkpoints disagree");

  Condition cond;
  cond.mode = pr.model->cfg.cond;
  switch (cond.mode) {
    case CondMode::none:
      if (class_id >= 0 || !feature_file.empty())
        throw ConfigError("this prior was trained unconditionally");
      break;
    case CondMode::class_label:
      if (class_id < 0) throw ConfigError("this prior needs --class");
      if (class_id >= pr.model->cfg.n_classes)
        throw ConfigError("--class out of range");
      cond.class_id = class_id;
      break;
    case CondMode::feature: {
      if (feature_file.empty()) throw ConfigError("this prior needs --feature-vec");
      const json fv = read_json_file(feature_file);
      if (!fv.is_array() || int(fv.size()) != pr.model->cfg.feature_dim)
        throw ConfigError("feature vector must be a JSON array of " +
                          std::to_string(pr.model->cfg.feature_dim) + " numbers");
      for (const auto& v : fv) cond.feature.push_back(v.get<float>());
      break;
    }
    case CondMode::partial:
      throw ConfigError("this prior conditions on partial inputs; use complete");
  }

  const int res = cfg.eval_res > 0 ? cfg.eval_res : cfg.field_res;
  SampledSet gen = sample_clouds(*pr.model, *s1.model, cond, count, res,
                                 cfg.cloud_points, cfg.top_k, cfg.temperature,
                                 hash_seed({cfg.seed, 0x5ca1ull}));
  if (class_id >= 0) gen.set.class_ids.assign(count, class_id);

  const std::string dir = out.empty() ? run_dir(cfg) + "/samples" : out;
  fs::create_directories(dir);
  json meta = {{"count", count}, {"seed", cfg.seed}, {"resolution", res}};
  if (class_id >= 0) meta["class_id"] = class_id;
  write_cloud_set(dir + "/clouds.imam", gen.set, meta);
  write_codes_archive(dir + "/codes.imam", gen.codes, meta);
  for (int i = 0; i < count; ++i) {
    if (gen.meshes[i].empty()) continue;
    char name[64];
    std::snprintf(name, sizeof name, "mesh_%03d.obj", i);
    write_obj(dir + "/" + name, gen.meshes[i]);
  }

  std::printf("sample: wrote %d clouds to %s (%d empty meshes)\n", count, dir.c_str(),
              gen.empty_meshes);
  json results = {{"out", dir},
                  {"count", count},
                  {"empty_meshes", gen.empty_meshes},
                  {"clouds_sha256", sha256_file(dir + "/clouds.imam")},
                  {"top_k", cfg.top_k},
                  {"temperature", cfg.temperature}};
  if (class_id >= 0) results["class_id"] = class_id;
  json inputs = {{prior_path, sha256_file(prior_path)},
                 {stage1_path, sha256_file(stage1_path)}};
  return finish_record(cfg, "sample", inputs, results);
}

json cmd_complete(const RunConfig& cfg, const std::string& prior_path,
                  const std::string& stage1_path, const std::string& mode, int count,
                  int per_input, const std::string& out) {
  if (mode != "viewpoint" && mode != "bottom")
    throw ConfigError("complete --mode must be viewpoint or bottom");
  require_exists(prior_path, "checkpoint");
  require_exists(stage1_path, "checkpoint");
  PriorCheckpoint pr = load_prior_checkpoint(prior_path);
  Stage1Checkpoint s1 = load_stage1_checkpoint(stage1_path);
  check_layout(pr.cfg, s1.cfg, "prior and stage-1 checkpoints disagree");
  if (pr.model->cfg.cond != CondMode::partial)
    throw ConfigError("complete needs a prior trained with cond_mode=partial");
  const Dataset test = load_split(cfg, "test");
  if (test.size() == 0) throw Error("complete: empty test split");

  const int n = std::min(count, test.size());
  const int res = cfg.eval_res > 0 ? cfg.eval_res : cfg.field_res;
  const std::string dir = out.empty() ? run_dir(cfg) + "/completions" : out;
  fs::create_directories(dir);

  json rows = json::array();
  double uhd_sum = 0, base_sum = 0, tmd_min = -1;
  for (int i = 0; i < n; ++i) {
    const int rec = i * test.size() / n;
    const auto& r = test.records[rec];
    // the partial comes from an independent surface sampling, not from the
    // canonical cloud, so its distance to the reference stays meaningful
    const PointCloud fresh = sample_surface_points(
        r.shape, cfg.cloud_points, hash_seed({r.shape.seed, 0xa17full}));
    const PointCloud partial =
        mode == "viewpoint"
            ? make_partial_viewpoint(fresh, cfg.partial_fraction,
                                     hash_seed({r.shape.seed, 0x9e0bull}))
            : make_partial_bottom(fresh, hash_seed({r.shape.seed, 0x9e0cull}));

    Condition cond;
    cond.mode = CondMode::partial;
    cond.partial_codes = s1.model->encode_codes(partial.pts);

    SampledSet comp = sample_clouds(*pr.model, *s1.model, cond, per_input, res,
                                    cfg.cloud_points, cfg.complete_top_k,
                                    cfg.complete_temperature,
                                    hash_seed({cfg.seed, 0xc03full, u64(i)}));
    const double uhd = uhd_metric(partial, comp.set.clouds);
    const double base = unidirectional_hausdorff(partial, r.cloud);
    const double diversity = tmd(comp.set.clouds);
    uhd_sum += uhd;
    base_sum += base;
    tmd_min = tmd_min < 0 ? diversity : std::min(tmd_min, diversity);

    char name[64];
    std::snprintf(name, sizeof name, "partial_%03d.imam", i);
    CloudSet pset;
    pset.clouds.push_back(partial);
    write_cloud_set(dir + "/" + name, pset, {{"record", rec}, {"mode", mode}});
    std::snprintf(name, sizeof name, "completions_%03d.imam", i);
    write_cloud_set(dir + "/" + name, comp.set, {{"record", rec}});
    if (!comp.meshes[0].empty()) {
      std::snprintf(name, sizeof name, "completion_%03d.obj", i);
      write_obj(dir + "/" + name, comp.meshes[0]);
    }

    rows.push_back({{"record", rec},
                    {"class", class_name(r.shape.class_id)},
                    {"uhd", uhd},
                    {"baseline_uhd", base},
                    {"uhd_ratio", base > 0 ? uhd / base : 0.0},
                    {"tmd", diversity},
                    {"empty_meshes", comp.empty_meshes}});
    std::fprintf(stderr, "complete %d/%d uhd %.4f baseline %.4f tmd %.4f\n", i + 1, n,
                 uhd, base, diversity);
  }

  json results = {{"mode", mode},
                  {"inputs", n},
                  {"per_input", per_input},
                  {"resolution", res},
                  {"top_k", cfg.complete_top_k},
                  {"temperature", cfg.complete_temperature},
                  {"mean_uhd", uhd_sum / n},
                  {"mean_baseline_uhd", base_sum / n},
                  {"min_tmd", tmd_min},
                  {"out", dir},
                  {"rows", rows}};
  std::printf("complete: mean uhd %.4f vs baseline %.4f over %d inputs\n", uhd_sum / n,
              base_sum / n, n);
  json inputs = {{prior_path, sha256_file(prior_path)},
                 {stage1_path, sha256_file(stage1_path)}};
  return finish_record(cfg, "complete", inputs, results);
}

static std::vector<PointCloud> noise_clouds(int count, int points, u64 seed) {
  std::vector<PointCloud> out(count);
  for (int i = 0; i < count; ++i) {
    Rng rng(hash_seed({seed, 0x4015eull, u64(i)}));
    out[i].pts.resize(points);
    for (auto& p : out[i].pts)
      for (int k = 0; k < 3; ++k) p[k] = float(rng.uniform(-1.0, 1.0));
  }
  return out;
}

json cmd_evaluate(const RunConfig& cfg, const std::string& gen_path,
                  const std::string& ref_path, const std::string& classifier_path) {
  require_exists(gen_path, "generated cloud set");
  const CloudSet gen = read_cloud_set(gen_path);

  CloudSet ref;
  std::string ref_desc;
  if (!ref_path.empty()) {
    ref = read_cloud_set(ref_path);
    ref_desc = ref_path;
  } else {
    const Dataset test = load_split(cfg, "test");
    for (const auto& r : test.records) {
      ref.clouds.push_back(r.cloud);
      ref.class_ids.push_back(r.shape.class_id);
    }
    ref_desc = cfg.resolved_data_dir() + "/test";
  }
  if (gen.clouds.empty() || ref.clouds.empty())
    throw Error("evaluate: empty cloud set");

  std::fprintf(stderr, "evaluate: %zu generated vs %zu reference clouds\n",
               gen.clouds.size(), ref.clouds.size());
  const DistanceMatrix d = distance_matrix(gen.clouds, ref.clouds);
  const double cov = coverage(d);
  const double mmd_v = mmd(d);
  const double covt_t = cfg.covt_threshold > 0 ? cfg.covt_threshold : mmd_v;
  const double covt = covt_t > 0 ? coverage_thresholded(d, covt_t) : 0.0;
  const double covt_inf =
      coverage_thresholded(d, std::numeric_limits<double>::infinity());
  const UnionDistances u = union_distances(gen.clouds, ref.clouds);
  const double nna = nna_1_from(u);
  const double ecd_v = ecd_from(u);

  json metrics;
  metrics["cov"] = cov;
  metrics["covt"] = covt;
  metrics["covt_threshold"] = covt_t;
  metrics["covt_inf"] = covt_inf;
  metrics["mmd"] = mmd_v;
  metrics["nna_1"] = nna;
  metrics["ecd"] = ecd_v;

  std::unique_ptr<PointClassifier> clf;
  if (!classifier_path.empty()) {
    clf = obtain_classifier(cfg, classifier_path);
  } else {
    try {
      clf = obtain_classifier(cfg, "");
    } catch (const IoError&) {
      metrics["fpd"] = nullptr;  // no classifier and no dataset to train one
    }
  }
  if (clf) {
    metrics["fpd"] = fpd(*clf, gen.clouds, ref.clouds);
    if (!gen.class_ids.empty())
      metrics["condition_accuracy"] = condition_accuracy(*clf, gen.clouds, gen.class_ids);
    if (!ref.class_ids.empty())
      metrics["classifier_accuracy_ref"] =
          classifier_accuracy(*clf, ref.clouds, ref.class_ids);
  }
  if (cfg.noise_baseline) {
    const auto noise =
        noise_clouds(int(gen.clouds.size()), cfg.cloud_points, cfg.seed);
    metrics["noise_nna_1"] = nna_1(noise, ref.clouds);
  }

  for (auto it = metrics.begin(); it != metrics.end(); ++it)
    std::printf("%-24s %s\n", it.key().c_str(), it.value().dump().c_str());

  json results = {{"metrics", metrics},
                  {"backend", "chamfer"},
                  {"gen_size", gen.clouds.size()},
                  {"ref_size", ref.clouds.size()},
                  {"gen", gen_path},
                  {"ref", ref_desc}};
  json inputs = json::object();
  const auto archive_file = [](const std::string& p) {
    return fs::is_directory(p) ? p + "/clouds.imam" : p;
  };
  inputs[gen_path] = sha256_file(archive_file(gen_path));
  if (!ref_path.empty()) inputs[ref_path] = sha256_file(archive_file(ref_path));
  return finish_record(cfg, "evaluate", inputs, results);
}

// Trains (or loads from cache) a stage-1 model for an ablation sub-run.
static std::unique_ptr<Stage1Model<float>> ablate_stage1(const RunConfig& cfg,
                                                         const Dataset& train,
                                                         const std::string& data_fp) {
  const std::string key = config_fingerprint(cfg, {"stage1", data_fp});
  const std::string path = cache_dir(cfg) + "/s1-" + key + ".ckpt";
  if (fs::exists(path)) return load_stage1_checkpoint(path).model;
  std::fprintf(stderr, "ablate: training stage-1 %s seed %llu (%lld iters)\n",
               cfg.rep_mode.c_str(), (unsigned long long)cfg.seed,
               (long long)cfg.iters_stage1);
  auto model = std::make_unique<Stage1Model<float>>(stage1_config(cfg), cfg.seed);
  TrainMeta meta;
  meta.opt.lr = cfg.lr;
  json log = json::array();
  train_stage1(*model, meta, train, cfg, path, log);
  save_stage1_checkpoint(path, *model, cfg, meta);
  return model;
}

static std::unique_ptr<Prior<float>> ablate_prior(const RunConfig& cfg,
                                                  Stage1Model<float>& stage1,
                                                  const Dataset& train,
                                                  const std::string& data_fp) {
  const std::string key = config_fingerprint(cfg, {"prior", data_fp});
  const std::string path = cache_dir(cfg) + "/pr-" + key + ".ckpt";
  if (fs::exists(path)) return load_prior_checkpoint(path).model;
  std::fprintf(stderr, "ablate: training prior %s/%s seed %llu (%lld iters)\n",
               cfg.rep_mode.c_str(), cfg.flatten_order.c_str(),
               (unsigned long long)cfg.seed, (long long)cfg.iters_stage2);
  const auto data = encode_dataset(stage1, train, cfg, CondMode::none, nullptr);
  auto prior = std::make_unique<Prior<float>>(prior_config(cfg), cfg.seed);
  TrainMeta meta;
  meta.opt.lr = cfg.lr;
  json log = json::array();
  train_prior(*prior, meta, data, cfg, path, log);
  save_prior_checkpoint(path, *prior, cfg, meta);
  return prior;
}

// Shrinks a run config down to the ablation budget for one sub-run.
static RunConfig ablate_sub_config(const RunConfig& cfg, const std::string& mode,
                                   const std::string& order, u64 seed) {
  RunConfig c = cfg;
  c.rep_mode = mode;
  c.flatten_order = order;
  c.seed = seed;
  c.cond_mode = "none";
  c.iters_stage1 = cfg.ablate_iters_stage1;
  c.batch_stage1 = cfg.ablate_batch_stage1;
  c.iters_stage2 = cfg.ablate_iters_stage2;
  c.batch_stage2 = cfg.ablate_batch_stage2;
  return c;
}

static json ablate_eval(const RunConfig& cfg, Prior<float>& prior,
                        Stage1Model<float>& stage1, const Dataset& test,
                        const std::vector<PointCloud>& ref) {
  const int n_gen = std::max(2, cfg.ablate_gen_multiple * test.size());
  SampledSet gen = sample_clouds(prior, stage1, Condition{}, n_gen, cfg.ablate_res,
                                 cfg.cloud_points, cfg.top_k, cfg.temperature,
                                 hash_seed({cfg.seed, 0xab1aull}));
  const UnionDistances u = union_distances(gen.set.clouds, ref);
  return json{{"nna_1", nna_1_from(u)},
              {"ecd", ecd_from(u)},
              {"gen_size", n_gen},
              {"empty_meshes", gen.empty_meshes}};
}

json cmd_ablate(const RunConfig& cfg, const std::string& study) {
  if (study != "representation" && study != "order")
    throw ConfigError("ablate --study must be representation or order");
  const Dataset train = load_split(cfg, "train");
  const Dataset test = load_split(cfg, "test");
  const std::string data_fp = split_fingerprint(cfg, "train");
  std::vector<PointCloud> ref;
  for (const auto& r : test.records) ref.push_back(r.cloud);
  std::vector<int> probe;
  for (int r = 0; r < std::min(8, test.size()); ++r) probe.push_back(r);

  json rows = json::array();
  if (study == "representation") {
    for (const std::string mode : {"grid", "triplane", "vector"}) {
      const RunConfig c = ablate_sub_config(cfg, mode, "default", cfg.seed);
      auto s1 = ablate_stage1(c, train, data_fp);
      const double iou = reconstruction_iou(*s1, test, probe, cfg.ablate_res);
      auto prior = ablate_prior(c, *s1, train, data_fp);
      json row = ablate_eval(c, *prior, *s1, test, ref);
      row["mode"] = mode;
      row["order"] = stage1_config(c).enc.flatten_order;
      row["iou"] = iou;
      rows.push_back(std::move(row));
    }
  } else {
    for (int s = 0; s < cfg.ablate_seeds; ++s) {
      const u64 seed = cfg.seed + u64(s);
      for (const std::string mode : {"vector", "triplane", "grid"}) {
        const RunConfig base = ablate_sub_config(cfg, mode, "default", seed);
        auto s1 = ablate_stage1(base, train, data_fp);
        const double iou = reconstruction_iou(*s1, test, probe, cfg.ablate_res);
        for (const std::string& order : flatten_orders_for(rep_mode_from_name(mode))) {
          const RunConfig v = ablate_sub_config(cfg, mode, order, seed);
          auto sv = clone_stage1_with_order(*s1, base, order);
          auto prior = ablate_prior(v, *sv, train, data_fp);
          json row = ablate_eval(v, *prior, *sv, test, ref);
          row["mode"] = mode;
          row["order"] = order;
          row["seed"] = seed;
          row["iou"] = iou;
          rows.push_back(std::move(row));
        }
      }
    }
  }

  json results = {{"study", study}, {"rows", rows}};
  if (study == "order") {
    // per mode: mean over seeds of the across-order standard deviation
    // (population convention) of 1-NNA
    json spread = json::object();
    for (const std::string mode : {"vector", "triplane", "grid"}) {
      double std_sum = 0;
      int seeds = 0;
      for (int s = 0; s < cfg.ablate_seeds; ++s) {
        const u64 seed = cfg.seed + u64(s);
        std::vector<double> vals;
        for (const auto& row : rows)
          if (row["mode"] == mode && row["seed"] == seed)
            vals.push_back(row["nna_1"].get<double>());
        if (vals.empty()) continue;
        double mean = 0;
        for (double v : vals) mean += v;
        mean /= vals.size();
        double var = 0;
        for (double v : vals) var += (v - mean) * (v - mean);
        std_sum += std::sqrt(var / vals.size());
        ++seeds;
      }
      spread[mode] = seeds > 0 ? std_sum / seeds : 0.0;
    }
    results["order_std_nna_1"] = spread;
    results["vector_leq_triplane"] =
        spread["vector"].get<double>() <= spread["triplane"].get<double>();
  }

  for (const auto& row : rows)
    std::printf("ablate %-8s %-10s seed %-3s nna_1 %.4f ecd %.3f iou %.4f\n",
                row["mode"].get<std::string>().c_str(),
                row["order"].get<std::string>().c_str(),
                row.contains("seed") ? row["seed"].dump().c_str() : "-",
                row["nna_1"].get<double>(), row["ecd"].get<double>(),
                row["iou"].get<double>());

  json inputs = {{cfg.resolved_data_dir() + "/train/data.imam", data_fp}};
  return finish_record(cfg, "ablate-" + study, inputs, results);
}

}  // namespace imam
