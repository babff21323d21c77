#include "imam/dataset.hpp"

#include <cstdlib>
#include <filesystem>

namespace imam {

u64 shape_seed(const DatasetSpec& spec, const std::string& split, int index) {
  // Disjoint-by-construction: test seeds live 0x80000 above train seeds and
  // per-class counts stay far below that gap.
  const u64 base = spec.seed * 0x100000ull;
  if (split == "train") return base + u64(index);
  if (split == "test") return base + 0x80000ull + u64(index);
  throw ConfigError("unknown split: " + split);
}

Dataset make_dataset(const DatasetSpec& spec, const std::string& split) {
  if (spec.classes < 1 || spec.classes > kNumClasses)
    throw ConfigError("classes must be in [1, " + std::to_string(kNumClasses) + "]");
  const int per_class =
      split == "train" ? spec.per_class_train
                       : (split == "test" ? spec.per_class_test
                                          : throw ConfigError("unknown split: " + split));
  if (per_class < 0) throw ConfigError("per-class count must be non-negative");

  Dataset ds;
  ds.spec = spec;
  ds.split = split;
  ds.records.reserve(size_t(spec.classes) * per_class);
  for (int cls = 0; cls < spec.classes; ++cls) {
    for (int i = 0; i < per_class; ++i) {
      ShapeRecord rec;
      rec.shape = make_shape(cls, shape_seed(spec, split, i));
      rec.cloud = sample_surface_points(rec.shape, spec.cloud_points, rec.shape.seed);
      rec.occ = sample_training_points(rec.shape, spec.occ_uniform, spec.occ_near,
                                       rec.shape.seed);
      ds.records.push_back(std::move(rec));
    }
  }
  return ds;
}

json dataset_manifest(const Dataset& ds) {
  json m;
  m["version"] = 1;
  m["split"] = ds.split;
  m["seed"] = ds.spec.seed;
  m["classes"] = ds.spec.classes;
  m["per_class_train"] = ds.spec.per_class_train;
  m["per_class_test"] = ds.spec.per_class_test;
  m["cloud_points"] = ds.spec.cloud_points;
  m["occ_uniform"] = ds.spec.occ_uniform;
  m["occ_near"] = ds.spec.occ_near;
  json counts = json::object();
  for (int cls = 0; cls < ds.spec.classes; ++cls) counts[class_name(cls)] = 0;
  json entries = json::array();
  for (int r = 0; r < ds.size(); ++r) {
    const auto& rec = ds.records[r];
    counts[class_name(rec.shape.class_id)] = int(counts[class_name(rec.shape.class_id)]) + 1;
    entries.push_back({{"class_id", rec.shape.class_id},
                       {"seed", rec.shape.seed},
                       {"row", r}});
  }
  m["counts"] = counts;
  m["entries"] = entries;
  m["data_file"] = "data.imam";
  return m;
}

void write_dataset(const Dataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_json_file(dir + "/manifest.json", dataset_manifest(ds));

  const int n = ds.size();
  const i64 np = ds.spec.cloud_points;
  const i64 nq = i64(ds.spec.occ_uniform) + ds.spec.occ_near;
  std::vector<i64> class_ids(n), seeds(n);
  std::vector<float> clouds(size_t(n) * np * 3);
  std::vector<float> occ_pos(size_t(n) * nq * 3);
  std::vector<u8> occ_lab(size_t(n) * nq);
  for (int r = 0; r < n; ++r) {
    const auto& rec = ds.records[r];
    class_ids[r] = rec.shape.class_id;
    seeds[r] = i64(rec.shape.seed);
    if (i64(rec.cloud.size()) != np) throw IoError("cloud size mismatch on write");
    if (i64(rec.occ.positions.size()) != nq) throw IoError("occ size mismatch on write");
    for (i64 i = 0; i < np; ++i)
      for (int k = 0; k < 3; ++k)
        clouds[(size_t(r) * np + i) * 3 + k] = rec.cloud.pts[i][k];
    for (i64 i = 0; i < nq; ++i)
      for (int k = 0; k < 3; ++k)
        occ_pos[(size_t(r) * nq + i) * 3 + k] = rec.occ.positions[i][k];
    std::copy(rec.occ.labels.begin(), rec.occ.labels.end(),
              occ_lab.begin() + size_t(r) * nq);
  }

  Archive a;
  a.meta["kind"] = "dataset";
  a.meta["manifest"] = dataset_manifest(ds);
  a.put_i64("class_ids", {n}, class_ids.data());
  a.put_i64("shape_seeds", {n}, seeds.data());
  a.put_f32("clouds", {n, np, 3}, clouds.data());
  a.put_f32("occ_positions", {n, nq, 3}, occ_pos.data());
  a.put_u8("occ_labels", {n, nq}, occ_lab.data());
  write_archive(dir + "/data.imam", a);
}

Dataset read_dataset(const std::string& dir) {
  const json m = read_json_file(dir + "/manifest.json");
  if (!m.contains("version") || int(m["version"]) != 1)
    throw VersionError("unsupported dataset manifest version");
  Dataset ds;
  ds.split = m["split"].get<std::string>();
  ds.spec.seed = m["seed"].get<u64>();
  ds.spec.classes = m["classes"].get<int>();
  ds.spec.per_class_train = m["per_class_train"].get<int>();
  ds.spec.per_class_test = m["per_class_test"].get<int>();
  ds.spec.cloud_points = m["cloud_points"].get<int>();
  ds.spec.occ_uniform = m["occ_uniform"].get<int>();
  ds.spec.occ_near = m["occ_near"].get<int>();

  const Archive a = read_archive(dir + "/" + m["data_file"].get<std::string>());
  const auto class_ids = a.get_i64("class_ids");
  const auto seeds = a.get_i64("shape_seeds");
  const auto clouds = a.get_f32("clouds");
  const auto occ_pos = a.get_f32("occ_positions");
  const auto occ_lab = a.get_u8("occ_labels");
  const int n = int(class_ids.size());
  if (n != int(m["entries"].size()))
    throw FormatError("dataset manifest entry count disagrees with data file");
  const i64 np = ds.spec.cloud_points;
  const i64 nq = i64(ds.spec.occ_uniform) + ds.spec.occ_near;

  ds.records.resize(n);
  for (int r = 0; r < n; ++r) {
    auto& rec = ds.records[r];
    rec.shape = make_shape(int(class_ids[r]), u64(seeds[r]));
    rec.cloud.pts.resize(np);
    for (i64 i = 0; i < np; ++i)
      for (int k = 0; k < 3; ++k)
        rec.cloud.pts[i][k] = clouds[(size_t(r) * np + i) * 3 + k];
    rec.occ.positions.resize(nq);
    rec.occ.labels.assign(occ_lab.begin() + size_t(r) * nq,
                          occ_lab.begin() + size_t(r + 1) * nq);
    for (i64 i = 0; i < nq; ++i)
      for (int k = 0; k < 3; ++k)
        rec.occ.positions[i][k] = occ_pos[(size_t(r) * nq + i) * 3 + k];
  }
  return ds;
}

std::string dataset_fingerprint(const std::string& dir) {
  return sha256_file(dir + "/data.imam");
}

std::string default_data_dir() {
  const char* env = std::getenv("IMAM_DATA_DIR");
  return env && *env ? env : "data";
}

}  // namespace imam
