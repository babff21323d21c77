#pragma once

#include "imam/metrics.hpp"
#include "imam/trainer.hpp"

namespace imam {

// A set of fixed-size point clouds with optional class labels, persisted as
// one archive ("clouds" f32 [n, p, 3], optional "class_ids" i64 [n]).
struct CloudSet {
  std::vector<PointCloud> clouds;
  std::vector<int> class_ids;
};

void write_cloud_set(const std::string& path, const CloudSet& set, const json& meta);
// Accepts the archive file itself or a directory containing clouds.imam.
CloudSet read_cloud_set(const std::string& path);

std::string run_dir(const RunConfig& cfg);

// Loads the classifier from path when given; otherwise trains the toy
// classifier on the train split and caches it under out_dir/cache.
std::unique_ptr<PointClassifier> obtain_classifier(const RunConfig& cfg,
                                                   const std::string& path);

// Rebuilds a trained stage-1 model under a different flatten order by
// copying weights; the underlying network is order-independent.
std::unique_ptr<Stage1Model<float>> clone_stage1_with_order(
    const Stage1Model<float>& src, const RunConfig& cfg, const std::string& order);

// Autoregressive samples decoded to meshes and resampled to clouds; empty
// meshes fall back to a degenerate cloud at the origin and are counted.
struct SampledSet {
  CloudSet set;
  std::vector<std::vector<int>> codes;
  std::vector<Mesh> meshes;
  int empty_meshes = 0;
};
SampledSet sample_clouds(Prior<float>& prior, Stage1Model<float>& stage1,
                         const Condition& cond, int count, int res, int cloud_points,
                         int top_k, double temperature, u64 seed);

// CLI command bodies; each returns the JSON record it wrote.
json cmd_gen_data(const RunConfig& cfg);
json cmd_train_ae(const RunConfig& cfg, const std::string& resume);
json cmd_train_prior(const RunConfig& cfg, const std::string& stage1_path,
                     const std::string& classifier_path, const std::string& resume);
json cmd_reconstruct(const RunConfig& cfg, const std::string& stage1_path,
                     const std::string& split, int count, const std::string& out);
json cmd_sample(const RunConfig& cfg, const std::string& prior_path,
                const std::string& stage1_path, int count, int class_id,
                const std::string& feature_file, const std::string& out);
json cmd_complete(const RunConfig& cfg, const std::string& prior_path,
                  const std::string& stage1_path, const std::string& mode, int count,
                  int per_input, const std::string& out);
json cmd_evaluate(const RunConfig& cfg, const std::string& gen_path,
                  const std::string& ref_path, const std::string& classifier_path);
json cmd_ablate(const RunConfig& cfg, const std::string& study);

}  // namespace imam
