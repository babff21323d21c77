#pragma once

#include <string>
#include <vector>

#include "imam/autoencoder.hpp"
#include "imam/dataset.hpp"
#include "imam/prior.hpp"

namespace imam {

// Flat run configuration: every field has a default; unknown keys are
// rejected when parsing. Serialized as the JSON echoed into checkpoints
// and reports.
struct RunConfig {
  // dataset
  std::string data_dir;  // empty = $IMAM_DATA_DIR or "data"
  int classes = kNumClasses;
  int per_class_train = 64;
  int per_class_test = 16;
  int cloud_points = 2048;
  int occ_uniform = 512;
  int occ_near = 512;
  u64 data_seed = 1;

  // representation / encoder
  std::string rep_mode = "vector";
  int plane_res = 64;
  int down_res = 8;
  int feat_dim = 32;
  int trunk_dim = 128;
  int code_dim = 4;
  std::string aggregation = "mean";
  std::string flatten_order = "default";  // first canonical order of the mode
  int grid_res = 16;
  int grid_down_res = 8;

  // stage-1 autoencoder
  int codebook_entries = 256;
  double beta = 0.4;
  bool reset_dead_entries = false;
  int unet1_depth = 2;
  int unet2_depth = 1;
  int implicit_width = 128;
  int implicit_blocks = 5;
  double mc_threshold = 0.2;
  int field_res = 64;
  int query_batch = 4096;

  // stage-2 prior
  int prior_dim = 128;
  int prior_layers = 4;
  int prior_heads = 4;
  std::string cond_mode = "none";
  int feature_dim = 32;

  // optimization
  double lr = 1e-4;
  int batch_stage1 = 32;
  int batch_stage2 = 32;
  i64 iters_stage1 = 20000;
  i64 iters_stage2 = 20000;
  int query_uniform = 512;
  int query_near = 512;
  u64 seed = 1;
  i64 checkpoint_every = 1000;
  i64 log_every = 100;
  i64 iou_every = 2000;

  // sampling
  int top_k = 32;
  double temperature = 1.0;
  int complete_top_k = 8;
  double complete_temperature = 0.8;

  // evaluation
  int gen_multiple = 5;       // generated set = multiple x test size
  double covt_threshold = 0;  // 0 = use the evaluated model's own MMD
  double partial_fraction = 0.5;
  int completions_per_input = 10;
  int eval_res = 0;  // mesh resolution when decoding samples; 0 = field_res
  bool noise_baseline = false;

  // ablation studies
  int ablate_seeds = 3;
  i64 ablate_iters_stage1 = 1200;
  i64 ablate_iters_stage2 = 2000;
  int ablate_batch_stage1 = 4;
  int ablate_batch_stage2 = 16;
  int ablate_gen_multiple = 2;
  int ablate_res = 32;

  // run layout
  std::string out_dir = "runs";
  std::string tag = "default";
  int workers = 1;

  std::string resolved_data_dir() const {
    return data_dir.empty() ? default_data_dir() : data_dir;
  }
};

json run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const json& j);

// Config file (optional) + --key value overrides, validated against defaults.
RunConfig load_run_config(const std::string& config_path,
                          const std::vector<std::pair<std::string, std::string>>& overrides);

DatasetSpec dataset_spec(const RunConfig& cfg);
Stage1Config stage1_config(const RunConfig& cfg);
PriorConfig prior_config(const RunConfig& cfg);

// Semantic fingerprint: config with run-layout keys stripped, hashed with the
// extra strings; identical results imply interchangeable cached artifacts.
std::string config_fingerprint(const RunConfig& cfg, const std::vector<std::string>& extra);

}  // namespace imam
