#include "imam/config.hpp"

namespace imam {

CondMode cond_mode_from_name(const std::string& name) {
  if (name == "none") return CondMode::none;
  if (name == "class") return CondMode::class_label;
  if (name == "partial") return CondMode::partial;
  if (name == "feature") return CondMode::feature;
  throw ConfigError("unknown cond_mode: " + name +
                    " (expected none, class, partial, feature)");
}

const char* cond_mode_name(CondMode mode) {
  switch (mode) {
    case CondMode::none: return "none";
    case CondMode::class_label: return "class";
    case CondMode::partial: return "partial";
    case CondMode::feature: return "feature";
  }
  return "none";
}

json run_config_to_json(const RunConfig& c) {
  json j;
  j["data_dir"] = c.data_dir;
  j["classes"] = c.classes;
  j["per_class_train"] = c.per_class_train;
  j["per_class_test"] = c.per_class_test;
  j["cloud_points"] = c.cloud_points;
  j["occ_uniform"] = c.occ_uniform;
  j["occ_near"] = c.occ_near;
  j["data_seed"] = c.data_seed;
  j["rep_mode"] = c.rep_mode;
  j["plane_res"] = c.plane_res;
  j["down_res"] = c.down_res;
  j["feat_dim"] = c.feat_dim;
  j["trunk_dim"] = c.trunk_dim;
  j["code_dim"] = c.code_dim;
  j["aggregation"] = c.aggregation;
  j["flatten_order"] = c.flatten_order;
  j["grid_res"] = c.grid_res;
  j["grid_down_res"] = c.grid_down_res;
  j["codebook_entries"] = c.codebook_entries;
  j["beta"] = c.beta;
  j["reset_dead_entries"] = c.reset_dead_entries;
  j["unet1_depth"] = c.unet1_depth;
  j["unet2_depth"] = c.unet2_depth;
  j["implicit_width"] = c.implicit_width;
  j["implicit_blocks"] = c.implicit_blocks;
  j["mc_threshold"] = c.mc_threshold;
  j["field_res"] = c.field_res;
  j["query_batch"] = c.query_batch;
  j["prior_dim"] = c.prior_dim;
  j["prior_layers"] = c.prior_layers;
  j["prior_heads"] = c.prior_heads;
  j["cond_mode"] = c.cond_mode;
  j["feature_dim"] = c.feature_dim;
  j["lr"] = c.lr;
  j["batch_stage1"] = c.batch_stage1;
  j["batch_stage2"] = c.batch_stage2;
  j["iters_stage1"] = c.iters_stage1;
  j["iters_stage2"] = c.iters_stage2;
  j["query_uniform"] = c.query_uniform;
  j["query_near"] = c.query_near;
  j["seed"] = c.seed;
  j["checkpoint_every"] = c.checkpoint_every;
  j["log_every"] = c.log_every;
  j["iou_every"] = c.iou_every;
  j["top_k"] = c.top_k;
  j["temperature"] = c.temperature;
  j["complete_top_k"] = c.complete_top_k;
  j["complete_temperature"] = c.complete_temperature;
  j["gen_multiple"] = c.gen_multiple;
  j["covt_threshold"] = c.covt_threshold;
  j["partial_fraction"] = c.partial_fraction;
  j["completions_per_input"] = c.completions_per_input;
  j["eval_res"] = c.eval_res;
  j["noise_baseline"] = c.noise_baseline;
  j["ablate_seeds"] = c.ablate_seeds;
  j["ablate_iters_stage1"] = c.ablate_iters_stage1;
  j["ablate_iters_stage2"] = c.ablate_iters_stage2;
  j["ablate_batch_stage1"] = c.ablate_batch_stage1;
  j["ablate_batch_stage2"] = c.ablate_batch_stage2;
  j["ablate_gen_multiple"] = c.ablate_gen_multiple;
  j["ablate_res"] = c.ablate_res;
  j["out_dir"] = c.out_dir;
  j["tag"] = c.tag;
  j["workers"] = c.workers;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  const json defaults = run_config_to_json(RunConfig{});
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!defaults.contains(it.key()))
      throw ConfigError("unknown config key: " + it.key());
  json m = defaults;
  m.update(j);

  RunConfig c;
  try {
    c.data_dir = m["data_dir"].get<std::string>();
    c.classes = m["classes"].get<int>();
    c.per_class_train = m["per_class_train"].get<int>();
    c.per_class_test = m["per_class_test"].get<int>();
    c.cloud_points = m["cloud_points"].get<int>();
    c.occ_uniform = m["occ_uniform"].get<int>();
    c.occ_near = m["occ_near"].get<int>();
    c.data_seed = m["data_seed"].get<u64>();
    c.rep_mode = m["rep_mode"].get<std::string>();
    c.plane_res = m["plane_res"].get<int>();
    c.down_res = m["down_res"].get<int>();
    c.feat_dim = m["feat_dim"].get<int>();
    c.trunk_dim = m["trunk_dim"].get<int>();
    c.code_dim = m["code_dim"].get<int>();
    c.aggregation = m["aggregation"].get<std::string>();
    c.flatten_order = m["flatten_order"].get<std::string>();
    c.grid_res = m["grid_res"].get<int>();
    c.grid_down_res = m["grid_down_res"].get<int>();
    c.codebook_entries = m["codebook_entries"].get<int>();
    c.beta = m["beta"].get<double>();
    c.reset_dead_entries = m["reset_dead_entries"].get<bool>();
    c.unet1_depth = m["unet1_depth"].get<int>();
    c.unet2_depth = m["unet2_depth"].get<int>();
    c.implicit_width = m["implicit_width"].get<int>();
    c.implicit_blocks = m["implicit_blocks"].get<int>();
    c.mc_threshold = m["mc_threshold"].get<double>();
    c.field_res = m["field_res"].get<int>();
    c.query_batch = m["query_batch"].get<int>();
    c.prior_dim = m["prior_dim"].get<int>();
    c.prior_layers = m["prior_layers"].get<int>();
    c.prior_heads = m["prior_heads"].get<int>();
    c.cond_mode = m["cond_mode"].get<std::string>();
    c.feature_dim = m["feature_dim"].get<int>();
    c.lr = m["lr"].get<double>();
    c.batch_stage1 = m["batch_stage1"].get<int>();
    c.batch_stage2 = m["batch_stage2"].get<int>();
    c.iters_stage1 = m["iters_stage1"].get<i64>();
    c.iters_stage2 = m["iters_stage2"].get<i64>();
    c.query_uniform = m["query_uniform"].get<int>();
    c.query_near = m["query_near"].get<int>();
    c.seed = m["seed"].get<u64>();
    c.checkpoint_every = m["checkpoint_every"].get<i64>();
    c.log_every = m["log_every"].get<i64>();
    c.iou_every = m["iou_every"].get<i64>();
    c.top_k = m["top_k"].get<int>();
    c.temperature = m["temperature"].get<double>();
    c.complete_top_k = m["complete_top_k"].get<int>();
    c.complete_temperature = m["complete_temperature"].get<double>();
    c.gen_multiple = m["gen_multiple"].get<int>();
    c.covt_threshold = m["covt_threshold"].get<double>();
    c.partial_fraction = m["partial_fraction"].get<double>();
    c.completions_per_input = m["completions_per_input"].get<int>();
    c.eval_res = m["eval_res"].get<int>();
    c.noise_baseline = m["noise_baseline"].get<bool>();
    c.ablate_seeds = m["ablate_seeds"].get<int>();
    c.ablate_iters_stage1 = m["ablate_iters_stage1"].get<i64>();
    c.ablate_iters_stage2 = m["ablate_iters_stage2"].get<i64>();
    c.ablate_batch_stage1 = m["ablate_batch_stage1"].get<int>();
    c.ablate_batch_stage2 = m["ablate_batch_stage2"].get<int>();
    c.ablate_gen_multiple = m["ablate_gen_multiple"].get<int>();
    c.ablate_res = m["ablate_res"].get<int>();
    c.out_dir = m["out_dir"].get<std::string>();
    c.tag = m["tag"].get<std::string>();
    c.workers = m["workers"].get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(
    const std::string& config_path,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  const json defaults = run_config_to_json(RunConfig{});
  json j = json::object();
  if (!config_path.empty()) j = read_json_file(config_path);
  for (const auto& [key, value] : overrides) {
    if (!defaults.contains(key)) throw ConfigError("unknown config key: " + key);
    if (defaults.at(key).is_string()) {
      j[key] = value;
    } else {
      json v = json::parse(value, nullptr, /*allow_exceptions=*/false);
      if (v.is_discarded() || v.is_string() || v.is_object() || v.is_array())
        throw ConfigError("cannot parse value for --" + key + ": " + value);
      j[key] = v;
    }
  }
  return run_config_from_json(j);
}

DatasetSpec dataset_spec(const RunConfig& c) {
  DatasetSpec s;
  s.classes = c.classes;
  s.per_class_train = c.per_class_train;
  s.per_class_test = c.per_class_test;
  s.cloud_points = c.cloud_points;
  s.occ_uniform = c.occ_uniform;
  s.occ_near = c.occ_near;
  s.seed = c.data_seed;
  return s;
}

// "default" resolves to the first canonical order of the representation.
static std::string resolve_order(const std::string& order, RepMode mode) {
  if (order != "default") return order;
  return flatten_orders_for(mode).front();
}

Stage1Config stage1_config(const RunConfig& c) {
  Stage1Config s;
  s.enc.mode = rep_mode_from_name(c.rep_mode);
  s.enc.plane_res = c.plane_res;
  s.enc.down_res = c.down_res;
  s.enc.feat_dim = c.feat_dim;
  s.enc.trunk_dim = c.trunk_dim;
  s.enc.code_dim = c.code_dim;
  s.enc.aggregation = aggregation_from_name(c.aggregation);
  s.enc.flatten_order = resolve_order(c.flatten_order, s.enc.mode);
  s.enc.grid_res = c.grid_res;
  s.enc.grid_down_res = c.grid_down_res;
  s.enc.validate();
  s.codebook_entries = c.codebook_entries;
  s.beta = c.beta;
  s.reset_dead_entries = c.reset_dead_entries;
  s.unet1_depth = c.unet1_depth;
  s.unet2_depth = c.unet2_depth;
  s.implicit_width = c.implicit_width;
  s.implicit_blocks = c.implicit_blocks;
  s.mc_threshold = float(c.mc_threshold);
  s.field_res = c.field_res;
  s.query_batch = c.query_batch;
  return s;
}

PriorConfig prior_config(const RunConfig& c) {
  const Stage1Config s1 = stage1_config(c);
  PriorConfig p;
  p.vocab = c.codebook_entries;
  p.positions = s1.enc.code_positions();
  p.dim = c.prior_dim;
  p.layers = c.prior_layers;
  p.heads = c.prior_heads;
  p.cond = cond_mode_from_name(c.cond_mode);
  p.n_classes = c.classes;
  p.feature_dim = c.feature_dim;
  p.cond_positions = p.cond == CondMode::partial ? p.positions : 0;
  p.validate();
  return p;
}

std::string config_fingerprint(const RunConfig& cfg, const std::vector<std::string>& extra) {
  json j = run_config_to_json(cfg);
  // run layout and logging cadence do not change results
  for (const char* key : {"data_dir", "out_dir", "tag", "workers", "log_every",
                          "checkpoint_every", "iou_every"})
    j.erase(key);
  std::string text = j.dump();
  for (const auto& e : extra) text += "\n" + e;
  return sha256_hex(text.data(), text.size()).substr(0, 16);
}

}  // namespace imam
