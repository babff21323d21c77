#pragma once

#include "imam/checkpoint.hpp"
#include "imam/dataset.hpp"

namespace imam {

// Runs stage-1 optimization from meta.iteration up to cfg.iters_stage1.
// Batch picks and query samples are pure functions of (cfg.seed, iteration),
// so a resumed run retraces the one-shot run exactly. Appends log entries;
// writes periodic checkpoints when ckpt_path is nonempty. Throws on NaN loss
// with the offending iteration in the message.
void train_stage1(Stage1Model<float>& model, TrainMeta& meta, const Dataset& train,
                  const RunConfig& cfg, const std::string& ckpt_path, json& log);

struct EncodedShape {
  std::vector<int> codes;
  Condition cond;
  int record = 0;
};

// Pre-encodes a split with the frozen stage-1 model. Conditions depend on
// mode: class labels, codes of a partial view, or classifier features.
std::vector<EncodedShape> encode_dataset(Stage1Model<float>& model, const Dataset& ds,
                                         const RunConfig& cfg, CondMode mode,
                                         PointClassifier* clf);

// Stage-2 optimization over (condition, codes) pairs; same seeding and
// checkpoint conventions as train_stage1. Logs NLL in nats per token.
void train_prior(Prior<float>& prior, TrainMeta& meta,
                 const std::vector<EncodedShape>& data, const RunConfig& cfg,
                 const std::string& ckpt_path, json& log);

// Mean reconstruction voxel IoU vs the analytic occupancy over records.
double reconstruction_iou(Stage1Model<float>& model, const Dataset& ds,
                          const std::vector<int>& records, int res);

// Entropy in nats of the codebook usage histogram accumulated since `prev`.
double usage_entropy(const std::vector<i64>& usage, const std::vector<i64>& prev);

}  // namespace imam
