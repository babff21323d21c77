#pragma once

#include <memory>

#include "imam/classifier.hpp"
#include "imam/config.hpp"

namespace imam {

constexpr int kCheckpointVersion = 1;

// Optimizer state + progress carried alongside the weights so a resumed run
// continues bit-for-bit.
struct TrainMeta {
  i64 iteration = 0;
  Adam<float> opt;
};

void save_stage1_checkpoint(const std::string& path, const Stage1Model<float>& model,
                            const RunConfig& cfg, const TrainMeta& meta);
void save_prior_checkpoint(const std::string& path, const Prior<float>& model,
                           const RunConfig& cfg, const TrainMeta& meta);
void save_classifier_checkpoint(const std::string& path, const PointClassifier& clf,
                                u64 init_seed);

struct Stage1Checkpoint {
  RunConfig cfg;
  TrainMeta meta;
  std::unique_ptr<Stage1Model<float>> model;
};

struct PriorCheckpoint {
  RunConfig cfg;
  TrainMeta meta;
  std::unique_ptr<Prior<float>> model;
};

Stage1Checkpoint load_stage1_checkpoint(const std::string& path);
PriorCheckpoint load_prior_checkpoint(const std::string& path);
std::unique_ptr<PointClassifier> load_classifier_checkpoint(const std::string& path);

// Peek at the kind tag ("stage1" | "prior" | "classifier") without loading.
std::string checkpoint_kind(const std::string& path);

}  // namespace imam
