#include "imam/trainer.hpp"

#include <cmath>
#include <cstdio>

namespace imam {

double usage_entropy(const std::vector<i64>& usage, const std::vector<i64>& prev) {
  i64 total = 0;
  for (size_t e = 0; e < usage.size(); ++e) total += usage[e] - prev[e];
  if (total <= 0) return 0.0;
  double h = 0;
  for (size_t e = 0; e < usage.size(); ++e) {
    const i64 n = usage[e] - prev[e];
    if (n > 0) {
      const double p = double(n) / double(total);
      h -= p * std::log(p);
    }
  }
  return h;
}

double reconstruction_iou(Stage1Model<float>& model, const Dataset& ds,
                          const std::vector<int>& records, int res) {
  if (records.empty()) throw Error("reconstruction_iou: no records");
  double total = 0;
  for (int r : records) {
    const auto& rec = ds.records.at(r);
    const OccupancyGrid pred = model.field_from_points(rec.cloud.pts, res);
    const OccupancyGrid truth = rasterize_shape(rec.shape, res);
    total += voxel_iou(pred, truth, model.cfg.mc_threshold);
  }
  return total / double(records.size());
}

void train_stage1(Stage1Model<float>& model, TrainMeta& meta, const Dataset& train,
                  const RunConfig& cfg, const std::string& ckpt_path, json& log) {
  if (train.size() == 0) throw Error("stage-1 training set is empty");
  const int nb = std::max(1, cfg.batch_stage1);
  std::vector<i64> prev_usage = model.book.usage;
  const double t_start = now_seconds();
  const i64 first = meta.iteration;

  for (i64 it = meta.iteration; it < cfg.iters_stage1; ++it) {
    model.params.zero_grad();
    double tot = 0, occ = 0, code = 0;
    Rng pick(hash_seed({cfg.seed, 0xb47cull, u64(it)}));
    for (int b = 0; b < nb; ++b) {
      const auto& rec = train.records[pick.uniform_int(u64(train.size()))];
      const OccupancySample qs =
          sample_training_points(rec.shape, cfg.query_uniform, cfg.query_near,
                                 hash_seed({cfg.seed, 0xaccull, u64(it), u64(b) + 1}));
      const auto losses = model.train_step(rec.cloud.pts, qs);
      tot += losses.total;
      occ += losses.occupancy;
      code += losses.codebook;
    }
    if (!std::isfinite(tot))
      throw Error("nan loss at stage-1 iteration " + std::to_string(it));
    model.params.scale_grad(1.0f / nb);
    meta.opt.step(model.params);
    meta.iteration = it + 1;

    const bool last = meta.iteration == cfg.iters_stage1;
    if (cfg.log_every > 0 && (meta.iteration % cfg.log_every == 0 || last)) {
      const double entropy = usage_entropy(model.book.usage, prev_usage);
      prev_usage = model.book.usage;
      log.push_back({{"iter", meta.iteration},
                     {"loss", tot / nb},
                     {"occupancy", occ / nb},
                     {"codebook", code / nb},
                     {"usage_entropy", entropy}});
      const double rate = (now_seconds() - t_start) / double(meta.iteration - first);
      std::fprintf(stderr,
                   "stage1 iter %lld/%lld loss %.4f occ %.4f code %.4f ent %.2f "
                   "(%.2fs/it)\n",
                   (long long)meta.iteration, (long long)cfg.iters_stage1, tot / nb,
                   occ / nb, code / nb, entropy, rate);
    }
    if (cfg.iou_every > 0 && (meta.iteration % cfg.iou_every == 0 || last)) {
      std::vector<int> probe;
      for (int r = 0; r < std::min(4, train.size()); ++r) probe.push_back(r);
      const double iou = reconstruction_iou(model, train, probe, 32);
      log.push_back({{"iter", meta.iteration}, {"iou", iou}});
      std::fprintf(stderr, "stage1 iter %lld probe iou %.4f\n",
                   (long long)meta.iteration, iou);
    }
    if (!ckpt_path.empty() && cfg.checkpoint_every > 0 &&
        (meta.iteration % cfg.checkpoint_every == 0 || last))
      save_stage1_checkpoint(ckpt_path, model, cfg, meta);
  }
}

std::vector<EncodedShape> encode_dataset(Stage1Model<float>& model, const Dataset& ds,
                                         const RunConfig& cfg, CondMode mode,
                                         PointClassifier* clf) {
  if (mode == CondMode::feature && !clf)
    throw Error("feature conditioning needs a classifier");
  std::vector<EncodedShape> out;
  out.reserve(ds.size());
  for (int r = 0; r < ds.size(); ++r) {
    const auto& rec = ds.records[r];
    EncodedShape e;
    e.record = r;
    e.codes = model.encode_codes(rec.cloud.pts);
    e.cond.mode = mode;
    if (mode == CondMode::class_label) {
      e.cond.class_id = rec.shape.class_id;
    } else if (mode == CondMode::partial) {
      Rng fr(hash_seed({cfg.seed, 0x9a17ull, rec.shape.seed}));
      const double fraction = fr.uniform(0.25, 0.75);
      const PointCloud partial = make_partial_viewpoint(
          rec.cloud, fraction, hash_seed({cfg.seed, 0x9a1bull, rec.shape.seed}));
      e.cond.partial_codes = model.encode_codes(partial.pts);
    } else if (mode == CondMode::feature) {
      e.cond.feature = clf->features(rec.cloud);
    }
    out.push_back(std::move(e));
  }
  return out;
}

void train_prior(Prior<float>& prior, TrainMeta& meta,
                 const std::vector<EncodedShape>& data, const RunConfig& cfg,
                 const std::string& ckpt_path, json& log) {
  if (data.empty()) throw Error("stage-2 training set is empty");
  const int nb = std::max(1, cfg.batch_stage2);
  const double t_start = now_seconds();
  const i64 first = meta.iteration;

  for (i64 it = meta.iteration; it < cfg.iters_stage2; ++it) {
    prior.params.zero_grad();
    double nll = 0;
    Rng pick(hash_seed({cfg.seed, 0xbead2ull, u64(it)}));
    for (int b = 0; b < nb; ++b) {
      const auto& e = data[pick.uniform_int(u64(data.size()))];
      nll += prior.nll(e.codes, e.cond, /*backward=*/true);
    }
    if (!std::isfinite(nll))
      throw Error("nan loss at stage-2 iteration " + std::to_string(it));
    prior.params.scale_grad(1.0f / nb);
    meta.opt.step(prior.params);
    meta.iteration = it + 1;

    const bool last = meta.iteration == cfg.iters_stage2;
    if (cfg.log_every > 0 && (meta.iteration % cfg.log_every == 0 || last)) {
      log.push_back({{"iter", meta.iteration}, {"nll", nll / nb}});
      const double rate = (now_seconds() - t_start) / double(meta.iteration - first);
      std::fprintf(stderr, "stage2 iter %lld/%lld nll %.4f (%.3fs/it)\n",
                   (long long)meta.iteration, (long long)cfg.iters_stage2, nll / nb,
                   rate);
    }
    if (!ckpt_path.empty() && cfg.checkpoint_every > 0 &&
        (meta.iteration % cfg.checkpoint_every == 0 || last))
      save_prior_checkpoint(ckpt_path, prior, cfg, meta);
  }
}

}  // namespace imam
