#pragma once

#include "imam/decoder.hpp"
#include "imam/quantizer.hpp"

namespace imam {

struct Stage1Config {
  EncoderConfig enc;
  int codebook_entries = 256;
  double beta = 0.4;
  bool reset_dead_entries = false;
  int unet1_depth = 2;
  int unet2_depth = 1;
  int implicit_width = 128;
  int implicit_blocks = 5;
  float mc_threshold = 0.2f;
  int field_res = 64;
  int query_batch = 4096;
};

template <class T>
struct Stage1Losses {
  double total = 0, occupancy = 0, codebook = 0;
};

// Shape autoencoder: point encoder -> vector quantization -> implicit
// occupancy decoder trained end to end with a straight-through estimator.
template <class T>
struct Stage1Model {
  Stage1Config cfg;
  Stage1Encoder<T> enc;
  Codebook<T> book;
  Stage1Decoder<T> dec;
  ParamStore<T> params;

  // params points into the layer objects; the model must stay put.
  Stage1Model(const Stage1Model&) = delete;
  Stage1Model& operator=(const Stage1Model&) = delete;

  Stage1Model(const Stage1Config& cfg_, u64 init_seed) : cfg(cfg_) {
    enc = Stage1Encoder<T>(cfg.enc);
    book = Codebook<T>(cfg.codebook_entries, cfg.enc.code_dim);
    dec = Stage1Decoder<T>(cfg.enc, cfg.unet1_depth, cfg.unet2_depth,
                           cfg.implicit_width, cfg.implicit_blocks);
    Rng rng(hash_seed({init_seed, 0x51a6e1ull}));
    enc.init(rng);
    book.init(rng);
    dec.init(rng);
    enc.reg(params, "enc");
    book.reg(params, "book");
    dec.reg(params, "dec");
  }

  // Forward and backward for one shape; gradients accumulate into params.
  Stage1Losses<T> train_step(const std::vector<P3>& cloud, const OccupancySample& qs) {
    Seq<T> f = enc.encode(cloud, /*track=*/true);
    const std::vector<int> idx = book.quantize(f);
    const Seq<T> q = book.lookup(idx);
    const Seq<T> st = straight_through(f, q);

    DecodedField<T> field = dec.decode(st, /*track=*/true);
    Seq<T> logits = dec.field_logits(field, qs.positions, /*track=*/true);

    Seq<T> dlogits;
    Stage1Losses<T> losses;
    losses.occupancy = occupancy_loss(logits, qs.labels, &dlogits);
    losses.codebook = book.loss(f, q, cfg.beta);
    losses.total = losses.occupancy + losses.codebook;

    DecodedField<T> dfield;
    dfield.is_grid = field.is_grid;
    if (field.is_grid)
      dfield.grid = Grid3<T>(field.grid.d, field.grid.h, field.grid.w, field.grid.c);
    else
      dfield.tri = TriPlane<T>(field.tri.xy.h, field.tri.xy.c);
    dec.field_logits_backward(dlogits, qs.positions, dfield);

    Seq<T> df = dec.decode_backward(std::move(dfield));  // straight-through to f
    book.loss_backward(f, idx, q, cfg.beta, df);
    enc.backward(df);
    return losses;
  }

  std::vector<int> encode_codes(const std::vector<P3>& cloud) {
    Seq<T> f = enc.encode(cloud, /*track=*/false);
    std::vector<int> idx(f.n);
    for (int i = 0; i < f.n; ++i) idx[i] = book.nearest(f.row(i));
    return idx;
  }

  OccupancyGrid field_from_codes(const std::vector<int>& codes, int res) {
    const Seq<T> q = book.lookup(codes);
    DecodedField<T> field = dec.decode(q, /*track=*/false);
    OccupancyGrid grid(res);
    const std::vector<P3> pts = grid_positions(res);
    const int batch = std::max(1, cfg.query_batch);
    for (size_t start = 0; start < pts.size(); start += batch) {
      const size_t end = std::min(pts.size(), start + batch);
      const std::vector<P3> chunk(pts.begin() + start, pts.begin() + end);
      const Seq<T> logits = dec.field_logits(field, chunk, /*track=*/false);
      const auto probs = occupancy_probs(logits);
      std::copy(probs.begin(), probs.end(), grid.v.begin() + start);
    }
    return grid;
  }

  OccupancyGrid field_from_points(const std::vector<P3>& cloud, int res) {
    return field_from_codes(encode_codes(cloud), res);
  }

  Mesh reconstruct(const std::vector<P3>& cloud, int res = 0) {
    return marching_cubes(field_from_points(cloud, res > 0 ? res : cfg.field_res),
                          cfg.mc_threshold);
  }

  Mesh mesh_from_codes(const std::vector<int>& codes, int res = 0) {
    return marching_cubes(field_from_codes(codes, res > 0 ? res : cfg.field_res),
                          cfg.mc_threshold);
  }
};

}  // namespace imam
