#include <cmath>
#include <vector>

#include "doctest.h"
#include "imam/decoder.hpp"
#include "imam/encoder.hpp"
#include "imam/prior.hpp"
#include "test_util.hpp"

using namespace imam;

namespace {

// fixed smooth projection weights, so scalar losses are deterministic
double pw(size_t k) { return std::sin(0.37 * double(k) + 0.11); }

template <class Container>
double weighted_sum(const Container& v) {
  double s = 0;
  for (size_t k = 0; k < v.size(); ++k) s += pw(k) * double(v[k]);
  return s;
}

Seq<double> seq_weights(int n, int d) {
  Seq<double> w(n, d);
  for (size_t k = 0; k < w.v.size(); ++k) w.v[k] = pw(k);
  return w;
}

Map2<double> map_weights(const Map2<double>& like) {
  Map2<double> w(like.h, like.w, like.c);
  for (size_t k = 0; k < w.v.size(); ++k) w.v[k] = pw(k);
  return w;
}

Grid3<double> grid_weights(const Grid3<double>& like) {
  Grid3<double> w(like.d, like.h, like.w, like.c);
  for (size_t k = 0; k < w.v.size(); ++k) w.v[k] = pw(k);
  return w;
}

Seq<double> random_seq(int n, int d, u64 seed) {
  Seq<double> x(n, d);
  Rng rng(seed);
  for (auto& v : x.v) v = rng.normal();
  return x;
}

Map2<double> random_map(int h, int w, int c, u64 seed) {
  Map2<double> x(h, w, c);
  Rng rng(seed);
  for (auto& v : x.v) v = rng.normal();
  return x;
}

Grid3<double> random_grid(int d, int h, int w, int c, u64 seed) {
  Grid3<double> x(d, h, w, c);
  Rng rng(seed);
  for (auto& v : x.v) v = rng.normal();
  return x;
}

constexpr double kTol = 1e-3;

}  // namespace

TEST_CASE("linear gradients") {
  for (Act act : {Act::none, Act::relu, Act::gelu}) {
    Linear<double> l(3, 5, act);
    Rng rng(11);
    l.init(rng);
    ParamStore<double> ps;
    l.reg(ps, "l");
    const Seq<double> x = random_seq(4, 3, 21);
    auto loss = [&](bool backward) {
      if (backward) ps.zero_grad();
      Seq<double> y = l.fwd(x, backward);
      const double s = weighted_sum(y.v);
      if (backward) l.bwd(seq_weights(y.n, y.d));
      return s;
    };
    const auto res = testutil::grad_check(ps, loss, 6, 31);
    CHECK(res.checked > 0);
    CHECK(res.max_rel < kTol);
  }
}

TEST_CASE("layer norm gradients") {
  LayerNorm<double> ln(6);
  Rng rng(2);
  // move gamma/beta off their init so the check is not trivial
  for (auto& g : ln.gamma.w) g = 1.0 + 0.1 * rng.normal();
  for (auto& b : ln.beta.w) b = 0.1 * rng.normal();
  ParamStore<double> ps;
  ln.reg(ps, "ln");
  const Seq<double> x = random_seq(5, 6, 22);
  auto loss = [&](bool backward) {
    if (backward) ps.zero_grad();
    Seq<double> y = ln.fwd(x, backward);
    const double s = weighted_sum(y.v);
    if (backward) ln.bwd(seq_weights(y.n, y.d));
    return s;
  };
  const auto res = testutil::grad_check(ps, loss, 8, 32);
  CHECK(res.max_rel < kTol);
}

TEST_CASE("embedding gradients") {
  Embedding<double> emb(7, 4);
  Rng rng(3);
  emb.init(rng);
  ParamStore<double> ps;
  emb.reg(ps, "emb");
  const std::vector<int> ids = {1, 0, 3, 1, 6};
  auto loss = [&](bool backward) {
    if (backward) ps.zero_grad();
    Seq<double> y = emb.fwd(ids, backward);
    const double s = weighted_sum(y.v);
    if (backward) emb.bwd(seq_weights(y.n, y.d));
    return s;
  };
  const auto res = testutil::grad_check(ps, loss, 10, 33);
  CHECK(res.max_rel < kTol);
}

TEST_CASE("causal attention gradients") {
  SelfAttention<double> att(8, 2);
  Rng rng(4);
  att.init(rng);
  ParamStore<double> ps;
  att.reg(ps, "att");
  const Seq<double> x = random_seq(5, 8, 23);
  auto loss = [&](bool backward) {
    if (backward) ps.zero_grad();
    Seq<double> y = att.fwd(x, backward);
    const double s = weighted_sum(y.v);
    if (backward) att.bwd(seq_weights(y.n, y.d));
    return s;
  };
  const auto res = testutil::grad_check(ps, loss, 8, 34);
  CHECK(res.max_rel < kTol);
}

TEST_CASE("conv2d gradients") {
  struct Case {
    int k, stride, pad;
  };
  for (const Case c : {Case{3, 1, 1}, Case{2, 2, 0}, Case{1, 1, 0}}) {
    Conv2d<double> conv(3, 4, c.k, c.stride, c.pad, Act::relu);
    Rng rng(5);
    conv.init(rng);
    ParamStore<double> ps;
    conv.reg(ps, "conv");
    const Map2<double> x = random_map(6, 6, 3, 24);
    auto loss = [&](bool backward) {
      if (backward) ps.zero_grad();
      Map2<double> y = conv.fwd(x, backward);
      const double s = weighted_sum(y.v);
      if (backward) conv.bwd(map_weights(y));
      return s;
    };
    const auto res = testutil::grad_check(ps, loss, 6, 35);
    CHECK(res.max_rel < kTol);
  }
}

TEST_CASE("transposed conv2d gradients") {
  ConvT2d<double> conv(3, 2, Act::relu);
  Rng rng(6);
  conv.init(rng);
  ParamStore<double> ps;
  conv.reg(ps, "convt");
  const Map2<double> x = random_map(4, 4, 3, 25);
  auto loss = [&](bool backward) {
    if (backward) ps.zero_grad();
    Map2<double> y = conv.fwd(x, backward);
    const double s = weighted_sum(y.v);
    if (backward) conv.bwd(map_weights(y));
    return s;
  };
  const auto res = testutil::grad_check(ps, loss, 6, 36);
  CHECK(res.max_rel < kTol);
}

TEST_CASE("unet2d gradients") {
  UNet2d<double> net(3, 2);
  Rng rng(7);
  net.init(rng);
  ParamStore<double> ps;
  net.reg(ps, "unet");
  testutil::jitter_params(ps, 62);
  const Map2<double> x = random_map(8, 8, 3, 26);
  auto loss = [&](bool backward) {
    if (backward) ps.zero_grad();
    Map2<double> y = net.fwd(x, backward);
    const double s = weighted_sum(y.v);
    if (backward) net.bwd(map_weights(y));
    return s;
  };
  const auto res = testutil::grad_check(ps, loss, 4, 37);
  CHECK(res.max_rel < kTol);
}

TEST_CASE("conv3d gradients") {
  Conv3d<double> conv(2, 3, 3, 1, 1, Act::relu);
  Rng rng(8);
  conv.init(rng);
  ParamStore<double> ps;
  conv.reg(ps, "conv3");
  const Grid3<double> x = random_grid(4, 4, 4, 2, 27);
  auto loss = [&](bool backward) {
    if (backward) ps.zero_grad();
    Grid3<double> y = conv.fwd(x, backward);
    const double s = weighted_sum(y.v);
    if (backward) conv.bwd(grid_weights(y));
    return s;
  };
  const auto res = testutil::grad_check(ps, loss, 6, 38);
  CHECK(res.max_rel < kTol);
}

TEST_CASE("transposed conv3d gradients") {
  ConvT3d<double> conv(2, 2, Act::relu);
  Rng rng(9);
  conv.init(rng);
  ParamStore<double> ps;
  conv.reg(ps, "convt3");
  const Grid3<double> x = random_grid(3, 3, 3, 2, 28);
  auto loss = [&](bool backward) {
    if (backward) ps.zero_grad();
    Grid3<double> y = conv.fwd(x, backward);
    const double s = weighted_sum(y.v);
    if (backward) conv.bwd(grid_weights(y));
    return s;
  };
  const auto res = testutil::grad_check(ps, loss, 6, 39);
  CHECK(res.max_rel < kTol);
}

TEST_CASE("chained conv3d stack gradients") {
  // down, up, and pointwise stages composed, as the grid coder arranges them
  Conv3d<double> down(2, 3, 3, 1, 1, Act::relu);
  ConvT3d<double> up(3, 3, Act::relu);
  Conv3d<double> head(3, 1, 1, 1, 0, Act::none);
  Rng rng(10);
  down.init(rng);
  up.init(rng);
  head.init(rng);
  ParamStore<double> ps;
  down.reg(ps, "stack.down");
  up.reg(ps, "stack.up");
  head.reg(ps, "stack.head");
  testutil::jitter_params(ps, 63);
  const Grid3<double> x = random_grid(3, 3, 3, 2, 29);
  auto loss = [&](bool backward) {
    if (backward) ps.zero_grad();
    Grid3<double> y = head.fwd(up.fwd(down.fwd(x, backward), backward), backward);
    const double s = weighted_sum(y.v);
    if (backward) down.bwd(up.bwd(head.bwd(grid_weights(y))));
    return s;
  };
  const auto res = testutil::grad_check(ps, loss, 4, 40);
  CHECK(res.max_rel < kTol);
}

TEST_CASE("point feature encoder gradients") {
  for (bool grid_pool : {false, true}) {
    PointNetEncoder<double> pn(4, 4, grid_pool);
    Rng rng(12);
    pn.init(rng);
    ParamStore<double> ps;
    pn.reg(ps, "pn");
    testutil::jitter_params(ps, 60);
    const auto pts = testutil::random_points(20, 30);
    auto loss = [&](bool backward) {
      if (backward) ps.zero_grad();
      Seq<double> y = pn.fwd(pts, backward);
      const double s = weighted_sum(y.v);
      if (backward) pn.bwd(seq_weights(y.n, y.d));
      return s;
    };
    const auto res = testutil::grad_check(ps, loss, 6, 41);
    CAPTURE(res.worst);
    CHECK(res.max_rel < kTol);
  }
}

// Full encoder/decoder pipeline on the continuous path (codes fed straight to
// the decoder). The quantizer's own gradients have closed-form checks in the
// loss tests; the assignment step is piecewise constant, so it is bypassed
// here to keep the loss differentiable.
TEST_CASE("stage-1 micro pipeline gradients") {
  for (RepMode mode : {RepMode::vector, RepMode::triplane, RepMode::grid}) {
    EncoderConfig ecfg;
    ecfg.mode = mode;
    ecfg.plane_res = 8;
    ecfg.down_res = 4;
    ecfg.feat_dim = 4;
    ecfg.trunk_dim = 8;
    ecfg.code_dim = 3;
    ecfg.grid_res = 4;
    ecfg.grid_down_res = 2;
    ecfg.flatten_order = flatten_orders_for(mode)[0];

    Stage1Encoder<double> enc(ecfg);
    Stage1Decoder<double> dec(ecfg, 1, 1, 8, 2);
    Rng rng(13);
    enc.init(rng);
    dec.init(rng);
    ParamStore<double> ps;
    enc.reg(ps, "enc");
    dec.reg(ps, "dec");
    testutil::jitter_params(ps, 61);

    const auto cloud = testutil::random_points(24, 51);
    const auto qpts = testutil::random_points(12, 52);
    std::vector<u8> labels(qpts.size());
    Rng lab(53);
    for (auto& y : labels) y = u8(lab.uniform_int(2));

    auto loss = [&](bool backward) {
      if (backward) ps.zero_grad();
      Seq<double> f = enc.encode(cloud, backward);
      DecodedField<double> field = dec.decode(f, backward);
      Seq<double> logits = dec.field_logits(field, qpts, backward);
      Seq<double> dlogits;
      const double l = occupancy_loss(logits, labels, backward ? &dlogits : nullptr);
      if (backward) {
        DecodedField<double> dfield;
        dfield.is_grid = field.is_grid;
        if (field.is_grid)
          dfield.grid = Grid3<double>(field.grid.d, field.grid.h, field.grid.w,
                                      field.grid.c);
        else
          dfield.tri = TriPlane<double>(field.tri.xy.h, field.tri.xy.c);
        dec.field_logits_backward(dlogits, qpts, dfield);
        Seq<double> df = dec.decode_backward(std::move(dfield));
        enc.backward(df);
      }
      return l;
    };
    // small step: the deep relu composition puts some pre-activations near
    // the kink, where a wide central difference straddles two linear pieces
    const auto res = testutil::grad_check(ps, loss, 2, 42, 1e-6);
    CAPTURE(res.worst);
    CHECK(res.checked > 0);
    CHECK(res.max_rel < kTol);
  }
}

TEST_CASE("prior gradients under every conditioning mode") {
  for (CondMode mode : {CondMode::none, CondMode::class_label, CondMode::partial,
                        CondMode::feature}) {
    PriorConfig cfg;
    cfg.vocab = 16;
    cfg.positions = 6;
    cfg.dim = 16;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.cond = mode;
    cfg.n_classes = 3;
    cfg.feature_dim = 5;
    cfg.cond_positions = mode == CondMode::partial ? 6 : 0;

    Prior<double> prior(cfg, 14);
    Rng rng(15);
    std::vector<int> codes(cfg.positions);
    for (auto& c : codes) c = int(rng.uniform_int(u64(cfg.vocab)));

    Condition cond;
    cond.mode = mode;
    cond.class_id = 1;
    if (mode == CondMode::partial) {
      cond.partial_codes.resize(cfg.cond_positions);
      for (auto& c : cond.partial_codes) c = int(rng.uniform_int(u64(cfg.vocab)));
    }
    if (mode == CondMode::feature) {
      cond.feature.resize(cfg.feature_dim);
      for (auto& f : cond.feature) f = float(rng.normal());
    }

    auto loss = [&](bool backward) {
      if (backward) prior.params.zero_grad();
      return prior.nll(codes, cond, backward);
    };
    const auto res = testutil::grad_check(prior.params, loss, 3, 43);
    CHECK(res.checked > 0);
    CHECK(res.max_rel < kTol);
  }
}
