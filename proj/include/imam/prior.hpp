#pragma once

#include "imam/nn.hpp"

namespace imam {

enum class CondMode { none, class_label, partial, feature };

CondMode cond_mode_from_name(const std::string& name);
const char* cond_mode_name(CondMode mode);

struct PriorConfig {
  int vocab = 256;     // codebook entries
  int positions = 64;  // modeled code slots m
  int dim = 128;
  int layers = 4;
  int heads = 4;
  CondMode cond = CondMode::none;
  int n_classes = 5;
  int feature_dim = 32;
  int cond_positions = 0;  // partial mode: prepended condition code tokens

  int cond_len() const {
    switch (cond) {
      case CondMode::none: return 0;
      case CondMode::class_label: return 1;
      case CondMode::feature: return 1;
      case CondMode::partial: return cond_positions;
    }
    return 0;
  }
  int context() const { return cond_len() + positions; }

  void validate() const {
    if (vocab <= 0 || positions <= 0 || dim <= 0 || layers <= 0 || heads <= 0)
      throw ConfigError("prior dims must be positive");
    if (dim % heads != 0) throw ConfigError("prior dim must be divisible by heads");
    if (cond == CondMode::partial && cond_positions <= 0)
      throw ConfigError("partial conditioning needs cond_positions > 0");
  }
};

struct Condition {
  CondMode mode = CondMode::none;
  int class_id = 0;
  std::vector<int> partial_codes;
  std::vector<float> feature;
};

// Decoder-only autoregressive model over code indices. Condition tokens are
// prepended before the start token; prediction targets are the code slots.
template <class T>
struct Prior {
  PriorConfig cfg;
  Embedding<T> tok_emb, pos_emb, sos_emb, cls_emb, cond_emb;
  Linear<T> feat_proj;
  struct Block {
    LayerNorm<T> ln1;
    SelfAttention<T> att;
    LayerNorm<T> ln2;
    Linear<T> fc1, fc2;
  };
  std::vector<Block> blocks;
  LayerNorm<T> ln_f;
  Linear<T> head1, head2;
  ParamStore<T> params;

  // params points into the layer objects; the model must stay put.
  Prior(const Prior&) = delete;
  Prior& operator=(const Prior&) = delete;

  Prior(const PriorConfig& cfg_, u64 init_seed) : cfg(cfg_) {
    cfg.validate();
    tok_emb = Embedding<T>(cfg.vocab, cfg.dim);
    pos_emb = Embedding<T>(cfg.context(), cfg.dim);
    sos_emb = Embedding<T>(1, cfg.dim);
    if (cfg.cond == CondMode::class_label) cls_emb = Embedding<T>(cfg.n_classes, cfg.dim);
    if (cfg.cond == CondMode::partial) cond_emb = Embedding<T>(cfg.vocab, cfg.dim);
    if (cfg.cond == CondMode::feature)
      feat_proj = Linear<T>(cfg.feature_dim, cfg.dim, Act::none);
    for (int l = 0; l < cfg.layers; ++l) {
      Block b;
      b.ln1 = LayerNorm<T>(cfg.dim);
      b.att = SelfAttention<T>(cfg.dim, cfg.heads);
      b.ln2 = LayerNorm<T>(cfg.dim);
      b.fc1 = Linear<T>(cfg.dim, 4 * cfg.dim, Act::gelu);
      b.fc2 = Linear<T>(4 * cfg.dim, cfg.dim, Act::none);
      blocks.push_back(std::move(b));
    }
    ln_f = LayerNorm<T>(cfg.dim);
    head1 = Linear<T>(cfg.dim, cfg.dim, Act::gelu);
    head2 = Linear<T>(cfg.dim, cfg.vocab, Act::none);

    Rng rng(hash_seed({init_seed, 0x9120a7ull}));
    tok_emb.init(rng);
    pos_emb.init(rng);
    sos_emb.init(rng);
    if (cfg.cond == CondMode::class_label) cls_emb.init(rng);
    if (cfg.cond == CondMode::partial) cond_emb.init(rng);
    if (cfg.cond == CondMode::feature) feat_proj.init(rng);
    for (auto& b : blocks) {
      b.att.init(rng);
      b.fc1.init(rng);
      b.fc2.init(rng);
    }
    head1.init(rng);
    head2.init(rng);

    tok_emb.reg(params, "tok");
    pos_emb.reg(params, "pos");
    sos_emb.reg(params, "sos");
    if (cfg.cond == CondMode::class_label) cls_emb.reg(params, "cls");
    if (cfg.cond == CondMode::partial) cond_emb.reg(params, "cond");
    if (cfg.cond == CondMode::feature) feat_proj.reg(params, "feat");
    for (size_t l = 0; l < blocks.size(); ++l) {
      const std::string p = "blk" + std::to_string(l);
      blocks[l].ln1.reg(params, p + ".ln1");
      blocks[l].att.reg(params, p + ".att");
      blocks[l].ln2.reg(params, p + ".ln2");
      blocks[l].fc1.reg(params, p + ".fc1");
      blocks[l].fc2.reg(params, p + ".fc2");
    }
    ln_f.reg(params, "lnf");
    head1.reg(params, "head1");
    head2.reg(params, "head2");
  }

  void check_condition(const Condition& cond) const {
    if (cond.mode != cfg.cond) throw Error("condition mode mismatch");
    if (cfg.cond == CondMode::class_label &&
        (cond.class_id < 0 || cond.class_id >= cfg.n_classes))
      throw Error("condition class id out of range");
    if (cfg.cond == CondMode::partial &&
        int(cond.partial_codes.size()) != cfg.cond_positions)
      throw Error("condition code count mismatch");
    if (cfg.cond == CondMode::feature && int(cond.feature.size()) != cfg.feature_dim)
      throw Error("condition feature size mismatch");
  }

  // Token embedding sequence for condition + SOS + code prefix.
  Seq<T> build_tokens(const std::vector<int>& prefix, const Condition& cond,
                      bool track) {
    check_condition(cond);
    const int cl = cfg.cond_len();
    const int len = cl + 1 + int(prefix.size());
    Seq<T> x(len, cfg.dim);

    if (cfg.cond == CondMode::class_label) {
      const Seq<T> e = cls_emb.fwd({cond.class_id}, track);
      std::copy_n(e.row(0), cfg.dim, x.row(0));
    } else if (cfg.cond == CondMode::partial) {
      const Seq<T> e = cond_emb.fwd(cond.partial_codes, track);
      for (int i = 0; i < cl; ++i) std::copy_n(e.row(i), cfg.dim, x.row(i));
    } else if (cfg.cond == CondMode::feature) {
      Seq<T> fv(1, cfg.feature_dim);
      for (int j = 0; j < cfg.feature_dim; ++j) fv.at(0, j) = T(cond.feature[j]);
      const Seq<T> e = feat_proj.fwd(fv, track);
      std::copy_n(e.row(0), cfg.dim, x.row(0));
    }

    const Seq<T> s = sos_emb.fwd({0}, track);
    std::copy_n(s.row(0), cfg.dim, x.row(cl));
    if (!prefix.empty()) {
      const Seq<T> e = tok_emb.fwd(prefix, track);
      for (size_t i = 0; i < prefix.size(); ++i)
        std::copy_n(e.row(int(i)), cfg.dim, x.row(cl + 1 + int(i)));
    }

    std::vector<int> pos_ids(len);
    for (int i = 0; i < len; ++i) pos_ids[i] = i;
    const Seq<T> p = pos_emb.fwd(pos_ids, track);
    for (size_t i = 0; i < x.v.size(); ++i) x.v[i] += p.v[i];
    return x;
  }

  Seq<T> backbone(Seq<T> x, bool track) {
    for (auto& b : blocks) {
      Seq<T> a = b.att.fwd(b.ln1.fwd(x, track), track);
      for (size_t i = 0; i < x.v.size(); ++i) x.v[i] += a.v[i];
      Seq<T> f = b.fc2.fwd(b.fc1.fwd(b.ln2.fwd(x, track), track), track);
      for (size_t i = 0; i < x.v.size(); ++i) x.v[i] += f.v[i];
    }
    return ln_f.fwd(std::move(x), track);
  }

  Seq<T> backbone_backward(Seq<T> dx) {
    dx = ln_f.bwd(dx);
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
      Seq<T> df = it->ln2.bwd(it->fc1.bwd(it->fc2.bwd(dx)));
      for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += df.v[i];
      Seq<T> da = it->ln1.bwd(it->att.bwd(dx));
      for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += da.v[i];
    }
    return dx;
  }

  // Mean NLL of the code sequence under teacher forcing. When backward is
  // true, gradients accumulate into params.
  double nll(const std::vector<int>& codes, const Condition& cond, bool backward) {
    if (int(codes.size()) != cfg.positions) throw Error("nll: code count mismatch");
    const int cl = cfg.cond_len();
    const int m = cfg.positions;
    const std::vector<int> prefix(codes.begin(), codes.end() - 1);
    Seq<T> x = build_tokens(prefix, cond, backward);
    Seq<T> h = backbone(std::move(x), backward);

    Seq<T> tail(m, cfg.dim);
    for (int t = 0; t < m; ++t) std::copy_n(h.row(cl + t), cfg.dim, tail.row(t));
    Seq<T> logits = head2.fwd(head1.fwd(tail, backward), backward);

    Seq<T> dlogits;
    const double loss = softmax_nll(logits, codes, backward ? &dlogits : nullptr);
    if (!backward) return loss;

    Seq<T> dtail = head1.bwd(head2.bwd(dlogits));
    Seq<T> dh(h.n, cfg.dim);
    for (int t = 0; t < m; ++t) std::copy_n(dtail.row(t), cfg.dim, dh.row(cl + t));
    Seq<T> dx = backbone_backward(std::move(dh));

    pos_emb.bwd(dx);
    if (!prefix.empty()) {
      Seq<T> dtok(int(prefix.size()), cfg.dim);
      for (size_t i = 0; i < prefix.size(); ++i)
        std::copy_n(dx.row(cl + 1 + int(i)), cfg.dim, dtok.row(int(i)));
      tok_emb.bwd(dtok);
    }
    Seq<T> dsos(1, cfg.dim);
    std::copy_n(dx.row(cl), cfg.dim, dsos.row(0));
    sos_emb.bwd(dsos);
    if (cfg.cond == CondMode::class_label) {
      Seq<T> dc(1, cfg.dim);
      std::copy_n(dx.row(0), cfg.dim, dc.row(0));
      cls_emb.bwd(dc);
    } else if (cfg.cond == CondMode::partial) {
      Seq<T> dc(cl, cfg.dim);
      for (int i = 0; i < cl; ++i) std::copy_n(dx.row(i), cfg.dim, dc.row(i));
      cond_emb.bwd(dc);
    } else if (cfg.cond == CondMode::feature) {
      Seq<T> dc(1, cfg.dim);
      std::copy_n(dx.row(0), cfg.dim, dc.row(0));
      feat_proj.bwd(dc);
    }
    return loss;
  }

  // Teacher-forced logits: row t scores the next-token distribution for slot
  // t given the condition and codes[0..t).
  Seq<T> forward_logits(const std::vector<int>& codes, const Condition& cond) {
    if (int(codes.size()) != cfg.positions)
      throw Error("forward_logits: code count mismatch");
    const int cl = cfg.cond_len();
    const int m = cfg.positions;
    const std::vector<int> prefix(codes.begin(), codes.end() - 1);
    Seq<T> x = build_tokens(prefix, cond, /*track=*/false);
    Seq<T> h = backbone(std::move(x), /*track=*/false);
    Seq<T> tail(m, cfg.dim);
    for (int t = 0; t < m; ++t) std::copy_n(h.row(cl + t), cfg.dim, tail.row(t));
    return head2.fwd(head1.fwd(tail, false), false);
  }

  // Ancestral sampling with top-k truncation and temperature.
  std::vector<int> sample(const Condition& cond, int top_k, double temperature,
                          u64 seed) {
    Rng rng(hash_seed({seed, 0x5a3b1eull}));
    std::vector<int> codes;
    codes.reserve(cfg.positions);
    const int cl = cfg.cond_len();
    std::vector<int> order(cfg.vocab);
    std::vector<double> probs(cfg.vocab);
    for (int t = 0; t < cfg.positions; ++t) {
      Seq<T> x = build_tokens(codes, cond, /*track=*/false);
      Seq<T> h = backbone(std::move(x), /*track=*/false);
      Seq<T> last(1, cfg.dim);
      std::copy_n(h.row(cl + t), cfg.dim, last.row(0));
      const Seq<T> logits = head2.fwd(head1.fwd(last, false), false);
      codes.push_back(sample_row(logits.row(0), top_k, temperature, rng, order, probs));
    }
    return codes;
  }

  int sample_row(const T* logits, int top_k, double temperature, Rng& rng,
                 std::vector<int>& order, std::vector<double>& probs) const {
    const int v = cfg.vocab;
    const int k = (top_k <= 0 || top_k > v) ? v : top_k;
    for (int i = 0; i < v; ++i) order[i] = i;
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
      return logits[a] != logits[b] ? logits[a] > logits[b] : a < b;
    });
    if (temperature <= 0) return order[0];
    const double mx = double(logits[order[0]]);
    double denom = 0;
    for (int i = 0; i < k; ++i) {
      probs[i] = std::exp((double(logits[order[i]]) - mx) / temperature);
      denom += probs[i];
    }
    double u = rng.uniform() * denom;
    for (int i = 0; i < k; ++i) {
      u -= probs[i];
      if (u <= 0) return order[i];
    }
    return order[k - 1];
  }
};

}  // namespace imam
