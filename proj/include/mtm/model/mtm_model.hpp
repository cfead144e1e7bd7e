#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtm/core/ops.hpp"
#include "mtm/core/rng.hpp"
#include "mtm/data/trajectory.hpp"
#include "mtm/mask/mask.hpp"

// Bidirectional masked trajectory model: per-modality tokenizers with
// sinusoidal time and learnable mode embeddings, a pre-norm transformer
// encoder over visible tokens, a decoder over the full grid with mode-specific
// mask tokens, and per-modality prediction heads.
//
// Hidden tokens are excluded from attention with an additive -inf key bias,
// which matches dropping them from the sequence bitwise: their softmax weights
// are exactly zero, so their values can never influence a visible position.

namespace mtm::model {

struct ModelConfig {
  int embed_dim = 64;
  int n_enc_layers = 2;
  int n_dec_layers = 1;
  int n_heads = 4;
  int head_hidden_layers = 2;
  int ffn_mult = 4;
  double dropout = 0.0;  // applied to attention weights and feed-forward outputs
  int segment_length = 4;
  std::array<int, data::kNumModalities> input_dims = {1, 4, 2};  // rtg, state, action

  int tokens() const { return segment_length * data::kNumModalities; }

  void validate() const {
    if (embed_dim % n_heads != 0) {
      throw std::invalid_argument("ModelConfig: embed_dim must be divisible by n_heads");
    }
    if (segment_length < 1) throw std::invalid_argument("ModelConfig: segment_length >= 1");
    if (head_hidden_layers < 0) throw std::invalid_argument("ModelConfig: bad head depth");
    if (!(dropout >= 0.0 && dropout < 1.0)) {
      throw std::invalid_argument("ModelConfig: dropout must be in [0,1)");
    }
  }
};

// Standard interleaved sin/cos encoding with base 10000, indexed by the
// timestep within the segment.
template <class S>
void sinusoidal_time(int t, int embed_dim, S* row) {
  for (int i = 0; i < embed_dim; i += 2) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / embed_dim);
    row[i] = static_cast<S>(std::sin(t * freq));
    if (i + 1 < embed_dim) row[i + 1] = static_cast<S>(std::cos(t * freq));
  }
}

namespace nn {

template <class S>
void trunc_normal_init(TensorPtr<S>& t, Rng& rng, double std_dev) {
  for (auto& x : t->v) {
    double z;
    do {
      z = rng.normal();
    } while (std::abs(z) > 2.0);
    x = static_cast<S>(z * std_dev);
  }
}

template <class S>
struct Linear {
  TensorPtr<S> w;  // [in, out]
  TensorPtr<S> b;  // [out]

  void init(int in, int out, Rng& rng, const std::string& name) {
    w = Tensor<S>::create({in, out}, true, name + ".w");
    b = Tensor<S>::create({out}, true, name + ".b");
    trunc_normal_init(w, rng, 0.02);
  }

  TensorPtr<S> forward(Tape<S>* tape, const TensorPtr<S>& x) const {
    return ops::add_bias<S>(tape, ops::matmul<S>(tape, x, w), b);
  }

  void collect(std::vector<TensorPtr<S>>& out) const {
    out.push_back(w);
    out.push_back(b);
  }
};

template <class S>
struct LayerNorm {
  TensorPtr<S> gamma, beta;

  void init(int dim, const std::string& name) {
    gamma = Tensor<S>::create({dim}, true, name + ".g");
    beta = Tensor<S>::create({dim}, true, name + ".b");
    std::fill(gamma->v.begin(), gamma->v.end(), S(1));
  }

  TensorPtr<S> forward(Tape<S>* tape, const TensorPtr<S>& x) const {
    return ops::layernorm<S>(tape, x, gamma, beta);
  }

  void collect(std::vector<TensorPtr<S>>& out) const {
    out.push_back(gamma);
    out.push_back(beta);
  }
};

// Pre-norm transformer block: x += attn(ln1(x)); x += ffn(ln2(x)).
template <class S>
struct Block {
  LayerNorm<S> ln1, ln2;
  Linear<S> wq, wk, wv, wo, ff1, ff2;
  int n_heads = 1;
  int embed_dim = 0;
  double dropout = 0.0;

  void init(const ModelConfig& cfg, Rng& rng, const std::string& name) {
    n_heads = cfg.n_heads;
    embed_dim = cfg.embed_dim;
    dropout = cfg.dropout;
    ln1.init(cfg.embed_dim, name + ".ln1");
    ln2.init(cfg.embed_dim, name + ".ln2");
    wq.init(cfg.embed_dim, cfg.embed_dim, rng, name + ".attn.wq");
    wk.init(cfg.embed_dim, cfg.embed_dim, rng, name + ".attn.wk");
    wv.init(cfg.embed_dim, cfg.embed_dim, rng, name + ".attn.wv");
    wo.init(cfg.embed_dim, cfg.embed_dim, rng, name + ".attn.wo");
    ff1.init(cfg.embed_dim, cfg.embed_dim * cfg.ffn_mult, rng, name + ".ffn.w1");
    ff2.init(cfg.embed_dim * cfg.ffn_mult, cfg.embed_dim, rng, name + ".ffn.w2");
  }

  // x: [B, N, E]; key_bias: optional constant [B*H, N, N] additive logits
  TensorPtr<S> forward(Tape<S>* tape, const TensorPtr<S>& x, const TensorPtr<S>& key_bias,
                       bool train, Rng* rng) const {
    const std::int64_t bsz = x->shape[0], n = x->shape[1], e = x->shape[2];
    const std::int64_t h = n_heads, dk = e / h;

    auto heads_split = [&](const TensorPtr<S>& flat) {
      auto t4 = ops::reshape<S>(tape, flat, {bsz, n, h, dk});
      auto perm = ops::permute<S>(tape, t4, {0, 2, 1, 3});  // [B, H, N, dk]
      return ops::reshape<S>(tape, perm, {bsz * h, n, dk});
    };

    auto hnorm = ln1.forward(tape, x);
    auto flat = ops::reshape<S>(tape, hnorm, {bsz * n, e});
    auto q = heads_split(wq.forward(tape, flat));
    auto k = heads_split(wk.forward(tape, flat));
    auto v = heads_split(wv.forward(tape, flat));

    auto kt = ops::permute<S>(tape, k, {0, 2, 1});  // [B*H, dk, N]
    auto scores = ops::scale<S>(tape, ops::bmm<S>(tape, q, kt),
                                S(1.0 / std::sqrt(static_cast<double>(dk))));
    if (key_bias) scores = ops::add<S>(tape, scores, key_bias);
    auto attn = ops::softmax<S>(tape, scores);
    attn = ops::dropout<S>(tape, attn, 1.0 - dropout, rng, train);
    auto ctx = ops::bmm<S>(tape, attn, v);  // [B*H, N, dk]
    auto merged = ops::reshape<S>(
        tape,
        ops::permute<S>(tape, ops::reshape<S>(tape, ctx, {bsz, h, n, dk}), {0, 2, 1, 3}),
        {bsz * n, e});
    auto attn_out = wo.forward(tape, merged);
    auto x1 = ops::add<S>(tape, x, ops::reshape<S>(tape, attn_out, {bsz, n, e}));

    auto f = ln2.forward(tape, x1);
    auto fflat = ops::reshape<S>(tape, f, {bsz * n, e});
    auto ff = ff2.forward(tape, ops::gelu<S>(tape, ff1.forward(tape, fflat)));
    auto ffd = ops::dropout<S>(tape, ops::reshape<S>(tape, ff, {bsz, n, e}),
                               1.0 - dropout, rng, train);
    return ops::add<S>(tape, x1, ffd);
  }

  void collect(std::vector<TensorPtr<S>>& out) const {
    ln1.collect(out);
    ln2.collect(out);
    wq.collect(out);
    wk.collect(out);
    wv.collect(out);
    wo.collect(out);
    ff1.collect(out);
    ff2.collect(out);
  }
};

// Prediction head: hidden [Linear -> LayerNorm -> GELU] stages, linear output.
template <class S>
struct Head {
  std::vector<Linear<S>> hidden;
  std::vector<LayerNorm<S>> norms;
  Linear<S> out;

  void init(const ModelConfig& cfg, int out_dim, Rng& rng, const std::string& name) {
    hidden.resize(static_cast<std::size_t>(cfg.head_hidden_layers));
    norms.resize(static_cast<std::size_t>(cfg.head_hidden_layers));
    for (int i = 0; i < cfg.head_hidden_layers; ++i) {
      hidden[static_cast<std::size_t>(i)].init(cfg.embed_dim, cfg.embed_dim, rng,
                                               name + ".h" + std::to_string(i));
      norms[static_cast<std::size_t>(i)].init(cfg.embed_dim,
                                              name + ".ln" + std::to_string(i));
    }
    out.init(cfg.embed_dim, out_dim, rng, name + ".out");
  }

  TensorPtr<S> forward(Tape<S>* tape, TensorPtr<S> x) const {
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      x = ops::gelu<S>(tape, norms[i].forward(tape, hidden[i].forward(tape, x)));
    }
    return out.forward(tape, x);
  }

  void collect(std::vector<TensorPtr<S>>& out_params) const {
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      hidden[i].collect(out_params);
      norms[i].collect(out_params);
    }
    out.collect(out_params);
  }
};

}  // namespace nn

// Assembled, normalized model input. `visible` is mask AND presence per token;
// presence weights are per (segment, timestep) cell.
template <class S>
struct Batch {
  int size = 0;
  std::array<TensorPtr<S>, data::kNumModalities> raw;  // [B, L, dim_m], normalized
  std::vector<std::uint8_t> visible;                   // B * 3L
  std::array<std::vector<S>, data::kNumModalities> presence_w;  // B*L each
};

template <class S>
struct Prediction {
  std::array<TensorPtr<S>, data::kNumModalities> pred;  // [B, L, dim_m], normalized
};

template <class S>
class MtmModel {
 public:
  MtmModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(derive_seed(seed, 0x90de1));
    for (int m = 0; m < data::kNumModalities; ++m) {
      tok_[m].init(cfg_.input_dims[static_cast<std::size_t>(m)], cfg_.embed_dim, rng,
                   std::string("tok.") + data::modality_name(m));
    }
    mode_embed_ = Tensor<S>::create({data::kNumModalities, cfg_.embed_dim}, true, "mode_embed");
    mask_token_ = Tensor<S>::create({data::kNumModalities, cfg_.embed_dim}, true, "mask_token");
    nn::trunc_normal_init(mode_embed_, rng, 0.02);
    nn::trunc_normal_init(mask_token_, rng, 0.02);
    enc_.resize(static_cast<std::size_t>(cfg_.n_enc_layers));
    for (int i = 0; i < cfg_.n_enc_layers; ++i) {
      enc_[static_cast<std::size_t>(i)].init(cfg_, rng, "enc" + std::to_string(i));
    }
    dec_.resize(static_cast<std::size_t>(cfg_.n_dec_layers));
    for (int i = 0; i < cfg_.n_dec_layers; ++i) {
      dec_[static_cast<std::size_t>(i)].init(cfg_, rng, "dec" + std::to_string(i));
    }
    enc_norm_.init(cfg_.embed_dim, "enc_norm");
    dec_norm_.init(cfg_.embed_dim, "dec_norm");
    for (int m = 0; m < data::kNumModalities; ++m) {
      heads_[m].init(cfg_, cfg_.input_dims[static_cast<std::size_t>(m)], rng,
                     std::string("head.") + data::modality_name(m));
    }
    collect_params();
  }

  const ModelConfig& config() const { return cfg_; }
  const std::vector<TensorPtr<S>>& params() const { return params_; }

  std::int64_t param_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p->numel();
    return n;
  }

  // token(t, m) = E^m(x_t^m) + sinusoidal_time(t) + mode_embed(m), arranged as
  // [B, 3L, E] in (t, mode) order.
  TensorPtr<S> tokenize(Tape<S>* tape, const Batch<S>& batch) const {
    const int L = cfg_.segment_length;
    const std::int64_t bsz = batch.size;
    std::array<TensorPtr<S>, data::kNumModalities> lifted;
    for (int m = 0; m < data::kNumModalities; ++m) {
      const int dim = cfg_.input_dims[static_cast<std::size_t>(m)];
      if (batch.raw[m]->shape != std::vector<std::int64_t>{bsz, L, dim}) {
        throw std::invalid_argument(
            std::string("tokenize: raw ") + data::modality_name(m) + " shape " +
            shape_str(*batch.raw[m]) + " does not match config");
      }
      auto flat = ops::reshape<S>(tape, batch.raw[m], {bsz * L, dim});
      lifted[m] = ops::reshape<S>(tape, tok_[m].forward(tape, flat),
                                  {bsz, L, 1, cfg_.embed_dim});
    }
    // interleave modalities within each timestep: [B, L, 3, E] -> [B, 3L, E]
    auto grid = concat_axis2(tape, lifted);
    auto seq = ops::reshape<S>(tape, grid, {bsz, static_cast<std::int64_t>(cfg_.tokens()),
                                            cfg_.embed_dim});
    seq = ops::add_rows<S>(tape, seq, time_table());
    seq = ops::add_rows<S>(tape, seq, ops::gather_rows<S>(tape, mode_embed_, mode_pattern()));
    return seq;
  }

  // Bidirectional encoder over visible tokens. Key bias keeps hidden tokens
  // out of every attention sum; rows at hidden positions are computed but
  // never consumed.
  TensorPtr<S> encode(Tape<S>* tape, const TensorPtr<S>& tokens,
                      const std::vector<std::uint8_t>& visible, bool train, Rng* rng) const {
    const std::int64_t bsz = tokens->shape[0], n = tokens->shape[1];
    check_some_visible(visible, bsz, n);
    auto key_bias = make_key_bias(tokens, visible);
    auto x = tokens;
    for (const auto& block : enc_) x = block.forward(tape, x, key_bias, train, rng);
    return enc_norm_.forward(tape, x);
  }

  // Decoder input: encoder latents at visible slots, mask token + time + mode
  // embeddings at hidden slots. Full bidirectional attention.
  TensorPtr<S> decode(Tape<S>* tape, const TensorPtr<S>& enc_out,
                      const std::vector<std::uint8_t>& visible, bool train, Rng* rng) const {
    auto mask_rows = ops::add_rows<S>(
        tape,
        ops::reshape<S>(tape, ops::gather_rows<S>(tape, mask_token_, mode_pattern()),
                        {1, static_cast<std::int64_t>(cfg_.tokens()), cfg_.embed_dim}),
        time_table());
    // collapse the leading singleton: [1, N, E] -> [N, E]
    auto table = ops::reshape<S>(tape, mask_rows,
                                 {static_cast<std::int64_t>(cfg_.tokens()), cfg_.embed_dim});
    table = ops::add<S>(tape, table, ops::gather_rows<S>(tape, mode_embed_, mode_pattern()));
    auto x = ops::mix_by_mask<S>(tape, enc_out, table, visible);
    for (const auto& block : dec_) x = block.forward(tape, x, nullptr, train, rng);
    return dec_norm_.forward(tape, x);
  }

  // Per-modality predictions for every grid cell, in normalized units.
  Prediction<S> predict(Tape<S>* tape, const TensorPtr<S>& dec_out) const {
    const std::int64_t bsz = dec_out->shape[0];
    const int L = cfg_.segment_length;
    Prediction<S> out;
    for (int m = 0; m < data::kNumModalities; ++m) {
      std::vector<std::int64_t> rows(static_cast<std::size_t>(L));
      for (int t = 0; t < L; ++t) {
        rows[static_cast<std::size_t>(t)] = static_cast<std::int64_t>(t) * data::kNumModalities + m;
      }
      auto cells = ops::gather_rows<S>(tape, dec_out, rows);  // [B, L, E]
      auto flat = ops::reshape<S>(tape, cells, {bsz * L, cfg_.embed_dim});
      auto pred = heads_[m].forward(tape, flat);
      out.pred[m] = ops::reshape<S>(tape, pred,
                                    {bsz, L, cfg_.input_dims[static_cast<std::size_t>(m)]});
    }
    return out;
  }

  Prediction<S> reconstruct(Tape<S>* tape, const Batch<S>& batch, bool train = false,
                            Rng* rng = nullptr) const {
    auto tokens = tokenize(tape, batch);
    auto enc = encode(tape, tokens, batch.visible, train, rng);
    auto dec = decode(tape, enc, batch.visible, train, rng);
    return predict(tape, dec);
  }

  // Encoder latents for a short custom sequence at t = 0: used for
  // representation extraction. `modalities` lists the visible modalities, and
  // inputs[i] is a [B, dim] tensor for modalities[i]. Returns [B, k, E].
  TensorPtr<S> encode_partial(Tape<S>* tape, std::span<const int> modalities,
                              std::span<const TensorPtr<S>> inputs) const {
    if (modalities.empty() || modalities.size() != inputs.size()) {
      throw std::invalid_argument("encode_partial: need one input per modality");
    }
    const std::int64_t bsz = inputs[0]->shape[0];
    const std::int64_t n = static_cast<std::int64_t>(modalities.size());
    std::vector<TensorPtr<S>> lifted(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < modalities.size(); ++i) {
      const int m = modalities[i];
      auto tok = tok_[m].forward(tape, inputs[i]);  // [B, E]
      lifted[i] = ops::reshape<S>(tape, tok, {bsz, 1, cfg_.embed_dim});
    }
    TensorPtr<S> seq = lifted.size() == 1
                           ? lifted[0]
                           : cat_axis1(tape, lifted, bsz);
    // time embedding at t=0 plus each token's mode embedding
    std::vector<std::int64_t> mode_rows(modalities.begin(), modalities.end());
    auto table = ops::gather_rows<S>(tape, mode_embed_, mode_rows);
    auto pe = Tensor<S>::create({n, cfg_.embed_dim});
    sinusoidal_time<S>(0, cfg_.embed_dim, pe->v.data());
    for (std::int64_t r = 1; r < n; ++r) {
      std::copy_n(pe->v.begin(), cfg_.embed_dim, pe->v.begin() + r * cfg_.embed_dim);
    }
    seq = ops::add_rows<S>(tape, seq, ops::add<S>(tape, table, pe));
    std::vector<std::uint8_t> visible(static_cast<std::size_t>(bsz * n), 1);
    auto key_bias = make_key_bias(seq, visible);
    auto x = seq;
    for (const auto& block : enc_) x = block.forward(tape, x, key_bias, false, nullptr);
    return enc_norm_.forward(tape, x);
  }

 private:
  TensorPtr<S> time_table() const {
    auto pe = Tensor<S>::create({static_cast<std::int64_t>(cfg_.tokens()), cfg_.embed_dim});
    for (int t = 0; t < cfg_.segment_length; ++t) {
      for (int m = 0; m < data::kNumModalities; ++m) {
        sinusoidal_time<S>(t, cfg_.embed_dim,
                           pe->v.data() + static_cast<std::size_t>(
                               t * data::kNumModalities + m) * cfg_.embed_dim);
      }
    }
    return pe;
  }

  std::vector<std::int64_t> mode_pattern() const {
    std::vector<std::int64_t> rows(static_cast<std::size_t>(cfg_.tokens()));
    for (int t = 0; t < cfg_.segment_length; ++t) {
      for (int m = 0; m < data::kNumModalities; ++m) {
        rows[static_cast<std::size_t>(t * data::kNumModalities + m)] = m;
      }
    }
    return rows;
  }

  static void check_some_visible(const std::vector<std::uint8_t>& visible,
                                 std::int64_t bsz, std::int64_t n) {
    if (visible.size() != static_cast<std::size_t>(bsz * n)) {
      throw std::invalid_argument("encode: visibility flag count != B*N");
    }
    for (std::int64_t b = 0; b < bsz; ++b) {
      bool any = false;
      for (std::int64_t i = 0; i < n && !any; ++i) any = visible[b * n + i] != 0;
      if (!any) {
        throw std::invalid_argument("encode: segment " + std::to_string(b) +
                                    " has zero visible tokens");
      }
    }
  }

  TensorPtr<S> make_key_bias(const TensorPtr<S>& tokens,
                             const std::vector<std::uint8_t>& visible) const {
    const std::int64_t bsz = tokens->shape[0], n = tokens->shape[1];
    const std::int64_t h = cfg_.n_heads;
    auto bias = Tensor<S>::create({bsz * h, n, n});
    const S neg_inf = -std::numeric_limits<S>::infinity();
    for (std::int64_t b = 0; b < bsz; ++b) {
      // one row pattern per batch element, broadcast across heads and queries
      std::vector<S> row(static_cast<std::size_t>(n));
      for (std::int64_t j = 0; j < n; ++j) {
        row[static_cast<std::size_t>(j)] = visible[b * n + j] ? S(0) : neg_inf;
      }
      for (std::int64_t hh = 0; hh < h; ++hh) {
        for (std::int64_t q = 0; q < n; ++q) {
          std::copy(row.begin(), row.end(),
                    bias->v.begin() + ((b * h + hh) * n + q) * n);
        }
      }
    }
    return bias;
  }

  // concat [B, L, 1, E] x3 over axis 2 via interleaved copy
  TensorPtr<S> concat_axis2(Tape<S>* tape,
                            const std::array<TensorPtr<S>, data::kNumModalities>& parts) const {
    // implemented with gather over a rebuilt [B, 3L, E]: stack along axis 1
    // then reorder rows so index t*3+m holds modality m at timestep t
    const std::int64_t bsz = parts[0]->shape[0];
    const std::int64_t L = parts[0]->shape[1];
    std::vector<TensorPtr<S>> flat;
    for (const auto& p : parts) {
      flat.push_back(ops::reshape<S>(tape, p, {bsz, L, cfg_.embed_dim}));
    }
    auto stacked = cat_axis1(tape, flat, bsz);  // [B, 3L, E]: all rtg, all state, all action
    std::vector<std::int64_t> order(static_cast<std::size_t>(3 * L));
    for (std::int64_t t = 0; t < L; ++t) {
      for (std::int64_t m = 0; m < data::kNumModalities; ++m) {
        order[static_cast<std::size_t>(t * data::kNumModalities + m)] = m * L + t;
      }
    }
    return ops::gather_rows<S>(tape, stacked, order);
  }

  // concat 3D tensors [B, Ni, E] along axis 1
  static TensorPtr<S> cat_axis1(Tape<S>* tape, const std::vector<TensorPtr<S>>& xs,
                                std::int64_t bsz) {
    std::vector<TensorPtr<S>> as2d;
    std::int64_t total = 0;
    const std::int64_t e = xs[0]->shape[2];
    for (const auto& x : xs) total += x->shape[1];
    // reorder through 2D concat along axis 0 after moving batch inside rows:
    // [B, Ni, E] -> [B*Ni, E]; concat would interleave wrongly, so place batch
    // blocks per input and regather.
    for (const auto& x : xs) {
      as2d.push_back(ops::reshape<S>(tape, x, {x->shape[0] * x->shape[1], e}));
    }
    auto big = ops::concat<S>(tape, as2d, 0);  // [sum(B*Ni), E] grouped by input
    // gather rows back into [B, total, E] order
    std::vector<std::int64_t> order;
    order.reserve(static_cast<std::size_t>(bsz * total));
    std::vector<std::int64_t> offsets;
    std::int64_t off = 0;
    for (const auto& x : xs) {
      offsets.push_back(off);
      off += x->shape[0] * x->shape[1];
    }
    for (std::int64_t b = 0; b < bsz; ++b) {
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const std::int64_t ni = xs[i]->shape[1];
        for (std::int64_t r = 0; r < ni; ++r) {
          order.push_back(offsets[i] + b * ni + r);
        }
      }
    }
    auto gathered = ops::gather_rows<S>(tape, big, order);  // [B*total, E]
    return ops::reshape<S>(tape, gathered, {bsz, total, e});
  }

  void collect_params() {
    params_.clear();
    for (int m = 0; m < data::kNumModalities; ++m) tok_[m].collect(params_);
    params_.push_back(mode_embed_);
    params_.push_back(mask_token_);
    for (const auto& b : enc_) b.collect(params_);
    enc_norm_.collect(params_);
    for (const auto& b : dec_) b.collect(params_);
    dec_norm_.collect(params_);
    for (int m = 0; m < data::kNumModalities; ++m) heads_[m].collect(params_);
  }

  ModelConfig cfg_;
  nn::Linear<S> tok_[data::kNumModalities];
  TensorPtr<S> mode_embed_;
  TensorPtr<S> mask_token_;
  std::vector<nn::Block<S>> enc_;
  std::vector<nn::Block<S>> dec_;
  nn::LayerNorm<S> enc_norm_, dec_norm_;
  nn::Head<S> heads_[data::kNumModalities];
  std::vector<TensorPtr<S>> params_;
};

// Builds a normalized batch from segments and their mask grids. Visibility is
// mask AND presence; presence weights cover all cells of present modalities.
template <class S>
Batch<S> make_batch(std::span<const data::Segment> segs,
                    std::span<const mask::MaskGrid> masks, const ModelConfig& cfg,
                    const data::NormStats& stats) {
  if (segs.empty() || segs.size() != masks.size()) {
    throw std::invalid_argument("make_batch: need one mask per segment");
  }
  const int L = cfg.segment_length;
  const std::int64_t bsz = static_cast<std::int64_t>(segs.size());
  Batch<S> batch;
  batch.size = static_cast<int>(bsz);
  for (int m = 0; m < data::kNumModalities; ++m) {
    batch.raw[m] = Tensor<S>::create({bsz, L, cfg.input_dims[static_cast<std::size_t>(m)]});
    batch.presence_w[m].assign(static_cast<std::size_t>(bsz * L), S(0));
  }
  batch.visible.assign(static_cast<std::size_t>(bsz) * cfg.tokens(), 0);

  for (std::int64_t b = 0; b < bsz; ++b) {
    const auto& seg = segs[static_cast<std::size_t>(b)];
    const auto& grid = masks[static_cast<std::size_t>(b)];
    if (seg.length != L || grid.length != L) {
      throw std::invalid_argument("make_batch: segment/mask length != config segment_length");
    }
    const float* raw_arrays[data::kNumModalities] = {seg.rtg.data(), seg.states.data(),
                                                     seg.actions.data()};
    for (int m = 0; m < data::kNumModalities; ++m) {
      const int dim = cfg.input_dims[static_cast<std::size_t>(m)];
      for (int t = 0; t < L; ++t) {
        if (seg.present[m]) {
          batch.presence_w[m][static_cast<std::size_t>(b * L + t)] = S(1);
          for (int d = 0; d < dim; ++d) {
            const double z = stats.apply_one(m, d, raw_arrays[m][t * dim + d]);
            batch.raw[m]->v[static_cast<std::size_t>((b * L + t) * dim + d)] =
                static_cast<S>(z);
          }
        }
        const bool vis = grid.visible(t, m) && seg.present[m];
        batch.visible[static_cast<std::size_t>(b) * cfg.tokens() +
                      static_cast<std::size_t>(t * data::kNumModalities + m)] = vis ? 1 : 0;
      }
    }
  }
  return batch;
}

}  // namespace mtm::model
