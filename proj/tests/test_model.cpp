#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mtm/core/gradcheck.hpp"
#include "mtm/model/mtm_model.hpp"

using namespace mtm;
using namespace mtm::model;
using data::kAction;
using data::kRtg;
using data::kState;

namespace {

ModelConfig tiny_config(int embed = 16, int L = 2) {
  ModelConfig cfg;
  cfg.embed_dim = embed;
  cfg.segment_length = L;
  cfg.n_enc_layers = 2;
  cfg.n_dec_layers = 1;
  cfg.n_heads = 4;
  cfg.dropout = 0.0;
  cfg.input_dims = {1, 3, 2};
  return cfg;
}

data::NormStats identity_stats(const ModelConfig& cfg) {
  data::NormStats st;
  for (int m = 0; m < data::kNumModalities; ++m) {
    st.mean[m].assign(static_cast<std::size_t>(cfg.input_dims[static_cast<std::size_t>(m)]), 0.0);
    st.stdev[m].assign(static_cast<std::size_t>(cfg.input_dims[static_cast<std::size_t>(m)]), 1.0);
  }
  return st;
}

data::Segment random_segment(const ModelConfig& cfg, Rng& rng) {
  data::Segment seg;
  seg.length = cfg.segment_length;
  seg.state_dim = cfg.input_dims[kState];
  seg.action_dim = cfg.input_dims[kAction];
  seg.rtg.resize(static_cast<std::size_t>(seg.length));
  seg.states.resize(static_cast<std::size_t>(seg.length) * seg.state_dim);
  seg.actions.resize(static_cast<std::size_t>(seg.length) * seg.action_dim);
  for (auto& x : seg.rtg) x = static_cast<float>(rng.normal());
  for (auto& x : seg.states) x = static_cast<float>(rng.normal());
  for (auto& x : seg.actions) x = static_cast<float>(rng.normal());
  return seg;
}

}  // namespace

TEST_CASE("sinusoidal time embedding at t=0: sines 0, cosines 1") {
  std::vector<double> row(8);
  sinusoidal_time<double>(0, 8, row.data());
  for (int i = 0; i < 8; i += 2) {
    CHECK(row[i] == 0.0);
    CHECK(row[i + 1] == 1.0);
  }
}

TEST_CASE("tokenize: output grid is [B, 3L, E]") {
  auto cfg = tiny_config();
  MtmModel<double> m(cfg, 1);
  Rng rng(2);
  auto seg = random_segment(cfg, rng);
  auto grid = mask::MaskGrid::all_visible(cfg.segment_length);
  auto batch = make_batch<double>(std::vector{seg}, std::vector{grid}, cfg, identity_stats(cfg));
  auto tokens = m.tokenize(nullptr, batch);
  CHECK(tokens->shape == std::vector<std::int64_t>{1, 6, 16});
}

TEST_CASE("tokens with identical raw values but different modalities differ") {
  auto cfg = tiny_config();
  cfg.input_dims = {1, 1, 1};  // same raw dim so values can match exactly
  MtmModel<double> m(cfg, 3);
  Rng rng(4);
  data::Segment seg;
  seg.length = cfg.segment_length;
  seg.state_dim = 1;
  seg.action_dim = 1;
  seg.rtg.assign(2, 0.7f);
  seg.states.assign(2, 0.7f);
  seg.actions.assign(2, 0.7f);
  auto grid = mask::MaskGrid::all_visible(2);
  auto batch = make_batch<double>(std::vector{seg}, std::vector{grid}, cfg, identity_stats(cfg));
  auto tokens = m.tokenize(nullptr, batch);
  // same timestep, different modality: rows 0 (rtg) vs 1 (state) vs 2 (action)
  bool differ01 = false, differ12 = false;
  for (int e = 0; e < 16; ++e) {
    differ01 = differ01 || tokens->v[0 * 16 + e] != tokens->v[1 * 16 + e];
    differ12 = differ12 || tokens->v[1 * 16 + e] != tokens->v[2 * 16 + e];
  }
  CHECK(differ01);
  CHECK(differ12);
}

TEST_CASE("encoder ignores hidden-token values exactly") {
  auto cfg = tiny_config();
  MtmModel<double> m(cfg, 5);
  Rng rng(6);
  auto st = identity_stats(cfg);
  auto seg = random_segment(cfg, rng);
  mask::MaskGrid grid = mask::MaskGrid::all_hidden(cfg.segment_length);
  grid.set(0, kState, true);
  grid.set(1, kState, true);
  grid.set(0, kAction, true);

  auto batch1 = make_batch<double>(std::vector{seg}, std::vector{grid}, cfg, st);
  auto out1 = m.reconstruct(nullptr, batch1);

  // perturb every hidden cell's raw value arbitrarily
  auto seg2 = seg;
  for (int t = 0; t < cfg.segment_length; ++t) {
    if (!grid.visible(t, kRtg)) seg2.rtg[static_cast<std::size_t>(t)] += 1000.0f;
    if (!grid.visible(t, kState)) {
      for (int d = 0; d < seg2.state_dim; ++d) {
        seg2.states[static_cast<std::size_t>(t * seg2.state_dim + d)] -= 77.0f;
      }
    }
    if (!grid.visible(t, kAction)) {
      for (int d = 0; d < seg2.action_dim; ++d) {
        seg2.actions[static_cast<std::size_t>(t * seg2.action_dim + d)] *= -31.0f;
      }
    }
  }
  auto batch2 = make_batch<double>(std::vector{seg2}, std::vector{grid}, cfg, st);
  auto out2 = m.reconstruct(nullptr, batch2);
  for (int mm = 0; mm < data::kNumModalities; ++mm) {
    CHECK(out1.pred[mm]->v == out2.pred[mm]->v);  // bitwise
  }
}

TEST_CASE("encode with zero visible tokens is an error") {
  auto cfg = tiny_config();
  MtmModel<double> m(cfg, 7);
  Rng rng(8);
  auto seg = random_segment(cfg, rng);
  auto grid = mask::MaskGrid::all_hidden(cfg.segment_length);
  auto batch = make_batch<double>(std::vector{seg}, std::vector{grid}, cfg, identity_stats(cfg));
  CHECK_THROWS_AS(m.reconstruct(nullptr, batch), std::invalid_argument);
}

TEST_CASE("single visible token matches processing that token alone") {
  auto cfg = tiny_config();
  MtmModel<double> m(cfg, 9);
  Rng rng(10);
  auto seg = random_segment(cfg, rng);
  mask::MaskGrid grid = mask::MaskGrid::all_hidden(cfg.segment_length);
  grid.set(0, kState, true);  // t=0 so the standalone sequence shares its time embedding
  auto batch = make_batch<double>(std::vector{seg}, std::vector{grid}, cfg, identity_stats(cfg));
  auto tokens = m.tokenize(nullptr, batch);
  auto enc = m.encode(nullptr, tokens, batch.visible, false, nullptr);

  auto state_in = Tensor<double>::create({1, cfg.input_dims[kState]});
  for (int d = 0; d < cfg.input_dims[kState]; ++d) {
    state_in->v[static_cast<std::size_t>(d)] = seg.states[static_cast<std::size_t>(d)];
  }
  const int mods[1] = {kState};
  const TensorPtr<double> ins[1] = {state_in};
  auto alone = m.encode_partial(nullptr, mods, ins);
  // sequence position of (t=0, state) is row 1
  for (int e = 0; e < cfg.embed_dim; ++e) {
    CHECK(enc->v[static_cast<std::size_t>(1 * cfg.embed_dim + e)] ==
          alone->v[static_cast<std::size_t>(e)]);
  }
}

TEST_CASE("decoder ignores mask tokens under the FULL mask") {
  auto cfg = tiny_config();
  MtmModel<double> m(cfg, 11);
  Rng rng(12);
  auto seg = random_segment(cfg, rng);
  auto grid = mask::MaskGrid::all_visible(cfg.segment_length);
  auto st = identity_stats(cfg);
  auto batch = make_batch<double>(std::vector{seg}, std::vector{grid}, cfg, st);
  auto out1 = m.reconstruct(nullptr, batch);
  // clobber the mask tokens; a FULL mask must not notice
  for (auto& p : m.params()) {
    if (p->name == "mask_token") {
      for (auto& x : p->v) x += 123.0;
    }
  }
  auto out2 = m.reconstruct(nullptr, batch);
  for (int mm = 0; mm < data::kNumModalities; ++mm) {
    CHECK(out1.pred[mm]->v == out2.pred[mm]->v);
  }
}

TEST_CASE("reconstruct: shapes match modalities and eval mode is deterministic") {
  auto cfg = tiny_config();
  MtmModel<double> m(cfg, 13);
  Rng rng(14);
  auto seg = random_segment(cfg, rng);
  Rng mask_rng(15);
  auto grid = mask::random_autoregressive_mask(cfg.segment_length, 0.0, 0.6, mask_rng);
  auto batch = make_batch<double>(std::vector{seg}, std::vector{grid}, cfg, identity_stats(cfg));
  auto p1 = m.reconstruct(nullptr, batch);
  auto p2 = m.reconstruct(nullptr, batch);
  CHECK(p1.pred[kRtg]->shape == std::vector<std::int64_t>{1, 2, 1});
  CHECK(p1.pred[kState]->shape == std::vector<std::int64_t>{1, 2, 3});
  CHECK(p1.pred[kAction]->shape == std::vector<std::int64_t>{1, 2, 2});
  for (int mm = 0; mm < data::kNumModalities; ++mm) {
    CHECK(p1.pred[mm]->v == p2.pred[mm]->v);
  }
}

TEST_CASE("hidden-cell raw inputs get exactly zero gradient") {
  auto cfg = tiny_config();
  MtmModel<double> m(cfg, 17);
  Rng rng(18);
  auto seg = random_segment(cfg, rng);
  mask::MaskGrid grid = mask::MaskGrid::all_hidden(cfg.segment_length);
  grid.set(0, kState, true);
  grid.set(0, kAction, true);
  auto batch = make_batch<double>(std::vector{seg}, std::vector{grid}, cfg, identity_stats(cfg));
  for (auto& r : batch.raw) {
    r->requires_grad = true;
    r->ensure_grad();
  }
  Tape<double> tape;
  auto pred = m.reconstruct(&tape, batch);
  // sum all predictions into a scalar loss
  TensorPtr<double> loss;
  for (int mm = 0; mm < data::kNumModalities; ++mm) {
    auto s = ops::mean_all<double>(&tape, pred.pred[mm]);
    loss = loss ? ops::add<double>(&tape, loss, s) : s;
  }
  tape.backward(loss);
  for (int t = 0; t < cfg.segment_length; ++t) {
    for (int mm = 0; mm < data::kNumModalities; ++mm) {
      if (grid.visible(t, mm)) continue;
      const int dim = cfg.input_dims[static_cast<std::size_t>(mm)];
      for (int d = 0; d < dim; ++d) {
        CHECK(batch.raw[mm]->g[static_cast<std::size_t>(t * dim + d)] == 0.0);
      }
    }
  }
}

TEST_CASE("attention blocks are permutation-equivariant when embeddings travel along") {
  ModelConfig cfg = tiny_config();
  nn::Block<double> block;
  Rng init_rng(21);
  block.init(cfg, init_rng, "blk");
  Rng rng(22);
  const std::int64_t n = 6, e = cfg.embed_dim;
  auto x = Tensor<double>::create({1, n, e});
  for (auto& v : x->v) v = rng.normal();
  auto y = block.forward(nullptr, x, nullptr, false, nullptr);

  std::vector<int> perm{3, 0, 5, 1, 4, 2};
  auto xp = Tensor<double>::create({1, n, e});
  for (std::int64_t r = 0; r < n; ++r) {
    for (std::int64_t c = 0; c < e; ++c) {
      xp->v[static_cast<std::size_t>(r * e + c)] =
          x->v[static_cast<std::size_t>(perm[static_cast<std::size_t>(r)] * e + c)];
    }
  }
  auto yp = block.forward(nullptr, xp, nullptr, false, nullptr);
  for (std::int64_t r = 0; r < n; ++r) {
    for (std::int64_t c = 0; c < e; ++c) {
      const double a = y->v[static_cast<std::size_t>(perm[static_cast<std::size_t>(r)] * e + c)];
      const double b = yp->v[static_cast<std::size_t>(r * e + c)];
      CHECK(std::abs(a - b) < 1e-10);
    }
  }
}

TEST_CASE("full model passes grad_check at a reduced size") {
  auto cfg = tiny_config(8, 2);
  cfg.n_heads = 2;
  cfg.n_enc_layers = 1;
  MtmModel<double> m(cfg, 23);
  Rng rng(24);
  auto seg = random_segment(cfg, rng);
  Rng mask_rng(25);
  auto grid = mask::random_autoregressive_mask(cfg.segment_length, 0.0, 0.6, mask_rng);
  auto batch = make_batch<double>(std::vector{seg}, std::vector{grid}, cfg, identity_stats(cfg));

  auto f = [&](Tape<double>* tape) {
    Tape<double> local;
    Tape<double>* t = tape ? tape : &local;
    auto pred = m.reconstruct(t, batch);
    TensorPtr<double> loss;
    for (int mm = 0; mm < data::kNumModalities; ++mm) {
      auto s = ops::mse<double>(t, pred.pred[mm], batch.raw[mm]);
      loss = loss ? ops::add<double>(t, loss, s) : s;
    }
    return loss;
  };
  auto res = grad_check<double>(f, m.params(), 1e-4);
  MESSAGE("model grad check: max rel err ", res.max_rel_err, " at ", res.worst_param);
  CHECK(res.max_rel_err < 1e-4);
}
