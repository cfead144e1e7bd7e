#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mtm/envs/env.hpp"

using namespace mtm;
using namespace mtm::envs;

TEST_CASE("point_mass with zero action and zero velocity leaves position unchanged") {
  auto cfg = EnvConfig::point_mass(64, 0.0);
  Rng rng(1);
  std::vector<double> s{0.2, -0.3, 0.0, 0.0};
  auto res = env_step(cfg, s, {0.0, 0.0}, rng);
  CHECK(res.next_state[0] == s[0]);
  CHECK(res.next_state[1] == s[1]);
}

TEST_CASE("linear_system with A=I, B=0, zero noise is the identity") {
  auto cfg = EnvConfig::linear_system(4, 2, 16, 0.0, 3);
  std::fill(cfg.a_mat.begin(), cfg.a_mat.end(), 0.0);
  for (int i = 0; i < 4; ++i) cfg.a_mat[i * 4 + i] = 1.0;
  std::fill(cfg.b_mat.begin(), cfg.b_mat.end(), 0.0);
  Rng rng(2);
  std::vector<double> s{0.5, -1.0, 2.0, 0.1};
  auto res = env_step(cfg, s, {0.3, -0.7}, rng);
  CHECK(res.next_state == s);
}

TEST_CASE("linear_system matches the direct matrix-arithmetic oracle exactly") {
  auto cfg = EnvConfig::linear_system(6, 2, 32, 0.0, 7);
  Rng rng(5);
  std::vector<double> s(6), a{0.4, -0.2};
  for (auto& x : s) x = rng.normal();
  const auto res = env_step(cfg, s, a, rng);
  // oracle: same expression evaluated independently
  for (int i = 0; i < 6; ++i) {
    double want = 0;
    for (int j = 0; j < 6; ++j) want += cfg.a_mat[i * 6 + j] * s[j];
    for (int j = 0; j < 2; ++j) want += cfg.b_mat[i * 2 + j] * a[j];
    CHECK(res.next_state[i] == want);
  }
  double sq = 0;
  for (double x : res.next_state) sq += x * x;
  CHECK(res.reward == -sq);
}

TEST_CASE("env_step clips actions to the bound") {
  auto cfg = EnvConfig::point_mass(64, 0.0);
  Rng rng(3);
  std::vector<double> s{0.0, 0.0, 0.0, 0.0};
  auto big = env_step(cfg, s, {100.0, -100.0}, rng);
  auto one = env_step(cfg, s, {1.0, -1.0}, rng);
  CHECK(big.next_state == one.next_state);
}

TEST_CASE("env_step rejects non-finite state") {
  auto cfg = EnvConfig::point_mass(64, 0.0);
  Rng rng(4);
  CHECK_THROWS_AS(
      env_step(cfg, {std::nan(""), 0.0, 0.0, 0.0}, {0.0, 0.0}, rng),
      std::runtime_error);
}

TEST_CASE("generate_dataset: shapes, counts, determinism") {
  auto cfg = EnvConfig::point_mass(64, 0.01);
  auto spec = ScriptedPolicySpec::single(Quality::Expert);
  auto d1 = generate_dataset(cfg, spec, 100, 17);
  CHECK(d1.trajs.size() == 100);
  for (const auto& tr : d1.trajs) {
    CHECK(tr.length == 64);
    CHECK(tr.states.size() == 64 * 4);
    CHECK(tr.actions.size() == 64 * 2);
  }
  auto d2 = generate_dataset(cfg, spec, 100, 17);
  for (std::size_t i = 0; i < d1.trajs.size(); ++i) {
    CHECK(d1.trajs[i].states == d2.trajs[i].states);   // bitwise
    CHECK(d1.trajs[i].actions == d2.trajs[i].actions);
    CHECK(d1.trajs[i].rewards == d2.trajs[i].rewards);
  }
  CHECK_THROWS(generate_dataset(cfg, spec, 0, 1));
}

TEST_CASE("dataset tiers are ordered: expert > medium > random on point_mass") {
  auto cfg = EnvConfig::point_mass(64, 0.01);
  const double expert = scripted_mean_return(cfg, Quality::Expert, 0.05, 100, 11);
  const double medium = scripted_mean_return(cfg, Quality::Medium, 2.0, 100, 11);
  const double random = scripted_mean_return(cfg, Quality::Random, 0.0, 100, 11);
  MESSAGE("returns expert=", expert, " medium=", medium, " random=", random);
  CHECK(expert > medium);
  CHECK(medium > random);
}

TEST_CASE("mixture fractions validated and applied") {
  ScriptedPolicySpec spec;
  spec.mixture = {{Quality::Expert, 0.5}, {Quality::Random, 0.4}};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.mixture = {{Quality::Expert, 0.2}, {Quality::Medium, 0.4}, {Quality::Random, 0.4}};
  CHECK_NOTHROW(spec.validate());
}

TEST_CASE("normalized_score formula and degenerate references") {
  CHECK(normalized_score(-5.0, -40.0, -5.0) == doctest::Approx(100.0));
  CHECK(normalized_score(-40.0, -40.0, -5.0) == doctest::Approx(0.0));
  CHECK(normalized_score(-22.5, -40.0, -5.0) == doctest::Approx(50.0));
  CHECK_THROWS_AS(normalized_score(1.0, 2.0, 2.0), std::invalid_argument);
}

TEST_CASE("inverse dynamics oracle recovers the applied action without noise") {
  auto cfg = EnvConfig::linear_system(6, 2, 32, 0.0, 9);
  Rng rng(6);
  std::vector<double> s(6);
  for (auto& x : s) x = rng.normal();
  std::vector<double> a{0.3, -0.8};
  auto res = env_step(cfg, s, a, rng);
  auto rec = inverse_dynamics_oracle(cfg, s, res.next_state);
  CHECK(rec[0] == doctest::Approx(a[0]).epsilon(1e-10));
  CHECK(rec[1] == doctest::Approx(a[1]).epsilon(1e-10));
}

TEST_CASE("spectral radius of generated A stays within the stability bound") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto cfg = EnvConfig::linear_system(6, 2, 32, 0.01, seed);
    // crude growth check: iterate A 200 times from a random vector; a stable
    // scaled system must not blow up
    Rng rng(seed + 100);
    std::vector<double> v(6), av(6);
    for (auto& x : v) x = rng.normal();
    double max_norm = 0;
    for (int it = 0; it < 200; ++it) {
      for (int i = 0; i < 6; ++i) {
        double acc = 0;
        for (int j = 0; j < 6; ++j) acc += cfg.a_mat[i * 6 + j] * v[j];
        av[i] = acc;
      }
      v = av;
      double norm = 0;
      for (double x : v) norm += x * x;
      max_norm = std::max(max_norm, std::sqrt(norm));
    }
    double final_norm = 0;
    for (double x : v) final_norm += x * x;
    CHECK(std::sqrt(final_norm) < 10.0);  // rho ~0.95 decays from O(1) start
  }
}

TEST_CASE("env config json round trip") {
  auto cfg = EnvConfig::linear_system(6, 2, 32, 0.01, 42);
  auto back = env_config_from_json(env_config_to_json(cfg));
  CHECK(back.a_mat == cfg.a_mat);  // rebuilt from the same system seed
  CHECK(back.b_mat == cfg.b_mat);
  CHECK(back.horizon == cfg.horizon);
}
