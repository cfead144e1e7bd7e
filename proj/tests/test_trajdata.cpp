#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mtm/data/dataset_io.hpp"
#include "mtm/data/trajectory.hpp"
#include "mtm/envs/env.hpp"

using namespace mtm;
using namespace mtm::data;

namespace {

TrajectorySet small_set(int n = 20, std::uint64_t seed = 5) {
  auto cfg = envs::EnvConfig::point_mass(16, 0.01);
  return envs::generate_dataset(cfg, envs::ScriptedPolicySpec::single(envs::Quality::Medium),
                                n, seed);
}

}  // namespace

TEST_CASE("compute_rtg: suffix sums, empty case, recursion invariant") {
  CHECK(compute_rtg(std::vector<float>{1, 1, 1}) == std::vector<float>{3, 2, 1});
  CHECK(compute_rtg(std::vector<float>{}).empty());
  CHECK(compute_rtg(std::vector<float>{0.5f, -0.5f}) == std::vector<float>{0.0f, -0.5f});

  // recursion rtg[t] = rewards[t] + rtg[t+1] holds bitwise on generated data
  auto set = small_set();
  for (const auto& tr : set.trajs) {
    CHECK(tr.rtg[tr.length - 1] == tr.rewards[tr.length - 1]);
    for (int t = 0; t + 1 < tr.length; ++t) {
      CHECK(tr.rtg[t] == tr.rewards[t] + tr.rtg[t + 1]);
    }
  }
}

TEST_CASE("normalization: round trip, unit stats on the fitting set, floor rule") {
  auto set = small_set(30);
  split_dataset(set, 0.1, 3);
  set.manifest.stats = fit_norm_stats(set, set.manifest.train_idx);
  const auto& st = set.manifest.stats;

  // invert(apply(x)) = x within 1e-9
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> row(4);
    for (auto& x : row) x = rng.normal() * 3.0;
    auto orig = row;
    st.apply(kState, row);
    st.invert(kState, row);
    for (int d = 0; d < 4; ++d) CHECK(std::abs(row[d] - orig[d]) < 1e-9);
  }

  // apply on the fitting set: per-dim mean 0, std 1 within 1e-6
  std::vector<double> mean(4, 0.0), var(4, 0.0);
  std::int64_t count = 0;
  for (auto i : set.manifest.train_idx) {
    const auto& tr = set.trajs[static_cast<std::size_t>(i)];
    for (int t = 0; t < tr.length; ++t) {
      std::vector<double> row(4);
      for (int d = 0; d < 4; ++d) row[d] = tr.states[t * 4 + d];
      st.apply(kState, row);
      for (int d = 0; d < 4; ++d) mean[d] += row[d];
      ++count;
    }
  }
  for (auto& m : mean) m /= static_cast<double>(count);
  for (auto i : set.manifest.train_idx) {
    const auto& tr = set.trajs[static_cast<std::size_t>(i)];
    for (int t = 0; t < tr.length; ++t) {
      std::vector<double> row(4);
      for (int d = 0; d < 4; ++d) row[d] = tr.states[t * 4 + d];
      st.apply(kState, row);
      for (int d = 0; d < 4; ++d) var[d] += (row[d] - mean[d]) * (row[d] - mean[d]);
    }
  }
  for (int d = 0; d < 4; ++d) {
    CHECK(std::abs(mean[d]) < 1e-6);
    CHECK(std::abs(std::sqrt(var[d] / count) - 1.0) < 1e-6);
  }

  // constant dimension: std floored at 1e-6, normalized output 0
  TrajectorySet flat;
  flat.manifest.state_dim = 1;
  flat.manifest.action_dim = 1;
  Trajectory tr;
  tr.length = 4;
  tr.states = {2.5f, 2.5f, 2.5f, 2.5f};
  tr.actions = {0, 0, 0, 0};
  tr.rewards = {0, 0, 0, 0};
  tr.rtg = compute_rtg(tr.rewards);
  flat.trajs = {tr, tr};
  std::vector<std::int64_t> idx{0, 1};
  auto fstats = fit_norm_stats(flat, idx);
  CHECK(fstats.stdev[kState][0] == 1e-6);
  std::vector<double> row{2.5};
  fstats.apply(kState, row);
  CHECK(row[0] == 0.0);
}

TEST_CASE("normalization statistics never use eval data") {
  auto set = small_set(40);
  split_dataset(set, 0.25, 9);
  set.manifest.stats = fit_norm_stats(set, set.manifest.train_idx);
  // recompute on train-only and on all data; stored stats must equal the former
  auto train_only = fit_norm_stats(set, set.manifest.train_idx);
  std::vector<std::int64_t> all(set.trajs.size());
  std::iota(all.begin(), all.end(), 0);
  auto everything = fit_norm_stats(set, all);
  CHECK(set.manifest.stats.mean[kState] == train_only.mean[kState]);
  CHECK(set.manifest.stats.mean[kState] != everything.mean[kState]);
}

TEST_CASE("split_dataset: 95/5, minimum rule, determinism, disjoint partition") {
  auto set = small_set(100);
  split_dataset(set, 0.05, 13);
  CHECK(set.manifest.train_idx.size() == 95);
  CHECK(set.manifest.eval_idx.size() == 5);

  auto set2 = small_set(100);
  split_dataset(set2, 0.05, 13);
  CHECK(set.manifest.train_idx == set2.manifest.train_idx);
  CHECK(set.manifest.eval_idx == set2.manifest.eval_idx);

  std::vector<bool> seen(100, false);
  for (auto i : set.manifest.train_idx) seen[static_cast<std::size_t>(i)] = true;
  for (auto i : set.manifest.eval_idx) {
    CHECK(!seen[static_cast<std::size_t>(i)]);
    seen[static_cast<std::size_t>(i)] = true;
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));

  auto tiny = small_set(2);
  split_dataset(tiny, 0.05, 1);
  CHECK(tiny.manifest.train_idx.size() == 1);
  CHECK(tiny.manifest.eval_idx.size() == 1);

  auto one = small_set(2);
  one.trajs.resize(1);
  CHECK_THROWS_AS(split_dataset(one, 0.05, 1), std::invalid_argument);
}

TEST_CASE("sample_segment: whole-trajectory case and uniform starts") {
  auto set = small_set(1);
  const auto& tr = set.trajs[0];
  Rng rng(21);
  auto whole = sample_segment(tr, tr.length, rng);
  CHECK(whole.start == 0);
  CHECK(whole.length == tr.length);

  Trajectory ten;
  ten.length = 10;
  ten.states.assign(10 * 4, 0.0f);
  ten.actions.assign(10 * 2, 0.0f);
  ten.rewards.assign(10, 0.0f);
  ten.rtg = compute_rtg(ten.rewards);
  std::vector<int> counts(7, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) counts[sample_segment(ten, 4, rng).start]++;
  for (int s = 0; s < 7; ++s) {
    const double freq = static_cast<double>(counts[s]) / draws;
    CHECK(std::abs(freq - 1.0 / 7.0) < 0.02);
  }

  Trajectory tooshort;
  tooshort.length = 3;
  tooshort.states.assign(3 * 4, 0.0f);
  tooshort.actions.assign(3 * 2, 0.0f);
  tooshort.rewards.assign(3, 0.0f);
  tooshort.rtg = compute_rtg(tooshort.rewards);
  CHECK_THROWS_AS(sample_segment(tooshort, 4, rng), std::invalid_argument);
}

TEST_CASE("make_heteromodal: counts, identity case, presence bookkeeping") {
  auto set = small_set(1000, 23);
  auto hetero = make_heteromodal(set, 0.01, 0.95, 31);
  int actioned = 0, stateonly = 0;
  for (auto i : hetero.manifest.train_idx) {
    const auto& tr = hetero.trajs[static_cast<std::size_t>(i)];
    if (tr.has_actions) ++actioned;
    else ++stateonly;
  }
  CHECK(actioned == 10);
  CHECK(stateonly == 950);
  CHECK(hetero.manifest.eval_idx.size() == 40);
  for (auto i : hetero.manifest.eval_idx) {
    CHECK(hetero.trajs[static_cast<std::size_t>(i)].has_actions);
  }
  // state-only trajectories retain rtg and states; no fabricated actions
  for (const auto& tr : hetero.trajs) {
    if (!tr.has_actions) {
      CHECK(tr.actions.empty());
      CHECK(tr.has_rtg);
      CHECK(tr.has_states);
    }
  }

  auto same = make_heteromodal(set, 1.0, 0.0, 31);
  CHECK(same.manifest.train_idx.size() == set.trajs.size());
  for (std::size_t i = 0; i < set.trajs.size(); ++i) {
    CHECK(same.trajs[i].has_actions);
    CHECK(same.trajs[i].actions == set.trajs[i].actions);
  }

  CHECK_THROWS_AS(make_heteromodal(set, 0.0001, 0.95, 1), std::invalid_argument);
}

TEST_CASE("MTMD container: round trip, bad magic, heteromodal presence") {
  auto set = small_set(25, 29);
  split_dataset(set, 0.2, 3);
  set.manifest.stats = fit_norm_stats(set, set.manifest.train_idx);
  set.manifest.random_ref = -40.5;
  set.manifest.expert_ref = -5.25;
  auto hetero = make_heteromodal(set, 0.2, 0.6, 7);

  const std::string path = "test_roundtrip.mtmd";
  save_dataset(hetero, path);
  auto back = load_dataset(path);
  REQUIRE(back.trajs.size() == hetero.trajs.size());
  for (std::size_t i = 0; i < back.trajs.size(); ++i) {
    CHECK(back.trajs[i].states == hetero.trajs[i].states);
    CHECK(back.trajs[i].actions == hetero.trajs[i].actions);
    CHECK(back.trajs[i].rewards == hetero.trajs[i].rewards);
    CHECK(back.trajs[i].rtg == hetero.trajs[i].rtg);
    CHECK(back.trajs[i].has_actions == hetero.trajs[i].has_actions);
  }
  CHECK(back.manifest.train_idx == hetero.manifest.train_idx);
  CHECK(back.manifest.eval_idx == hetero.manifest.eval_idx);
  CHECK(back.manifest.stats.mean[kState] == hetero.manifest.stats.mean[kState]);
  CHECK(back.manifest.random_ref == hetero.manifest.random_ref);

  // wrong magic rejected
  {
    std::ofstream f("test_badmagic.mtmd", std::ios::binary);
    f << "NOPE" << std::string(64, '\0');
  }
  CHECK_THROWS_AS(load_dataset("test_badmagic.mtmd"), std::runtime_error);

  // truncated file rejected
  {
    std::ifstream in(path, std::ios::binary);
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream out("test_trunc.mtmd", std::ios::binary);
    out.write(all.data(), static_cast<std::streamsize>(all.size() / 2));
  }
  CHECK_THROWS_AS(load_dataset("test_trunc.mtmd"), std::runtime_error);

  std::filesystem::remove(path);
  std::filesystem::remove("test_badmagic.mtmd");
  std::filesystem::remove("test_trunc.mtmd");
}
