#include "mtm/data/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace mtm::data {

const char* modality_name(int m) {
  switch (m) {
    case kRtg: return "rtg";
    case kState: return "state";
    case kAction: return "action";
  }
  return "?";
}

double Trajectory::total_reward() const {
  double sum = 0;
  for (float r : rewards) sum += r;
  return sum;
}

void NormStats::apply(int modality, std::span<double> row) const {
  const auto& m = mean[modality];
  const auto& s = stdev[modality];
  if (row.size() != m.size()) {
    throw std::invalid_argument(std::string("NormStats::apply: dim mismatch for ") +
                                modality_name(modality));
  }
  for (std::size_t i = 0; i < row.size(); ++i) row[i] = (row[i] - m[i]) / s[i];
}

void NormStats::invert(int modality, std::span<double> row) const {
  const auto& m = mean[modality];
  const auto& s = stdev[modality];
  if (row.size() != m.size()) {
    throw std::invalid_argument(std::string("NormStats::invert: dim mismatch for ") +
                                modality_name(modality));
  }
  for (std::size_t i = 0; i < row.size(); ++i) row[i] = row[i] * s[i] + m[i];
}

double NormStats::apply_one(int modality, int dim, double x) const {
  return (x - mean[modality][dim]) / stdev[modality][dim];
}

double NormStats::invert_one(int modality, int dim, double x) const {
  return x * stdev[modality][dim] + mean[modality][dim];
}

std::vector<float> compute_rtg(std::span<const float> rewards) {
  std::vector<float> rtg(rewards.size());
  float acc = 0.0f;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + acc;
    rtg[i] = acc;
  }
  return rtg;
}

NormStats fit_norm_stats(const TrajectorySet& set, std::span<const std::int64_t> idx) {
  NormStats out;
  const int dims[kNumModalities] = {1, set.manifest.state_dim, set.manifest.action_dim};
  for (int m = 0; m < kNumModalities; ++m) {
    out.mean[m].assign(static_cast<std::size_t>(dims[m]), 0.0);
    out.stdev[m].assign(static_cast<std::size_t>(dims[m]), 0.0);
  }
  std::int64_t count[kNumModalities] = {0, 0, 0};
  for (auto i : idx) {
    const auto& tr = set.trajs.at(static_cast<std::size_t>(i));
    const float* arrays[kNumModalities] = {tr.rtg.data(), tr.states.data(),
                                           tr.actions.data()};
    for (int m = 0; m < kNumModalities; ++m) {
      if (!tr.present(m)) continue;
      count[m] += tr.length;
      for (int t = 0; t < tr.length; ++t) {
        for (int d = 0; d < dims[m]; ++d) out.mean[m][d] += arrays[m][t * dims[m] + d];
      }
    }
  }
  for (int m = 0; m < kNumModalities; ++m) {
    if (count[m] == 0) continue;
    for (auto& v : out.mean[m]) v /= static_cast<double>(count[m]);
  }
  for (auto i : idx) {
    const auto& tr = set.trajs.at(static_cast<std::size_t>(i));
    const float* arrays[kNumModalities] = {tr.rtg.data(), tr.states.data(),
                                           tr.actions.data()};
    for (int m = 0; m < kNumModalities; ++m) {
      if (!tr.present(m)) continue;
      for (int t = 0; t < tr.length; ++t) {
        for (int d = 0; d < dims[m]; ++d) {
          const double c = arrays[m][t * dims[m] + d] - out.mean[m][d];
          out.stdev[m][d] += c * c;
        }
      }
    }
  }
  for (int m = 0; m < kNumModalities; ++m) {
    for (auto& v : out.stdev[m]) {
      v = count[m] > 0 ? std::sqrt(v / static_cast<double>(count[m])) : 1.0;
      v = std::max(v, 1e-6);
    }
  }
  return out;
}

void split_dataset(TrajectorySet& set, double eval_fraction, std::uint64_t seed) {
  const std::int64_t n = static_cast<std::int64_t>(set.trajs.size());
  if (n < 2) throw std::invalid_argument("split_dataset: need at least 2 trajectories");
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw std::invalid_argument("split_dataset: eval_fraction must be in (0,1)");
  }
  std::int64_t n_eval =
      static_cast<std::int64_t>(std::llround(eval_fraction * static_cast<double>(n)));
  n_eval = std::clamp<std::int64_t>(n_eval, 1, n - 1);

  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x5917));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  set.manifest.eval_idx.assign(order.begin(), order.begin() + n_eval);
  set.manifest.train_idx.assign(order.begin() + n_eval, order.end());
  std::sort(set.manifest.eval_idx.begin(), set.manifest.eval_idx.end());
  std::sort(set.manifest.train_idx.begin(), set.manifest.train_idx.end());
}

Segment segment_at(const Trajectory& traj, int start, int length) {
  if (start < 0 || length <= 0 || start + length > traj.length) {
    throw std::invalid_argument("segment_at: window [" + std::to_string(start) + "," +
                                std::to_string(start + length) +
                                ") exceeds T=" + std::to_string(traj.length));
  }
  Segment seg;
  seg.start = start;
  seg.length = length;
  const int sd = traj.has_states && traj.length > 0
                     ? static_cast<int>(traj.states.size()) / traj.length
                     : 0;
  const int ad = traj.has_actions && traj.length > 0
                     ? static_cast<int>(traj.actions.size()) / traj.length
                     : 0;
  seg.state_dim = sd;
  seg.action_dim = ad;
  seg.present[kRtg] = traj.has_rtg;
  seg.present[kState] = traj.has_states;
  seg.present[kAction] = traj.has_actions;
  seg.rtg.assign(static_cast<std::size_t>(length), 0.0f);
  seg.states.assign(static_cast<std::size_t>(length) * sd, 0.0f);
  seg.actions.assign(static_cast<std::size_t>(length) * ad, 0.0f);
  for (int t = 0; t < length; ++t) {
    if (traj.has_rtg) seg.rtg[static_cast<std::size_t>(t)] = traj.rtg[start + t];
    if (traj.has_states) {
      std::copy_n(traj.states.begin() + static_cast<std::size_t>(start + t) * sd, sd,
                  seg.states.begin() + static_cast<std::size_t>(t) * sd);
    }
    if (traj.has_actions) {
      std::copy_n(traj.actions.begin() + static_cast<std::size_t>(start + t) * ad, ad,
                  seg.actions.begin() + static_cast<std::size_t>(t) * ad);
    }
  }
  return seg;
}

Segment sample_segment(const Trajectory& traj, int length, Rng& rng) {
  if (traj.length < length) {
    throw std::invalid_argument("sample_segment: trajectory length " +
                                std::to_string(traj.length) + " < segment length " +
                                std::to_string(length));
  }
  const int start =
      static_cast<int>(rng.below(static_cast<std::uint64_t>(traj.length - length + 1)));
  return segment_at(traj, start, length);
}

TrajectorySet make_heteromodal(const TrajectorySet& set, double actioned_fraction,
                               double stateonly_fraction, std::uint64_t seed) {
  if (actioned_fraction + stateonly_fraction > 1.0 + 1e-12) {
    throw std::invalid_argument("make_heteromodal: fractions exceed 1");
  }
  const std::int64_t n = static_cast<std::int64_t>(set.trajs.size());
  const std::int64_t n_act =
      static_cast<std::int64_t>(std::llround(actioned_fraction * static_cast<double>(n)));
  const std::int64_t n_state = std::min<std::int64_t>(
      n - n_act, static_cast<std::int64_t>(
                     std::llround(stateonly_fraction * static_cast<double>(n))));
  if (n_act <= 0) {
    throw std::invalid_argument(
        "make_heteromodal: fractions yield zero actioned trajectories");
  }
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x8e7e20));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  TrajectorySet out = set;
  out.manifest.train_idx.assign(order.begin(), order.begin() + n_act + n_state);
  out.manifest.eval_idx.assign(order.begin() + n_act + n_state, order.end());
  for (std::int64_t j = n_act; j < n_act + n_state; ++j) {
    auto& tr = out.trajs[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])];
    tr.has_actions = false;
    tr.actions.clear();  // values dropped from storage
  }
  std::sort(out.manifest.train_idx.begin(), out.manifest.train_idx.end());
  std::sort(out.manifest.eval_idx.begin(), out.manifest.eval_idx.end());
  // stats must reflect the new train split and its presence flags
  out.manifest.stats = fit_norm_stats(out, out.manifest.train_idx);
  return out;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mtm::data
