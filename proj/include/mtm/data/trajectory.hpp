#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtm/core/rng.hpp"

namespace mtm::data {

// Fixed per-timestep modality order used everywhere a timestep is flattened.
enum Modality : int { kRtg = 0, kState = 1, kAction = 2 };
constexpr int kNumModalities = 3;

const char* modality_name(int m);

// One episode. All present arrays share the leading length T; rewards are
// always stored but never tokenized. Values are float32, matching the on-disk
// container exactly.
struct Trajectory {
  int length = 0;
  std::vector<float> states;   // length * state_dim
  std::vector<float> actions;  // length * action_dim, empty when absent
  std::vector<float> rewards;  // length
  std::vector<float> rtg;      // length
  bool has_rtg = true;
  bool has_states = true;
  bool has_actions = true;

  bool present(int modality) const {
    switch (modality) {
      case kRtg: return has_rtg;
      case kState: return has_states;
      case kAction: return has_actions;
    }
    return false;
  }
  double total_reward() const;
};

// Per-modality, per-dimension normalization statistics fitted on the training
// split. Standard deviations are floored at 1e-6.
struct NormStats {
  std::vector<double> mean[kNumModalities];
  std::vector<double> stdev[kNumModalities];

  bool fitted() const { return !mean[kState].empty(); }
  // apply: x -> (x - mean)/std, one full row of `modality` at a time
  void apply(int modality, std::span<double> row) const;
  void invert(int modality, std::span<double> row) const;
  double apply_one(int modality, int dim, double x) const;
  double invert_one(int modality, int dim, double x) const;
};

struct DatasetManifest {
  std::uint32_t version = 1;
  std::string env_config_json;  // full environment config, canonical JSON
  std::string env_config_hash;  // FNV-1a of the above, hex
  int state_dim = 0;
  int action_dim = 0;
  std::vector<std::int64_t> train_idx;
  std::vector<std::int64_t> eval_idx;
  NormStats stats;
  double random_ref = 0.0;  // reference returns for normalized scores
  double expert_ref = 0.0;
};

struct TrajectorySet {
  DatasetManifest manifest;
  std::vector<Trajectory> trajs;

  std::size_t size() const { return trajs.size(); }
};

// Fixed-length window of a trajectory arranged as a timestep x modality grid.
// Values are raw (unnormalized); absent modalities hold zeros.
struct Segment {
  int start = 0;
  int length = 0;
  int state_dim = 0;
  int action_dim = 0;
  std::vector<float> rtg;      // length
  std::vector<float> states;   // length * state_dim
  std::vector<float> actions;  // length * action_dim
  bool present[kNumModalities] = {true, true, true};
};

// rtg[t] = sum_{t'>=t} rewards[t'], computed with the same float recursion the
// invariant is checked with.
std::vector<float> compute_rtg(std::span<const float> rewards);

// Fit statistics on the listed trajectories only.
NormStats fit_norm_stats(const TrajectorySet& set, std::span<const std::int64_t> idx);

// Trajectory-level split; eval count = round(f*N), clamped to [1, N-1].
void split_dataset(TrajectorySet& set, double eval_fraction, std::uint64_t seed);

Segment sample_segment(const Trajectory& traj, int length, Rng& rng);
Segment segment_at(const Trajectory& traj, int start, int length);

// Drops action labels from a state-only subset and reserves the remainder for
// eval. Fractions apply to the whole set; actioned + stateonly become the
// train split.
TrajectorySet make_heteromodal(const TrajectorySet& set, double actioned_fraction,
                               double stateonly_fraction, std::uint64_t seed);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace mtm::data
