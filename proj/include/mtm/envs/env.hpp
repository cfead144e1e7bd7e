#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtm/core/rng.hpp"
#include "mtm/data/trajectory.hpp"

namespace mtm::envs {

enum class EnvKind { LinearSystem, PointMass };

const char* env_kind_name(EnvKind k);
EnvKind env_kind_from_name(const std::string& name);

// Synthetic continuous-control environment. linear_system: s' = A s + B a + w,
// reward -|s'|^2; point_mass: 2D double integrator, reward -|p' - goal|.
struct EnvConfig {
  EnvKind kind = EnvKind::PointMass;
  int state_dim = 4;
  int action_dim = 2;
  int horizon = 64;
  double dt = 0.1;
  double action_bound = 1.0;
  double noise_std = 0.0;
  double velocity_clip = 2.0;           // point_mass
  std::vector<double> goal = {1.0, 1.0};  // point_mass target position
  double spectral_radius = 0.95;        // linear_system A scaling
  std::uint64_t system_seed = 0;        // seeds the A/B draw
  // derived for linear_system, row-major
  std::vector<double> a_mat;  // state_dim x state_dim
  std::vector<double> b_mat;  // state_dim x action_dim

  static EnvConfig linear_system(int state_dim = 6, int action_dim = 2,
                                 int horizon = 32, double noise_std = 0.01,
                                 std::uint64_t system_seed = 0);
  static EnvConfig point_mass(int horizon = 64, double noise_std = 0.01);

  // Builds A/B for linear_system and validates invariants.
  void finalize();
};

// Scripted data-collection policies standing in for dataset tiers.
enum class Quality { Expert, Medium, Random };
const char* quality_name(Quality q);
Quality quality_from_name(const std::string& name);

struct TierSpec {
  Quality quality = Quality::Expert;
  double fraction = 1.0;
};

struct ScriptedPolicySpec {
  std::vector<TierSpec> mixture = {{Quality::Expert, 1.0}};
  // action-noise scale per tier
  double expert_noise = 0.05;
  double medium_noise = 2.0;

  static ScriptedPolicySpec single(Quality q);
  void validate() const;  // mixture fractions must sum to 1
};

std::vector<double> env_reset(const EnvConfig& cfg, Rng& rng);

struct StepResult {
  std::vector<double> next_state;
  double reward = 0.0;
};

// Clips the action to the bound, applies the dynamics. Throws on a non-finite
// state.
StepResult env_step(const EnvConfig& cfg, const std::vector<double>& state,
                    const std::vector<double>& action, Rng& rng);

// Recomputes the task reward from a transition (used when relabeling
// exploration data).
double task_reward(const EnvConfig& cfg, const std::vector<double>& next_state);

std::vector<double> scripted_action(const EnvConfig& cfg, Quality q, double noise_std,
                                    const std::vector<double>& state, Rng& rng);

// Least-squares inverse-dynamics oracle for linear_system:
// a = pinv(B) (s' - A s).
std::vector<double> inverse_dynamics_oracle(const EnvConfig& cfg,
                                            const std::vector<double>& s,
                                            const std::vector<double>& s_next);

// Exact next-state mean for linear_system (the zero-noise oracle).
std::vector<double> linear_next_mean(const EnvConfig& cfg, const std::vector<double>& s,
                                     const std::vector<double>& a);

// n_traj full episodes under the scripted policy. Deterministic per seed; each
// trajectory draws from its own derived stream.
data::TrajectorySet generate_dataset(const EnvConfig& cfg, const ScriptedPolicySpec& policy,
                                     int n_traj, std::uint64_t seed);

// Mean return of a scripted tier over n_episodes rollouts (reference returns).
double scripted_mean_return(const EnvConfig& cfg, Quality q, double noise_std,
                            int n_episodes, std::uint64_t seed);

double normalized_score(double raw_return, double random_ref, double expert_ref);

std::string env_config_to_json(const EnvConfig& cfg);
EnvConfig env_config_from_json(const std::string& text);

}  // namespace mtm::envs
