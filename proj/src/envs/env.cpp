#include "mtm/envs/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace mtm::envs {

using nlohmann::json;

const char* env_kind_name(EnvKind k) {
  return k == EnvKind::LinearSystem ? "linear_system" : "point_mass";
}

EnvKind env_kind_from_name(const std::string& name) {
  if (name == "linear_system") return EnvKind::LinearSystem;
  if (name == "point_mass") return EnvKind::PointMass;
  throw std::invalid_argument("unknown env kind: " + name);
}

const char* quality_name(Quality q) {
  switch (q) {
    case Quality::Expert: return "expert";
    case Quality::Medium: return "medium";
    case Quality::Random: return "random";
  }
  return "?";
}

Quality quality_from_name(const std::string& name) {
  if (name == "expert") return Quality::Expert;
  if (name == "medium") return Quality::Medium;
  if (name == "random") return Quality::Random;
  throw std::invalid_argument("unknown policy quality: " + name);
}

ScriptedPolicySpec ScriptedPolicySpec::single(Quality q) {
  ScriptedPolicySpec spec;
  spec.mixture = {{q, 1.0}};
  return spec;
}

void ScriptedPolicySpec::validate() const {
  double total = 0;
  for (const auto& tier : mixture) total += tier.fraction;
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("ScriptedPolicySpec: mixture fractions sum to " +
                                std::to_string(total) + ", expected 1");
  }
}

namespace {

// spectral radius estimate by normalized power iteration with accumulated
// growth; adequate for scaling small random matrices
double spectral_radius_estimate(const std::vector<double>& a, int n, Rng& rng) {
  std::vector<double> v(n), av(n);
  for (auto& x : v) x = rng.normal();
  double log_growth = 0;
  for (int iter = 0; iter < 500; ++iter) {
    for (int i = 0; i < n; ++i) {
      double acc = 0;
      for (int j = 0; j < n; ++j) acc += a[i * n + j] * v[j];
      av[i] = acc;
    }
    double norm = 0;
    for (double x : av) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0) return 0;
    if (iter >= 100) log_growth += std::log(norm);
    for (int i = 0; i < n; ++i) v[i] = av[i] / norm;
  }
  return std::exp(log_growth / 400.0);
}

void clip_inplace(std::vector<double>& a, double bound) {
  for (auto& x : a) x = std::clamp(x, -bound, bound);
}

// pinv(B) for full column rank B (state_dim x action_dim, action_dim <= 2 in
// practice): (B^T B)^{-1} B^T via the adjugate of the small Gram matrix
std::vector<double> pinv_tall(const std::vector<double>& b, int rows, int cols) {
  std::vector<double> gram(cols * cols, 0.0);
  for (int i = 0; i < cols; ++i)
    for (int j = 0; j < cols; ++j) {
      double acc = 0;
      for (int r = 0; r < rows; ++r) acc += b[r * cols + i] * b[r * cols + j];
      gram[i * cols + j] = acc;
    }
  std::vector<double> ginv(cols * cols, 0.0);
  if (cols == 1) {
    ginv[0] = 1.0 / gram[0];
  } else if (cols == 2) {
    const double det = gram[0] * gram[3] - gram[1] * gram[2];
    if (std::abs(det) < 1e-12) throw std::runtime_error("pinv: singular Gram matrix");
    ginv[0] = gram[3] / det;
    ginv[1] = -gram[1] / det;
    ginv[2] = -gram[2] / det;
    ginv[3] = gram[0] / det;
  } else {
    // Gauss-Jordan for larger action dims
    std::vector<double> aug(gram);
    ginv.assign(cols * cols, 0.0);
    for (int i = 0; i < cols; ++i) ginv[i * cols + i] = 1.0;
    for (int col = 0; col < cols; ++col) {
      int piv = col;
      for (int r = col + 1; r < cols; ++r)
        if (std::abs(aug[r * cols + col]) > std::abs(aug[piv * cols + col])) piv = r;
      for (int j = 0; j < cols; ++j) {
        std::swap(aug[col * cols + j], aug[piv * cols + j]);
        std::swap(ginv[col * cols + j], ginv[piv * cols + j]);
      }
      const double d = aug[col * cols + col];
      if (std::abs(d) < 1e-12) throw std::runtime_error("pinv: singular Gram matrix");
      for (int j = 0; j < cols; ++j) {
        aug[col * cols + j] /= d;
        ginv[col * cols + j] /= d;
      }
      for (int r = 0; r < cols; ++r) {
        if (r == col) continue;
        const double f = aug[r * cols + col];
        for (int j = 0; j < cols; ++j) {
          aug[r * cols + j] -= f * aug[col * cols + j];
          ginv[r * cols + j] -= f * ginv[col * cols + j];
        }
      }
    }
  }
  // pinv = ginv * B^T: cols x rows
  std::vector<double> pinv(cols * rows, 0.0);
  for (int i = 0; i < cols; ++i)
    for (int r = 0; r < rows; ++r) {
      double acc = 0;
      for (int j = 0; j < cols; ++j) acc += ginv[i * cols + j] * b[r * cols + j];
      pinv[i * rows + r] = acc;
    }
  return pinv;
}

void check_finite_state(const std::vector<double>& s) {
  for (double x : s) {
    if (!std::isfinite(x)) throw std::runtime_error("env_step: non-finite state");
  }
}

}  // namespace

EnvConfig EnvConfig::linear_system(int state_dim, int action_dim, int horizon,
                                   double noise_std, std::uint64_t system_seed) {
  EnvConfig cfg;
  cfg.kind = EnvKind::LinearSystem;
  cfg.state_dim = state_dim;
  cfg.action_dim = action_dim;
  cfg.horizon = horizon;
  cfg.noise_std = noise_std;
  cfg.system_seed = system_seed;
  cfg.goal.clear();
  cfg.finalize();
  return cfg;
}

EnvConfig EnvConfig::point_mass(int horizon, double noise_std) {
  EnvConfig cfg;
  cfg.kind = EnvKind::PointMass;
  cfg.state_dim = 4;
  cfg.action_dim = 2;
  cfg.horizon = horizon;
  cfg.noise_std = noise_std;
  cfg.finalize();
  return cfg;
}

void EnvConfig::finalize() {
  if (horizon < 1) throw std::invalid_argument("EnvConfig: horizon must be >= 1");
  if (kind == EnvKind::PointMass) {
    if (state_dim != 4 || action_dim != 2) {
      throw std::invalid_argument("EnvConfig: point_mass is 2D (state_dim 4, action_dim 2)");
    }
    if (goal.size() != 2) throw std::invalid_argument("EnvConfig: point_mass goal must be 2D");
    if (goal[0] == 0.0 && goal[1] == 0.0) {
      throw std::invalid_argument("EnvConfig: point_mass goal must be nonzero");
    }
    a_mat.clear();
    b_mat.clear();
    return;
  }
  // linear_system: draw A and B from the system seed, scale A to the target
  // spectral radius, normalize B columns
  Rng rng(derive_seed(system_seed, 0x11AE58ull));
  a_mat.assign(static_cast<std::size_t>(state_dim) * state_dim, 0.0);
  for (auto& x : a_mat) x = rng.normal();
  const double rho = spectral_radius_estimate(a_mat, state_dim, rng);
  if (rho > 0) {
    const double s = spectral_radius / rho;
    for (auto& x : a_mat) x *= s;
  }
  b_mat.assign(static_cast<std::size_t>(state_dim) * action_dim, 0.0);
  for (auto& x : b_mat) x = rng.normal();
  for (int j = 0; j < action_dim; ++j) {
    double norm = 0;
    for (int i = 0; i < state_dim; ++i) norm += b_mat[i * action_dim + j] * b_mat[i * action_dim + j];
    norm = std::sqrt(norm);
    for (int i = 0; i < state_dim; ++i) b_mat[i * action_dim + j] /= norm;
  }
  if (spectral_radius > 1.05) {
    throw std::invalid_argument("EnvConfig: spectral radius must be <= 1.05");
  }
}

std::vector<double> env_reset(const EnvConfig& cfg, Rng& rng) {
  std::vector<double> s(static_cast<std::size_t>(cfg.state_dim), 0.0);
  if (cfg.kind == EnvKind::PointMass) {
    s[0] = rng.uniform(-0.5, 0.5);
    s[1] = rng.uniform(-0.5, 0.5);
    // velocities start at rest
  } else {
    for (auto& x : s) x = 0.3 * rng.normal();
  }
  return s;
}

std::vector<double> linear_next_mean(const EnvConfig& cfg, const std::vector<double>& s,
                                     const std::vector<double>& a) {
  const int n = cfg.state_dim, m = cfg.action_dim;
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0;
    for (int j = 0; j < n; ++j) acc += cfg.a_mat[i * n + j] * s[j];
    for (int j = 0; j < m; ++j) acc += cfg.b_mat[i * m + j] * a[j];
    out[i] = acc;
  }
  return out;
}

double task_reward(const EnvConfig& cfg, const std::vector<double>& next_state) {
  if (cfg.kind == EnvKind::LinearSystem) {
    double sq = 0;
    for (double x : next_state) sq += x * x;
    return -sq;
  }
  const double dx = next_state[0] - cfg.goal[0];
  const double dy = next_state[1] - cfg.goal[1];
  return -std::sqrt(dx * dx + dy * dy);
}

StepResult env_step(const EnvConfig& cfg, const std::vector<double>& state,
                    const std::vector<double>& action, Rng& rng) {
  check_finite_state(state);
  if (static_cast<int>(state.size()) != cfg.state_dim ||
      static_cast<int>(action.size()) != cfg.action_dim) {
    throw std::invalid_argument("env_step: state/action dims do not match config");
  }
  std::vector<double> a = action;
  clip_inplace(a, cfg.action_bound);

  StepResult res;
  if (cfg.kind == EnvKind::LinearSystem) {
    res.next_state = linear_next_mean(cfg, state, a);
    if (cfg.noise_std > 0) {
      for (auto& x : res.next_state) x += cfg.noise_std * rng.normal();
    }
  } else {
    res.next_state.assign(4, 0.0);
    res.next_state[0] = state[0] + state[2] * cfg.dt;
    res.next_state[1] = state[1] + state[3] * cfg.dt;
    double vx = state[2] + a[0] * cfg.dt;
    double vy = state[3] + a[1] * cfg.dt;
    if (cfg.noise_std > 0) {
      vx += cfg.noise_std * rng.normal();
      vy += cfg.noise_std * rng.normal();
    }
    res.next_state[2] = std::clamp(vx, -cfg.velocity_clip, cfg.velocity_clip);
    res.next_state[3] = std::clamp(vy, -cfg.velocity_clip, cfg.velocity_clip);
  }
  res.reward = task_reward(cfg, res.next_state);
  return res;
}

std::vector<double> inverse_dynamics_oracle(const EnvConfig& cfg,
                                            const std::vector<double>& s,
                                            const std::vector<double>& s_next) {
  if (cfg.kind != EnvKind::LinearSystem) {
    throw std::invalid_argument("inverse_dynamics_oracle: linear_system only");
  }
  const int n = cfg.state_dim, m = cfg.action_dim;
  std::vector<double> resid(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0;
    for (int j = 0; j < n; ++j) acc += cfg.a_mat[i * n + j] * s[j];
    resid[i] = s_next[i] - acc;
  }
  const auto pinv = pinv_tall(cfg.b_mat, n, m);
  std::vector<double> a(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i) {
    double acc = 0;
    for (int j = 0; j < n; ++j) acc += pinv[i * n + j] * resid[j];
    a[i] = acc;
  }
  return a;
}

std::vector<double> scripted_action(const EnvConfig& cfg, Quality q, double noise_std,
                                    const std::vector<double>& state, Rng& rng) {
  std::vector<double> a(static_cast<std::size_t>(cfg.action_dim), 0.0);
  if (q == Quality::Random) {
    for (auto& x : a) x = rng.uniform(-cfg.action_bound, cfg.action_bound);
    return a;
  }
  if (cfg.kind == EnvKind::PointMass) {
    // PD controller toward the goal (critically damped at these gains)
    constexpr double kp = 4.0, kd = 4.0;
    a[0] = kp * (cfg.goal[0] - state[0]) - kd * state[2];
    a[1] = kp * (cfg.goal[1] - state[1]) - kd * state[3];
  } else {
    // greedy one-step regulator: minimize |A s + B a|
    const auto drive = linear_next_mean(cfg, state, std::vector<double>(cfg.action_dim, 0.0));
    const auto pinv = pinv_tall(cfg.b_mat, cfg.state_dim, cfg.action_dim);
    for (int i = 0; i < cfg.action_dim; ++i) {
      double acc = 0;
      for (int j = 0; j < cfg.state_dim; ++j) acc += pinv[i * cfg.state_dim + j] * drive[j];
      a[i] = -acc;
    }
  }
  for (auto& x : a) x += noise_std * rng.normal();
  clip_inplace(a, cfg.action_bound);
  return a;
}

namespace {

data::Trajectory rollout_scripted(const EnvConfig& cfg, Quality q, double noise_std,
                            std::uint64_t traj_seed) {
  Rng rng(traj_seed);
  data::Trajectory tr;
  tr.length = cfg.horizon;
  tr.states.reserve(static_cast<std::size_t>(cfg.horizon) * cfg.state_dim);
  tr.actions.reserve(static_cast<std::size_t>(cfg.horizon) * cfg.action_dim);
  tr.rewards.reserve(static_cast<std::size_t>(cfg.horizon));
  auto s = env_reset(cfg, rng);
  for (int t = 0; t < cfg.horizon; ++t) {
    const auto a = scripted_action(cfg, q, noise_std, s, rng);
    const auto step = env_step(cfg, s, a, rng);
    for (double x : s) tr.states.push_back(static_cast<float>(x));
    for (double x : a) tr.actions.push_back(static_cast<float>(x));
    tr.rewards.push_back(static_cast<float>(step.reward));
    s = step.next_state;
  }
  tr.rtg = data::compute_rtg(tr.rewards);
  return tr;
}

double tier_noise(const ScriptedPolicySpec& spec, Quality q) {
  switch (q) {
    case Quality::Expert: return spec.expert_noise;
    case Quality::Medium: return spec.medium_noise;
    case Quality::Random: return 0.0;
  }
  return 0.0;
}

}  // namespace

data::TrajectorySet generate_dataset(const EnvConfig& cfg, const ScriptedPolicySpec& policy,
                                     int n_traj, std::uint64_t seed) {
  if (n_traj < 1) throw std::invalid_argument("generate_dataset: n_traj must be >= 1");
  policy.validate();

  // largest-remainder allocation of tiers, then a seeded shuffle of the labels
  std::vector<Quality> labels;
  labels.reserve(static_cast<std::size_t>(n_traj));
  {
    std::vector<int> counts(policy.mixture.size(), 0);
    int assigned = 0;
    std::vector<std::pair<double, std::size_t>> remainders;
    for (std::size_t i = 0; i < policy.mixture.size(); ++i) {
      const double exact = policy.mixture[i].fraction * n_traj;
      counts[i] = static_cast<int>(exact);
      assigned += counts[i];
      remainders.push_back({exact - counts[i], i});
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int r = 0; assigned < n_traj; ++r, ++assigned) {
      counts[remainders[static_cast<std::size_t>(r) % remainders.size()].second]++;
    }
    for (std::size_t i = 0; i < policy.mixture.size(); ++i) {
      for (int c = 0; c < counts[i]; ++c) labels.push_back(policy.mixture[i].quality);
    }
    Rng shuffle_rng(derive_seed(seed, 0x7ab1e));
    for (std::size_t i = labels.size(); i > 1; --i) {
      std::swap(labels[i - 1], labels[shuffle_rng.below(i)]);
    }
  }

  data::TrajectorySet set;
  set.manifest.state_dim = cfg.state_dim;
  set.manifest.action_dim = cfg.action_dim;
  set.manifest.env_config_json = env_config_to_json(cfg);
  set.manifest.env_config_hash = data::fnv1a_hex(set.manifest.env_config_json);
  set.trajs.reserve(static_cast<std::size_t>(n_traj));
  for (int i = 0; i < n_traj; ++i) {
    const Quality q = labels[static_cast<std::size_t>(i)];
    set.trajs.push_back(rollout_scripted(cfg, q, tier_noise(policy, q),
                                         derive_seed(seed, static_cast<std::uint64_t>(i) + 1)));
  }
  return set;
}

double scripted_mean_return(const EnvConfig& cfg, Quality q, double noise_std,
                            int n_episodes, std::uint64_t seed) {
  double total = 0;
  for (int e = 0; e < n_episodes; ++e) {
    const auto tr = rollout_scripted(cfg, q, noise_std,
                                     derive_seed(seed, 0xeeull * 1000 + static_cast<std::uint64_t>(e)));
    total += tr.total_reward();
  }
  return total / n_episodes;
}

double normalized_score(double raw_return, double random_ref, double expert_ref) {
  if (expert_ref == random_ref) {
    throw std::invalid_argument("normalized_score: degenerate references (expert == random)");
  }
  return 100.0 * (raw_return - random_ref) / (expert_ref - random_ref);
}

std::string env_config_to_json(const EnvConfig& cfg) {
  json j;
  j["kind"] = env_kind_name(cfg.kind);
  j["state_dim"] = cfg.state_dim;
  j["action_dim"] = cfg.action_dim;
  j["horizon"] = cfg.horizon;
  j["dt"] = cfg.dt;
  j["action_bound"] = cfg.action_bound;
  j["noise_std"] = cfg.noise_std;
  j["velocity_clip"] = cfg.velocity_clip;
  j["goal"] = cfg.goal;
  j["spectral_radius"] = cfg.spectral_radius;
  j["system_seed"] = cfg.system_seed;
  return j.dump();
}

EnvConfig env_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  EnvConfig cfg;
  cfg.kind = env_kind_from_name(j.at("kind").get<std::string>());
  cfg.state_dim = j.at("state_dim").get<int>();
  cfg.action_dim = j.at("action_dim").get<int>();
  cfg.horizon = j.at("horizon").get<int>();
  cfg.dt = j.at("dt").get<double>();
  cfg.action_bound = j.at("action_bound").get<double>();
  cfg.noise_std = j.at("noise_std").get<double>();
  cfg.velocity_clip = j.at("velocity_clip").get<double>();
  cfg.goal = j.at("goal").get<std::vector<double>>();
  cfg.spectral_radius = j.at("spectral_radius").get<double>();
  cfg.system_seed = j.at("system_seed").get<std::uint64_t>();
  cfg.finalize();
  return cfg;
}

}  // namespace mtm::envs
