#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace mtm {

// Deterministic RNG stream. Distribution transforms are implemented here
// rather than with std:: distributions, whose exact output is
// implementation-defined; the reproducibility contracts need the same draws
// from the same seed on every build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  std::uint64_t below(std::uint64_t n);   // [0, n)
  double normal();                        // standard normal, Box-Muller

  // Serialization for checkpoint resume.
  std::string state() const;
  void set_state(const std::string& s);

 private:
  std::mt19937_64 gen_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

// Stable seed derivation for named substreams (per-trajectory, per-episode,
// per-seed workers). splitmix64 of the pair.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace mtm
