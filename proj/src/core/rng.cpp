#include "mtm/core/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace mtm {

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}
}  // namespace

Rng::Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

std::uint64_t Rng::u64() { return gen_(); }

double Rng::uniform() {
  // top 53 bits -> [0, 1)
  return static_cast<double>(u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  // multiply-shift; bias is O(n / 2^64), negligible for our ranges
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(u64()) * n) >> 64);
}

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  // Box-Muller; u1 in (0, 1] so the log is finite
  const double u1 = static_cast<double>((u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  cached_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

std::string Rng::state() const {
  std::ostringstream out;
  out << gen_ << " " << (has_cached_ ? 1 : 0) << " ";
  out.precision(17);
  out << cached_;
  return out.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream in(s);
  int flag = 0;
  in >> gen_ >> flag >> cached_;
  if (!in) throw std::runtime_error("Rng::set_state: malformed state string");
  has_cached_ = flag != 0;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream + 0x51f7d1edull));
}

}  // namespace mtm
