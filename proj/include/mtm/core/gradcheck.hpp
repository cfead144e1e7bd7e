#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtm/core/tape.hpp"
#include "mtm/core/tensor.hpp"

namespace mtm {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::int64_t worst_entry = -1;
};

// Central-difference gradient verification. `f` must rebuild the computation
// from scratch on every call (recording on the given tape when non-null) and
// must be deterministic: run it with dropout disabled. Use S = double.
//
// Returns max over all parameter entries of
//   |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
template <class S>
GradCheckResult grad_check(const std::function<TensorPtr<S>(Tape<S>*)>& f,
                           const std::vector<TensorPtr<S>>& params, double eps) {
  // analytic pass
  for (const auto& p : params) {
    p->ensure_grad();
    p->zero_grad();
  }
  Tape<S> tape;
  auto loss = f(&tape);
  tape.backward(loss);
  std::vector<std::vector<S>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p->g);

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    const std::string pname = p->name.empty() ? "param#" + std::to_string(pi) : p->name;
    for (std::size_t i = 0; i < p->v.size(); ++i) {
      const S saved = p->v[i];
      p->v[i] = saved + static_cast<S>(eps);
      const double lp = static_cast<double>(f(nullptr)->item());
      p->v[i] = saved - static_cast<S>(eps);
      const double lm = static_cast<double>(f(nullptr)->item());
      p->v[i] = saved;
      const double numeric = (lp - lm) / (2.0 * eps);
      const double analytic_i = static_cast<double>(analytic[pi][i]);
      if (!std::isfinite(numeric) || !std::isfinite(analytic_i)) {
        throw std::runtime_error("grad_check: non-finite gradient for " + pname +
                                 "[" + std::to_string(i) + "]");
      }
      const double denom =
          std::max({std::abs(analytic_i), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic_i - numeric) / denom;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_param = pname;
        result.worst_entry = static_cast<std::int64_t>(i);
      }
    }
  }
  return result;
}

}  // namespace mtm
