#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtm/core/tensor.hpp"

namespace mtm {

// Record of primitive operations in execution order. Execution order is a
// topological order of the data flow, so replaying the records backwards
// visits every op after all of its consumers. Gradients accumulate additively
// across fan-out.
template <class S>
class Tape {
 public:
  using BackFn = std::function<void()>;

  void record(const char* op, BackFn fn) {
    records_.push_back({op, std::move(fn)});
  }

  std::size_t size() const { return records_.size(); }

  void backward(const TensorPtr<S>& loss) {
    if (!loss->is_scalar()) {
      throw std::invalid_argument("Tape::backward: loss must be scalar, got " +
                                  shape_str(*loss));
    }
    if (!loss->requires_grad) {
      throw std::invalid_argument(
          "Tape::backward: loss does not depend on any recorded computation");
    }
    loss->ensure_grad();
    loss->g[0] = S(1);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) it->fn();
  }

  void clear() { records_.clear(); }

 private:
  struct Record {
    const char* op;
    BackFn fn;
  };
  std::vector<Record> records_;
};

}  // namespace mtm
