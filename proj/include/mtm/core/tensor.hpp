#pragma once

#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtm {

template <class S>
struct Tensor;

template <class S>
using TensorPtr = std::shared_ptr<Tensor<S>>;

// Dense row-major tensor. Values and (optional) gradient share the shape.
// S is float for training runs and double for test/oracle paths.
template <class S>
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<S> v;
  std::vector<S> g;  // empty until ensure_grad()
  bool requires_grad = false;
  std::string name;  // nonempty for parameters; used in diagnostics

  static TensorPtr<S> create(std::vector<std::int64_t> shape,
                             bool requires_grad = false, std::string name = {}) {
    auto t = std::make_shared<Tensor<S>>();
    t->shape = std::move(shape);
    std::int64_t n = 1;
    for (auto d : t->shape) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= d;
    }
    t->v.assign(static_cast<std::size_t>(n), S(0));
    t->requires_grad = requires_grad;
    t->name = std::move(name);
    if (requires_grad) t->ensure_grad();
    return t;
  }

  static TensorPtr<S> from(std::vector<std::int64_t> shape, std::vector<S> values,
                           bool requires_grad = false, std::string name = {}) {
    auto t = create(std::move(shape), false, std::move(name));
    if (values.size() != t->v.size()) {
      throw std::invalid_argument("Tensor: value count does not match shape");
    }
    t->v = std::move(values);
    t->requires_grad = requires_grad;
    if (requires_grad) t->ensure_grad();
    return t;
  }

  static TensorPtr<S> scalar(S value, bool requires_grad = false) {
    return from({1}, {value}, requires_grad);
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(v.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }

  std::int64_t dim(int i) const {
    const int n = ndim();
    if (i < 0) i += n;
    if (i < 0 || i >= n) throw std::out_of_range("Tensor::dim index");
    return shape[static_cast<std::size_t>(i)];
  }

  bool is_scalar() const { return numel() == 1; }

  S item() const {
    if (!is_scalar()) throw std::logic_error("Tensor::item on non-scalar");
    return v[0];
  }

  void ensure_grad() {
    if (g.size() != v.size()) g.assign(v.size(), S(0));
  }

  void zero_grad() {
    if (!g.empty()) std::fill(g.begin(), g.end(), S(0));
  }
};

inline std::string shape_str(const std::vector<std::int64_t>& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ",";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

template <class S>
std::string shape_str(const Tensor<S>& t) {
  return shape_str(t.shape);
}

}  // namespace mtm
