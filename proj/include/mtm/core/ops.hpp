#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtm/core/rng.hpp"
#include "mtm/core/tape.hpp"
#include "mtm/core/tensor.hpp"
#include "mtm/kernels/kernels.hpp"

// Differentiable primitives. Each op computes its output eagerly and, when a
// tape is supplied and any input requires gradients, records a backward
// closure. Passing tape == nullptr runs pure inference.

namespace mtm::ops {

// When enabled, ops reject non-finite inputs (test/debug aid).
void set_debug_checks(bool enabled);
bool debug_checks_enabled();

namespace detail {

template <class S>
void check_finite(const TensorPtr<S>& t, const char* op) {
  if (!debug_checks_enabled()) return;
  for (const S x : t->v) {
    if (!std::isfinite(static_cast<double>(x))) {
      throw std::runtime_error(std::string(op) + ": non-finite input value");
    }
  }
}

template <class S>
bool recording(Tape<S>* tape, std::initializer_list<const TensorPtr<S>*> ins) {
  if (!tape) return false;
  for (const auto* p : ins) {
    if ((*p)->requires_grad) return true;
  }
  return false;
}

template <class S>
TensorPtr<S> out_like(std::vector<std::int64_t> shape, bool rec) {
  auto t = Tensor<S>::create(std::move(shape));
  t->requires_grad = rec;
  if (rec) t->ensure_grad();
  return t;
}

[[noreturn]] inline void shape_error(const char* op, const std::string& detail) {
  throw std::invalid_argument(std::string(op) + ": " + detail);
}

inline std::int64_t trailing_dim(const std::vector<std::int64_t>& shape) {
  return shape.empty() ? 1 : shape.back();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// matmul / bmm

template <class S>
TensorPtr<S> matmul(Tape<S>* tape, const TensorPtr<S>& a, const TensorPtr<S>& b) {
  if (a->ndim() != 2 || b->ndim() != 2 || a->shape[1] != b->shape[0]) {
    detail::shape_error("matmul", "lhs " + shape_str(*a) + " rhs " + shape_str(*b));
  }
  detail::check_finite(a, "matmul");
  detail::check_finite(b, "matmul");
  const int m = static_cast<int>(a->shape[0]);
  const int k = static_cast<int>(a->shape[1]);
  const int n = static_cast<int>(b->shape[1]);
  const bool rec = detail::recording(tape, {&a, &b});
  auto out = detail::out_like<S>({m, n}, rec);
  kernels::gemm_nn<S>(a->v.data(), b->v.data(), out->v.data(), m, n, k, false);
  if (rec) {
    tape->record("matmul", [a, b, out, m, n, k] {
      if (a->requires_grad) {
        a->ensure_grad();
        kernels::gemm_nt<S>(out->g.data(), b->v.data(), a->g.data(), m, k, n, true);
      }
      if (b->requires_grad) {
        b->ensure_grad();
        kernels::gemm_tn<S>(a->v.data(), out->g.data(), b->g.data(), k, n, m, true);
      }
    });
  }
  return out;
}

template <class S>
TensorPtr<S> bmm(Tape<S>* tape, const TensorPtr<S>& a, const TensorPtr<S>& b) {
  if (a->ndim() != 3 || b->ndim() != 3 || a->shape[0] != b->shape[0] ||
      a->shape[2] != b->shape[1]) {
    detail::shape_error("bmm", "lhs " + shape_str(*a) + " rhs " + shape_str(*b));
  }
  const int nb = static_cast<int>(a->shape[0]);
  const int m = static_cast<int>(a->shape[1]);
  const int k = static_cast<int>(a->shape[2]);
  const int n = static_cast<int>(b->shape[2]);
  const bool rec = detail::recording(tape, {&a, &b});
  auto out = detail::out_like<S>({nb, m, n}, rec);
  const std::size_t sa = static_cast<std::size_t>(m) * k;
  const std::size_t sb = static_cast<std::size_t>(k) * n;
  const std::size_t sc = static_cast<std::size_t>(m) * n;
  for (int i = 0; i < nb; ++i) {
    kernels::gemm_nn<S>(a->v.data() + i * sa, b->v.data() + i * sb,
                        out->v.data() + i * sc, m, n, k, false);
  }
  if (rec) {
    tape->record("bmm", [a, b, out, nb, m, n, k, sa, sb, sc] {
      if (a->requires_grad) a->ensure_grad();
      if (b->requires_grad) b->ensure_grad();
      for (int i = 0; i < nb; ++i) {
        if (a->requires_grad) {
          kernels::gemm_nt<S>(out->g.data() + i * sc, b->v.data() + i * sb,
                              a->g.data() + i * sa, m, k, n, true);
        }
        if (b->requires_grad) {
          kernels::gemm_tn<S>(a->v.data() + i * sa, out->g.data() + i * sc,
                              b->g.data() + i * sb, k, n, m, true);
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// add family

template <class S>
TensorPtr<S> add(Tape<S>* tape, const TensorPtr<S>& a, const TensorPtr<S>& b) {
  if (a->shape != b->shape) {
    detail::shape_error("add", "lhs " + shape_str(*a) + " rhs " + shape_str(*b));
  }
  detail::check_finite(a, "add");
  detail::check_finite(b, "add");
  const bool rec = detail::recording(tape, {&a, &b});
  auto out = detail::out_like<S>(a->shape, rec);
  kernels::vadd<S>(a->v.data(), b->v.data(), out->v.data(), out->v.size());
  if (rec) {
    tape->record("add", [a, b, out] {
      if (a->requires_grad) {
        a->ensure_grad();
        kernels::vaxpy<S>(S(1), out->g.data(), a->g.data(), out->g.size());
      }
      if (b->requires_grad) {
        b->ensure_grad();
        kernels::vaxpy<S>(S(1), out->g.data(), b->g.data(), out->g.size());
      }
    });
  }
  return out;
}

// x: [..., d] plus bias [d] broadcast over leading dims.
template <class S>
TensorPtr<S> add_bias(Tape<S>* tape, const TensorPtr<S>& x, const TensorPtr<S>& bias) {
  const std::int64_t d = detail::trailing_dim(x->shape);
  if (bias->ndim() != 1 || bias->shape[0] != d) {
    detail::shape_error("add_bias", "x " + shape_str(*x) + " bias " + shape_str(*bias));
  }
  const bool rec = detail::recording(tape, {&x, &bias});
  auto out = detail::out_like<S>(x->shape, rec);
  const std::size_t rows = x->v.size() / static_cast<std::size_t>(d);
  for (std::size_t r = 0; r < rows; ++r) {
    kernels::vadd<S>(x->v.data() + r * d, bias->v.data(), out->v.data() + r * d,
                     static_cast<std::size_t>(d));
  }
  if (rec) {
    tape->record("add_bias", [x, bias, out, rows, d] {
      if (x->requires_grad) {
        x->ensure_grad();
        kernels::vaxpy<S>(S(1), out->g.data(), x->g.data(), out->g.size());
      }
      if (bias->requires_grad) {
        bias->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          kernels::vaxpy<S>(S(1), out->g.data() + r * d, bias->g.data(),
                            static_cast<std::size_t>(d));
        }
      }
    });
  }
  return out;
}

// x: [B, N, E] plus a per-row table [N, E] broadcast over the batch dim.
template <class S>
TensorPtr<S> add_rows(Tape<S>* tape, const TensorPtr<S>& x, const TensorPtr<S>& rows) {
  if (x->ndim() != 3 || rows->ndim() != 2 || x->shape[1] != rows->shape[0] ||
      x->shape[2] != rows->shape[1]) {
    detail::shape_error("add_rows", "x " + shape_str(*x) + " rows " + shape_str(*rows));
  }
  const bool rec = detail::recording(tape, {&x, &rows});
  auto out = detail::out_like<S>(x->shape, rec);
  const std::size_t bsz = static_cast<std::size_t>(x->shape[0]);
  const std::size_t tbl = rows->v.size();
  for (std::size_t b = 0; b < bsz; ++b) {
    kernels::vadd<S>(x->v.data() + b * tbl, rows->v.data(), out->v.data() + b * tbl, tbl);
  }
  if (rec) {
    tape->record("add_rows", [x, rows, out, bsz, tbl] {
      if (x->requires_grad) {
        x->ensure_grad();
        kernels::vaxpy<S>(S(1), out->g.data(), x->g.data(), out->g.size());
      }
      if (rows->requires_grad) {
        rows->ensure_grad();
        for (std::size_t b = 0; b < bsz; ++b) {
          kernels::vaxpy<S>(S(1), out->g.data() + b * tbl, rows->g.data(), tbl);
        }
      }
    });
  }
  return out;
}

template <class S>
TensorPtr<S> scale(Tape<S>* tape, const TensorPtr<S>& x, S alpha) {
  detail::check_finite(x, "scale");
  const bool rec = detail::recording(tape, {&x});
  auto out = detail::out_like<S>(x->shape, rec);
  kernels::vscale<S>(x->v.data(), alpha, out->v.data(), out->v.size());
  if (rec) {
    tape->record("scale", [x, out, alpha] {
      x->ensure_grad();
      kernels::vaxpy<S>(alpha, out->g.data(), x->g.data(), out->g.size());
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// nonlinearities

// Exact Gaussian-CDF GELU: x * Phi(x). The erf form (not the tanh
// approximation) keeps analytic gradients aligned with finite differences.
template <class S>
TensorPtr<S> gelu(Tape<S>* tape, const TensorPtr<S>& x) {
  detail::check_finite(x, "gelu");
  const bool rec = detail::recording(tape, {&x});
  auto out = detail::out_like<S>(x->shape, rec);
  const std::size_t n = x->v.size();
  constexpr S inv_sqrt2 = S(1.0 / std::numbers::sqrt2);
  for (std::size_t i = 0; i < n; ++i) {
    const S xi = x->v[i];
    out->v[i] = xi * S(0.5) * (S(1) + std::erf(xi * inv_sqrt2));
  }
  if (rec) {
    tape->record("gelu", [x, out, n] {
      x->ensure_grad();
      constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
      constexpr double inv_sqrt2pi = 0.3989422804014326779;
      for (std::size_t i = 0; i < n; ++i) {
        const double xi = static_cast<double>(x->v[i]);
        const double phi_cdf = 0.5 * (1.0 + std::erf(xi * inv_sqrt2));
        const double phi_pdf = inv_sqrt2pi * std::exp(-0.5 * xi * xi);
        x->g[i] += static_cast<S>((phi_cdf + xi * phi_pdf)) * out->g[i];
      }
    });
  }
  return out;
}

template <class S>
TensorPtr<S> tanh(Tape<S>* tape, const TensorPtr<S>& x) {
  detail::check_finite(x, "tanh");
  const bool rec = detail::recording(tape, {&x});
  auto out = detail::out_like<S>(x->shape, rec);
  const std::size_t n = x->v.size();
  for (std::size_t i = 0; i < n; ++i) out->v[i] = std::tanh(x->v[i]);
  if (rec) {
    tape->record("tanh", [x, out, n] {
      x->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        x->g[i] += (S(1) - out->v[i] * out->v[i]) * out->g[i];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// layernorm over the last dimension, learnable scale/shift

template <class S>
TensorPtr<S> layernorm(Tape<S>* tape, const TensorPtr<S>& x, const TensorPtr<S>& gamma,
                       const TensorPtr<S>& beta, S eps = S(1e-5)) {
  const std::int64_t d = detail::trailing_dim(x->shape);
  if (gamma->ndim() != 1 || gamma->shape[0] != d || beta->ndim() != 1 ||
      beta->shape[0] != d) {
    detail::shape_error("layernorm", "x " + shape_str(*x) + " gamma " +
                                         shape_str(*gamma) + " beta " + shape_str(*beta));
  }
  detail::check_finite(x, "layernorm");
  const bool rec = detail::recording(tape, {&x, &gamma, &beta});
  auto out = detail::out_like<S>(x->shape, rec);
  const std::size_t rows = x->v.size() / static_cast<std::size_t>(d);
  std::vector<S> rstd(rec ? rows : 0);
  std::vector<S> xhat(rec ? x->v.size() : 0);
  for (std::size_t r = 0; r < rows; ++r) {
    const S* xr = x->v.data() + r * d;
    S* yr = out->v.data() + r * d;
    S mu = 0;
    for (std::int64_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<S>(d);
    S var = 0;
    for (std::int64_t j = 0; j < d; ++j) {
      const S c = xr[j] - mu;
      var += c * c;
    }
    var /= static_cast<S>(d);
    const S rs = S(1) / std::sqrt(var + eps);
    for (std::int64_t j = 0; j < d; ++j) {
      const S xh = (xr[j] - mu) * rs;
      if (rec) xhat[r * d + j] = xh;
      yr[j] = xh * gamma->v[j] + beta->v[j];
    }
    if (rec) rstd[r] = rs;
  }
  if (rec) {
    tape->record("layernorm",
                 [x, gamma, beta, out, rows, d, rstd = std::move(rstd),
                  xhat = std::move(xhat)] {
      if (x->requires_grad) x->ensure_grad();
      if (gamma->requires_grad) gamma->ensure_grad();
      if (beta->requires_grad) beta->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const S* dy = out->g.data() + r * d;
        const S* xh = xhat.data() + r * d;
        if (gamma->requires_grad || beta->requires_grad) {
          for (std::int64_t j = 0; j < d; ++j) {
            if (gamma->requires_grad) gamma->g[j] += dy[j] * xh[j];
            if (beta->requires_grad) beta->g[j] += dy[j];
          }
        }
        if (x->requires_grad) {
          S mean_dxhat = 0, mean_dxhat_xhat = 0;
          for (std::int64_t j = 0; j < d; ++j) {
            const S dxh = dy[j] * gamma->v[j];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xh[j];
          }
          mean_dxhat /= static_cast<S>(d);
          mean_dxhat_xhat /= static_cast<S>(d);
          S* dx = x->g.data() + r * d;
          for (std::int64_t j = 0; j < d; ++j) {
            const S dxh = dy[j] * gamma->v[j];
            dx[j] += (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat) * rstd[r];
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// softmax over the last dimension

template <class S>
TensorPtr<S> softmax(Tape<S>* tape, const TensorPtr<S>& x) {
  const std::int64_t d = detail::trailing_dim(x->shape);
  if (d == 0) detail::shape_error("softmax", "empty last dim of " + shape_str(*x));
  const bool rec = detail::recording(tape, {&x});
  auto out = detail::out_like<S>(x->shape, rec);
  const std::size_t rows = x->v.size() / static_cast<std::size_t>(d);
  for (std::size_t r = 0; r < rows; ++r) {
    const S* xr = x->v.data() + r * d;
    S* yr = out->v.data() + r * d;
    S mx = xr[0];
    for (std::int64_t j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
    S sum = 0;
    for (std::int64_t j = 0; j < d; ++j) {
      const S e = std::exp(xr[j] - mx);
      yr[j] = e;
      sum += e;
    }
    const S inv = S(1) / sum;
    for (std::int64_t j = 0; j < d; ++j) yr[j] *= inv;
  }
  if (rec) {
    tape->record("softmax", [x, out, rows, d] {
      x->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const S* w = out->v.data() + r * d;
        const S* dy = out->g.data() + r * d;
        S dot = 0;
        for (std::int64_t j = 0; j < d; ++j) dot += w[j] * dy[j];
        S* dx = x->g.data() + r * d;
        for (std::int64_t j = 0; j < d; ++j) dx[j] += w[j] * (dy[j] - dot);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// dropout (inverted: retained values scaled by 1/keep at train time)

template <class S>
TensorPtr<S> dropout(Tape<S>* tape, const TensorPtr<S>& x, double keep_prob,
                     Rng* rng, bool train) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
    throw std::invalid_argument("dropout: keep probability must be in (0,1]");
  }
  if (!train || keep_prob == 1.0) return x;  // evaluation mode is a no-op
  if (!rng) throw std::invalid_argument("dropout: rng required in train mode");
  const bool rec = detail::recording(tape, {&x});
  auto out = detail::out_like<S>(x->shape, rec);
  const std::size_t n = x->v.size();
  const S scale_kept = S(1.0 / keep_prob);
  std::vector<S> mask(n);
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = rng->uniform() < keep_prob ? scale_kept : S(0);
  }
  kernels::vmul<S>(x->v.data(), mask.data(), out->v.data(), n);
  if (rec) {
    tape->record("dropout", [x, out, mask = std::move(mask), n] {
      x->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) x->g[i] += mask[i] * out->g[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// data movement

template <class S>
TensorPtr<S> reshape(Tape<S>* tape, const TensorPtr<S>& x,
                     std::vector<std::int64_t> shape) {
  std::int64_t n = 1;
  for (auto dd : shape) n *= dd;
  if (n != x->numel()) {
    detail::shape_error("reshape", shape_str(*x) + " to " + shape_str(shape));
  }
  const bool rec = detail::recording(tape, {&x});
  auto out = detail::out_like<S>(std::move(shape), rec);
  out->v = x->v;
  if (rec) {
    tape->record("reshape", [x, out] {
      x->ensure_grad();
      kernels::vaxpy<S>(S(1), out->g.data(), x->g.data(), out->g.size());
    });
  }
  return out;
}

namespace detail {

template <class S>
void permute_copy(const S* src, S* dst, const std::vector<std::int64_t>& in_shape,
                  const std::vector<int>& perm, bool accumulate) {
  const int nd = static_cast<int>(in_shape.size());
  std::vector<std::int64_t> in_strides(nd, 1);
  for (int i = nd - 2; i >= 0; --i) in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
  std::vector<std::int64_t> out_shape(nd);
  for (int i = 0; i < nd; ++i) out_shape[i] = in_shape[perm[i]];
  std::vector<std::int64_t> out_strides(nd, 1);
  for (int i = nd - 2; i >= 0; --i) out_strides[i] = out_strides[i + 1] * out_shape[i + 1];
  // walk the output in order; map each output index to its input offset
  std::vector<std::int64_t> idx(nd, 0);
  std::int64_t total = 1;
  for (auto dd : in_shape) total *= dd;
  std::int64_t in_off = 0;
  // in_stride_for_out_axis[i]: how much the input offset moves when output axis i ticks
  std::vector<std::int64_t> step(nd);
  for (int i = 0; i < nd; ++i) step[i] = in_strides[perm[i]];
  for (std::int64_t o = 0; o < total; ++o) {
    if (accumulate) {
      dst[o] += src[in_off];
    } else {
      dst[o] = src[in_off];
    }
    for (int ax = nd - 1; ax >= 0; --ax) {
      idx[ax]++;
      in_off += step[ax];
      if (idx[ax] < out_shape[ax]) break;
      in_off -= step[ax] * out_shape[ax];
      idx[ax] = 0;
    }
  }
}

}  // namespace detail

template <class S>
TensorPtr<S> permute(Tape<S>* tape, const TensorPtr<S>& x, std::vector<int> perm) {
  const int nd = x->ndim();
  if (static_cast<int>(perm.size()) != nd) {
    detail::shape_error("permute", "perm rank != tensor rank for " + shape_str(*x));
  }
  std::vector<bool> seen(nd, false);
  for (int p : perm) {
    if (p < 0 || p >= nd || seen[p]) detail::shape_error("permute", "invalid permutation");
    seen[p] = true;
  }
  const bool rec = detail::recording(tape, {&x});
  std::vector<std::int64_t> out_shape(nd);
  for (int i = 0; i < nd; ++i) out_shape[i] = x->shape[perm[i]];
  auto out = detail::out_like<S>(std::move(out_shape), rec);
  detail::permute_copy<S>(x->v.data(), out->v.data(), x->shape, perm, false);
  if (rec) {
    std::vector<int> inv(nd);
    for (int i = 0; i < nd; ++i) inv[perm[i]] = i;
    tape->record("permute", [x, out, inv = std::move(inv)] {
      x->ensure_grad();
      detail::permute_copy<S>(out->g.data(), x->g.data(), out->shape, inv, true);
    });
  }
  return out;
}

template <class S>
TensorPtr<S> slice(Tape<S>* tape, const TensorPtr<S>& x, int axis, std::int64_t start,
                   std::int64_t len) {
  const int nd = x->ndim();
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd || start < 0 || len < 0 || start + len > x->shape[axis]) {
    detail::shape_error("slice", "range [" + std::to_string(start) + "," +
                                     std::to_string(start + len) + ") on axis " +
                                     std::to_string(axis) + " of " + shape_str(*x));
  }
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x->shape[i];
  for (int i = axis + 1; i < nd; ++i) inner *= x->shape[i];
  const bool rec = detail::recording(tape, {&x});
  std::vector<std::int64_t> out_shape = x->shape;
  out_shape[axis] = len;
  auto out = detail::out_like<S>(std::move(out_shape), rec);
  const std::int64_t dim = x->shape[axis];
  for (std::int64_t o = 0; o < outer; ++o) {
    std::memcpy(out->v.data() + o * len * inner,
                x->v.data() + (o * dim + start) * inner,
                static_cast<std::size_t>(len * inner) * sizeof(S));
  }
  if (rec) {
    tape->record("slice", [x, out, outer, inner, dim, start, len] {
      x->ensure_grad();
      for (std::int64_t o = 0; o < outer; ++o) {
        kernels::vaxpy<S>(S(1), out->g.data() + o * len * inner,
                          x->g.data() + (o * dim + start) * inner,
                          static_cast<std::size_t>(len * inner));
      }
    });
  }
  return out;
}

// Select rows by index. 2D: [N, E] -> [K, E]. 3D: [B, N, E] -> [B, K, E] with
// the same index list for every batch element. Backward scatter-adds.
template <class S>
TensorPtr<S> gather_rows(Tape<S>* tape, const TensorPtr<S>& x,
                         const std::vector<std::int64_t>& idx) {
  if (x->ndim() != 2 && x->ndim() != 3) {
    detail::shape_error("gather_rows", "expects 2D or 3D input, got " + shape_str(*x));
  }
  const bool batched = x->ndim() == 3;
  const std::int64_t bsz = batched ? x->shape[0] : 1;
  const std::int64_t nrow = batched ? x->shape[1] : x->shape[0];
  const std::int64_t e = batched ? x->shape[2] : x->shape[1];
  for (auto i : idx) {
    if (i < 0 || i >= nrow) {
      detail::shape_error("gather_rows", "index " + std::to_string(i) +
                                             " out of range for " + shape_str(*x));
    }
  }
  const std::int64_t kk = static_cast<std::int64_t>(idx.size());
  const bool rec = detail::recording(tape, {&x});
  auto out = detail::out_like<S>(
      batched ? std::vector<std::int64_t>{bsz, kk, e} : std::vector<std::int64_t>{kk, e},
      rec);
  for (std::int64_t b = 0; b < bsz; ++b) {
    for (std::int64_t r = 0; r < kk; ++r) {
      std::memcpy(out->v.data() + (b * kk + r) * e,
                  x->v.data() + (b * nrow + idx[r]) * e,
                  static_cast<std::size_t>(e) * sizeof(S));
    }
  }
  if (rec) {
    tape->record("gather_rows", [x, out, idx, bsz, nrow, kk, e] {
      x->ensure_grad();
      for (std::int64_t b = 0; b < bsz; ++b) {
        for (std::int64_t r = 0; r < kk; ++r) {
          kernels::vaxpy<S>(S(1), out->g.data() + (b * kk + r) * e,
                            x->g.data() + (b * nrow + idx[r]) * e,
                            static_cast<std::size_t>(e));
        }
      }
    });
  }
  return out;
}

// Concatenate 2D tensors along axis 0 or 1.
template <class S>
TensorPtr<S> concat(Tape<S>* tape, const std::vector<TensorPtr<S>>& xs, int axis) {
  if (xs.empty()) throw std::invalid_argument("concat: no inputs");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
  for (const auto& x : xs) {
    if (x->ndim() != 2) detail::shape_error("concat", "expects 2D inputs, got " + shape_str(*x));
  }
  const std::int64_t fixed = xs[0]->shape[1 - axis];
  std::int64_t total = 0;
  for (const auto& x : xs) {
    if (x->shape[1 - axis] != fixed) {
      detail::shape_error("concat", "mismatched shapes " + shape_str(*xs[0]) + " vs " +
                                        shape_str(*x));
    }
    total += x->shape[axis];
  }
  bool rec = false;
  if (tape) {
    for (const auto& x : xs) rec = rec || x->requires_grad;
  }
  auto out = detail::out_like<S>(axis == 0 ? std::vector<std::int64_t>{total, fixed}
                                           : std::vector<std::int64_t>{fixed, total},
                                 rec);
  if (axis == 0) {
    std::int64_t off = 0;
    for (const auto& x : xs) {
      std::memcpy(out->v.data() + off, x->v.data(), x->v.size() * sizeof(S));
      off += x->numel();
    }
  } else {
    std::int64_t col = 0;
    for (const auto& x : xs) {
      const std::int64_t w = x->shape[1];
      for (std::int64_t r = 0; r < fixed; ++r) {
        std::memcpy(out->v.data() + r * total + col, x->v.data() + r * w,
                    static_cast<std::size_t>(w) * sizeof(S));
      }
      col += w;
    }
  }
  if (rec) {
    tape->record("concat", [xs, out, axis, fixed, total] {
      if (axis == 0) {
        std::int64_t off = 0;
        for (const auto& x : xs) {
          if (x->requires_grad) {
            x->ensure_grad();
            kernels::vaxpy<S>(S(1), out->g.data() + off, x->g.data(), x->g.size());
          }
          off += x->numel();
        }
      } else {
        std::int64_t col = 0;
        for (const auto& x : xs) {
          const std::int64_t w = x->shape[1];
          if (x->requires_grad) {
            x->ensure_grad();
            for (std::int64_t r = 0; r < fixed; ++r) {
              kernels::vaxpy<S>(S(1), out->g.data() + r * total + col,
                                x->g.data() + r * w, static_cast<std::size_t>(w));
            }
          }
          col += w;
        }
      }
    });
  }
  return out;
}

// out[b, n, :] = take_x[b*N + n] ? x[b, n, :] : rows[n, :].
// Used to splice encoder outputs with mask-token rows at the decoder input.
template <class S>
TensorPtr<S> mix_by_mask(Tape<S>* tape, const TensorPtr<S>& x, const TensorPtr<S>& rows,
                         const std::vector<std::uint8_t>& take_x) {
  if (x->ndim() != 3 || rows->ndim() != 2 || x->shape[1] != rows->shape[0] ||
      x->shape[2] != rows->shape[1]) {
    detail::shape_error("mix_by_mask", "x " + shape_str(*x) + " rows " + shape_str(*rows));
  }
  const std::int64_t bsz = x->shape[0], nrow = x->shape[1], e = x->shape[2];
  if (take_x.size() != static_cast<std::size_t>(bsz * nrow)) {
    detail::shape_error("mix_by_mask", "flag count != B*N");
  }
  const bool rec = detail::recording(tape, {&x, &rows});
  auto out = detail::out_like<S>(x->shape, rec);
  for (std::int64_t b = 0; b < bsz; ++b) {
    for (std::int64_t n = 0; n < nrow; ++n) {
      const S* src = take_x[b * nrow + n] ? x->v.data() + (b * nrow + n) * e
                                          : rows->v.data() + n * e;
      std::memcpy(out->v.data() + (b * nrow + n) * e, src,
                  static_cast<std::size_t>(e) * sizeof(S));
    }
  }
  if (rec) {
    tape->record("mix_by_mask", [x, rows, out, take_x, bsz, nrow, e] {
      if (x->requires_grad) x->ensure_grad();
      if (rows->requires_grad) rows->ensure_grad();
      for (std::int64_t b = 0; b < bsz; ++b) {
        for (std::int64_t n = 0; n < nrow; ++n) {
          const S* dy = out->g.data() + (b * nrow + n) * e;
          if (take_x[b * nrow + n]) {
            if (x->requires_grad) {
              kernels::vaxpy<S>(S(1), dy, x->g.data() + (b * nrow + n) * e,
                                static_cast<std::size_t>(e));
            }
          } else if (rows->requires_grad) {
            kernels::vaxpy<S>(S(1), dy, rows->g.data() + n * e,
                              static_cast<std::size_t>(e));
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// reductions / losses

template <class S>
TensorPtr<S> mean_all(Tape<S>* tape, const TensorPtr<S>& x) {
  if (x->numel() == 0) detail::shape_error("mean_all", "empty tensor");
  const bool rec = detail::recording(tape, {&x});
  double acc = 0;
  for (const S xi : x->v) acc += static_cast<double>(xi);
  auto out = Tensor<S>::scalar(static_cast<S>(acc / static_cast<double>(x->numel())));
  out->requires_grad = rec;
  if (rec) {
    out->ensure_grad();
    const S inv = S(1) / static_cast<S>(x->numel());
    tape->record("mean_all", [x, out, inv] {
      x->ensure_grad();
      const S c = inv * out->g[0];
      for (auto& gi : x->g) gi += c;
    });
  }
  return out;
}

template <class S>
TensorPtr<S> mse(Tape<S>* tape, const TensorPtr<S>& pred, const TensorPtr<S>& target) {
  if (pred->shape != target->shape) {
    detail::shape_error("mse", "pred " + shape_str(*pred) + " target " + shape_str(*target));
  }
  if (pred->numel() == 0) detail::shape_error("mse", "empty tensors");
  const bool rec = detail::recording(tape, {&pred, &target});
  const std::size_t n = pred->v.size();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dd = static_cast<double>(pred->v[i]) - static_cast<double>(target->v[i]);
    acc += dd * dd;
  }
  auto out = Tensor<S>::scalar(static_cast<S>(acc / static_cast<double>(n)));
  out->requires_grad = rec;
  if (rec) {
    out->ensure_grad();
    tape->record("mse", [pred, target, out, n] {
      const S c = S(2) / static_cast<S>(n) * out->g[0];
      if (pred->requires_grad) {
        pred->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          pred->g[i] += c * (pred->v[i] - target->v[i]);
        }
      }
      if (target->requires_grad) {
        target->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          target->g[i] -= c * (pred->v[i] - target->v[i]);
        }
      }
    });
  }
  return out;
}

// Sum over cells of w[cell] * |pred[cell,:] - target[cell,:]|^2 where pred and
// target are [..., D] and w has one entry per leading row. A zero weight makes
// both the contribution and the gradient exactly zero.
template <class S>
TensorPtr<S> weighted_sq_sum(Tape<S>* tape, const TensorPtr<S>& pred,
                             const TensorPtr<S>& target, const std::vector<S>& w) {
  if (pred->shape != target->shape) {
    detail::shape_error("weighted_sq_sum",
                        "pred " + shape_str(*pred) + " target " + shape_str(*target));
  }
  const std::int64_t d = detail::trailing_dim(pred->shape);
  const std::size_t rows = pred->v.size() / static_cast<std::size_t>(d);
  if (w.size() != rows) {
    detail::shape_error("weighted_sq_sum", "weight count " + std::to_string(w.size()) +
                                               " != rows " + std::to_string(rows));
  }
  const bool rec = detail::recording(tape, {&pred, &target});
  double acc = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (w[r] == S(0)) continue;
    const S* p = pred->v.data() + r * d;
    const S* t = target->v.data() + r * d;
    double row = 0;
    for (std::int64_t j = 0; j < d; ++j) {
      const double dd = static_cast<double>(p[j]) - static_cast<double>(t[j]);
      row += dd * dd;
    }
    acc += static_cast<double>(w[r]) * row;
  }
  auto out = Tensor<S>::scalar(static_cast<S>(acc));
  out->requires_grad = rec;
  if (rec) {
    out->ensure_grad();
    tape->record("weighted_sq_sum", [pred, target, out, w, rows, d] {
      const S go = out->g[0];
      if (pred->requires_grad) pred->ensure_grad();
      if (target->requires_grad) target->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        if (w[r] == S(0)) continue;
        const S c = S(2) * w[r] * go;
        for (std::int64_t j = 0; j < d; ++j) {
          const S diff = pred->v[r * d + j] - target->v[r * d + j];
          if (pred->requires_grad) pred->g[r * d + j] += c * diff;
          if (target->requires_grad) target->g[r * d + j] -= c * diff;
        }
      }
    });
  }
  return out;
}

}  // namespace mtm::ops
