#include "mtm/kernels/kernels.hpp"

#if MTM_HAVE_AVX2_TU

#include <immintrin.h>

#include <cmath>
#include <cstring>
#include <vector>

// AVX2+FMA variants of the dispatched kernels. This translation unit is the
// only one compiled with -mavx2 -mfma; callers must check avx2_supported()
// before routing here.

namespace mtm::kernels::avx2 {

namespace {

// Minimal width-generic wrapper so the same micro-kernel serves float (8 lanes)
// and double (4 lanes).
template <class S> struct Vec;

template <> struct Vec<float> {
  static constexpr int width = 8;
  __m256 v;
  static Vec zero() { return {_mm256_setzero_ps()}; }
  static Vec load(const float* p) { return {_mm256_loadu_ps(p)}; }
  static Vec broadcast(float x) { return {_mm256_set1_ps(x)}; }
  void store(float* p) const { _mm256_storeu_ps(p, v); }
  friend Vec fma(Vec a, Vec b, Vec c) { return {_mm256_fmadd_ps(a.v, b.v, c.v)}; }
  friend Vec add(Vec a, Vec b) { return {_mm256_add_ps(a.v, b.v)}; }
  friend Vec mul(Vec a, Vec b) { return {_mm256_mul_ps(a.v, b.v)}; }
  float hsum() const {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    __m128 s = _mm_add_ps(lo, hi);
    s = _mm_add_ps(s, _mm_movehl_ps(s, s));
    s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
    return _mm_cvtss_f32(s);
  }
};

template <> struct Vec<double> {
  static constexpr int width = 4;
  __m256d v;
  static Vec zero() { return {_mm256_setzero_pd()}; }
  static Vec load(const double* p) { return {_mm256_loadu_pd(p)}; }
  static Vec broadcast(double x) { return {_mm256_set1_pd(x)}; }
  void store(double* p) const { _mm256_storeu_pd(p, v); }
  friend Vec fma(Vec a, Vec b, Vec c) { return {_mm256_fmadd_pd(a.v, b.v, c.v)}; }
  friend Vec add(Vec a, Vec b) { return {_mm256_add_pd(a.v, b.v)}; }
  friend Vec mul(Vec a, Vec b) { return {_mm256_mul_pd(a.v, b.v)}; }
  double hsum() const {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    __m128d s = _mm_add_pd(lo, hi);
    s = _mm_add_sd(s, _mm_unpackhi_pd(s, s));
    return _mm_cvtsd_f64(s);
  }
};

// 4-row by 2-vector GEMM micro-kernel: accumulators stay in registers across
// the k loop, B rows are loaded once per 4 output rows.
template <class S>
void gemm_nn_block4(const S* a, const S* b, S* c, int n, int k, int j0,
                    std::size_t lda, std::size_t ldc, bool accumulate) {
  using V = Vec<S>;
  constexpr int W = V::width;
  V acc00, acc01, acc10, acc11, acc20, acc21, acc30, acc31;
  if (accumulate) {
    acc00 = V::load(c + 0 * ldc + j0);
    acc01 = V::load(c + 0 * ldc + j0 + W);
    acc10 = V::load(c + 1 * ldc + j0);
    acc11 = V::load(c + 1 * ldc + j0 + W);
    acc20 = V::load(c + 2 * ldc + j0);
    acc21 = V::load(c + 2 * ldc + j0 + W);
    acc30 = V::load(c + 3 * ldc + j0);
    acc31 = V::load(c + 3 * ldc + j0 + W);
  } else {
    acc00 = acc01 = acc10 = acc11 = acc20 = acc21 = acc30 = acc31 = V::zero();
  }
  for (int p = 0; p < k; ++p) {
    const V b0 = V::load(b + static_cast<std::size_t>(p) * n + j0);
    const V b1 = V::load(b + static_cast<std::size_t>(p) * n + j0 + W);
    const V a0 = V::broadcast(a[0 * lda + p]);
    const V a1 = V::broadcast(a[1 * lda + p]);
    const V a2 = V::broadcast(a[2 * lda + p]);
    const V a3 = V::broadcast(a[3 * lda + p]);
    acc00 = fma(a0, b0, acc00);
    acc01 = fma(a0, b1, acc01);
    acc10 = fma(a1, b0, acc10);
    acc11 = fma(a1, b1, acc11);
    acc20 = fma(a2, b0, acc20);
    acc21 = fma(a2, b1, acc21);
    acc30 = fma(a3, b0, acc30);
    acc31 = fma(a3, b1, acc31);
  }
  acc00.store(c + 0 * ldc + j0);
  acc01.store(c + 0 * ldc + j0 + W);
  acc10.store(c + 1 * ldc + j0);
  acc11.store(c + 1 * ldc + j0 + W);
  acc20.store(c + 2 * ldc + j0);
  acc21.store(c + 2 * ldc + j0 + W);
  acc30.store(c + 3 * ldc + j0);
  acc31.store(c + 3 * ldc + j0 + W);
}

// Single-row edge kernel, one vector wide.
template <class S>
void gemm_nn_row(const S* a, const S* b, S* c, int n, int k, bool accumulate) {
  using V = Vec<S>;
  constexpr int W = V::width;
  int j = 0;
  for (; j + W <= n; j += W) {
    V acc = accumulate ? V::load(c + j) : V::zero();
    for (int p = 0; p < k; ++p) {
      acc = fma(V::broadcast(a[p]), V::load(b + static_cast<std::size_t>(p) * n + j), acc);
    }
    acc.store(c + j);
  }
  for (; j < n; ++j) {
    S acc = accumulate ? c[j] : S(0);
    for (int p = 0; p < k; ++p) acc += a[p] * b[static_cast<std::size_t>(p) * n + j];
    c[j] = acc;
  }
}

thread_local std::vector<unsigned char> g_scratch;

template <class S>
S* scratch(std::size_t n) {
  if (g_scratch.size() < n * sizeof(S)) g_scratch.resize(n * sizeof(S));
  return reinterpret_cast<S*>(g_scratch.data());
}

template <class S>
void transpose(const S* src, S* dst, int rows, int cols) {
  // dst is cols x rows
  constexpr int BL = 32;
  for (int i0 = 0; i0 < rows; i0 += BL) {
    const int i1 = i0 + BL < rows ? i0 + BL : rows;
    for (int j0 = 0; j0 < cols; j0 += BL) {
      const int j1 = j0 + BL < cols ? j0 + BL : cols;
      for (int i = i0; i < i1; ++i)
        for (int j = j0; j < j1; ++j)
          dst[static_cast<std::size_t>(j) * rows + i] =
              src[static_cast<std::size_t>(i) * cols + j];
    }
  }
}

}  // namespace

template <class S>
void gemm_nn(const S* a, const S* b, S* c, int m, int n, int k, bool accumulate) {
  constexpr int W = Vec<S>::width;
  const int nb = (n / (2 * W)) * (2 * W);  // widest column span the block kernel covers
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    const S* ai = a + static_cast<std::size_t>(i) * k;
    S* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < nb; j += 2 * W)
      gemm_nn_block4<S>(ai, b, ci, n, k, j, k, n, accumulate);
    if (nb < n) {
      // column remainder: fall back to one row at a time over the tail
      for (int r = 0; r < 4; ++r) {
        S* cr = ci + static_cast<std::size_t>(r) * n + nb;
        const S* ar = ai + static_cast<std::size_t>(r) * k;
        const int tail = n - nb;
        for (int j = 0; j < tail; ++j) {
          S acc = accumulate ? cr[j] : S(0);
          for (int p = 0; p < k; ++p) acc += ar[p] * b[static_cast<std::size_t>(p) * n + nb + j];
          cr[j] = acc;
        }
      }
    }
  }
  for (; i < m; ++i) {
    gemm_nn_row<S>(a + static_cast<std::size_t>(i) * k, b,
                   c + static_cast<std::size_t>(i) * n, n, k, accumulate);
  }
}

template <class S>
void gemm_tn(const S* a, const S* b, S* c, int m, int n, int k, bool accumulate) {
  // a is k x m; transpose into scratch then run the nn kernel
  S* at = scratch<S>(static_cast<std::size_t>(m) * k);
  transpose(a, at, k, m);
  gemm_nn<S>(at, b, c, m, n, k, accumulate);
}

template <class S>
void gemm_nt(const S* a, const S* b, S* c, int m, int n, int k, bool accumulate) {
  // b is n x k; transpose into scratch then run the nn kernel
  S* bt = scratch<S>(static_cast<std::size_t>(n) * k);
  transpose(b, bt, n, k);
  gemm_nn<S>(a, bt, c, m, n, k, accumulate);
}

template <class S>
void vadd(const S* x, const S* y, S* out, std::size_t n) {
  using V = Vec<S>;
  constexpr std::size_t W = V::width;
  std::size_t i = 0;
  for (; i + W <= n; i += W) add(V::load(x + i), V::load(y + i)).store(out + i);
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

template <class S>
void vmul(const S* x, const S* y, S* out, std::size_t n) {
  using V = Vec<S>;
  constexpr std::size_t W = V::width;
  std::size_t i = 0;
  for (; i + W <= n; i += W) mul(V::load(x + i), V::load(y + i)).store(out + i);
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

template <class S>
void vscale(const S* x, S alpha, S* out, std::size_t n) {
  using V = Vec<S>;
  constexpr std::size_t W = V::width;
  const V va = V::broadcast(alpha);
  std::size_t i = 0;
  for (; i + W <= n; i += W) mul(V::load(x + i), va).store(out + i);
  for (; i < n; ++i) out[i] = x[i] * alpha;
}

template <class S>
void vaxpy(S alpha, const S* x, S* y, std::size_t n) {
  using V = Vec<S>;
  constexpr std::size_t W = V::width;
  const V va = V::broadcast(alpha);
  std::size_t i = 0;
  for (; i + W <= n; i += W) fma(va, V::load(x + i), V::load(y + i)).store(y + i);
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <class S>
S reduce_sum(const S* x, std::size_t n) {
  using V = Vec<S>;
  constexpr std::size_t W = V::width;
  V acc = V::zero();
  std::size_t i = 0;
  for (; i + W <= n; i += W) acc = add(acc, V::load(x + i));
  S total = acc.hsum();
  for (; i < n; ++i) total += x[i];
  return total;
}

template <class S>
S reduce_sqsum(const S* x, std::size_t n) {
  using V = Vec<S>;
  constexpr std::size_t W = V::width;
  V acc = V::zero();
  std::size_t i = 0;
  for (; i + W <= n; i += W) {
    const V v = V::load(x + i);
    acc = fma(v, v, acc);
  }
  S total = acc.hsum();
  for (; i < n; ++i) total += x[i] * x[i];
  return total;
}

template <class S>
void adamw_step(S* p, const S* g, S* m, S* v, std::size_t n, S lr, S beta1,
                S beta2, S eps, S wd, S bc1, S bc2) {
  // The sqrt keeps this loop scalar-friendly for doubles; vectorize float only
  // where _mm256_sqrt_ps carries the weight.
  using V = Vec<S>;
  constexpr std::size_t W = V::width;
  std::size_t i = 0;
  if constexpr (W == 8) {
    const __m256 vb1 = _mm256_set1_ps(beta1), vb2 = _mm256_set1_ps(beta2);
    const __m256 v1mb1 = _mm256_set1_ps(1.0f - beta1), v1mb2 = _mm256_set1_ps(1.0f - beta2);
    const __m256 vbc1 = _mm256_set1_ps(bc1), vbc2 = _mm256_set1_ps(bc2);
    const __m256 vlr = _mm256_set1_ps(lr), veps = _mm256_set1_ps(eps);
    const __m256 vlrwd = _mm256_set1_ps(lr * wd);
    for (; i + 8 <= n; i += 8) {
      __m256 gi = _mm256_loadu_ps(g + i);
      __m256 mi = _mm256_fmadd_ps(v1mb1, gi, _mm256_mul_ps(vb1, _mm256_loadu_ps(m + i)));
      __m256 vi = _mm256_fmadd_ps(v1mb2, _mm256_mul_ps(gi, gi),
                                  _mm256_mul_ps(vb2, _mm256_loadu_ps(v + i)));
      _mm256_storeu_ps(m + i, mi);
      _mm256_storeu_ps(v + i, vi);
      __m256 mhat = _mm256_div_ps(mi, vbc1);
      __m256 vhat = _mm256_div_ps(vi, vbc2);
      __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), veps);
      __m256 pi = _mm256_loadu_ps(p + i);
      __m256 upd = _mm256_add_ps(_mm256_mul_ps(vlr, _mm256_div_ps(mhat, denom)),
                                 _mm256_mul_ps(vlrwd, pi));
      _mm256_storeu_ps(p + i, _mm256_sub_ps(pi, upd));
    }
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (S(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (S(1) - beta2) * g[i] * g[i];
    const S mhat = m[i] / bc1;
    const S vhat = v[i] / bc2;
    p[i] -= lr * (mhat / (std::sqrt(vhat) + eps)) + lr * wd * p[i];
  }
}

#define MTM_INSTANTIATE_AVX2(S)                                                \
  template void gemm_nn<S>(const S*, const S*, S*, int, int, int, bool);       \
  template void gemm_tn<S>(const S*, const S*, S*, int, int, int, bool);       \
  template void gemm_nt<S>(const S*, const S*, S*, int, int, int, bool);       \
  template void vadd<S>(const S*, const S*, S*, std::size_t);                  \
  template void vmul<S>(const S*, const S*, S*, std::size_t);                  \
  template void vscale<S>(const S*, S, S*, std::size_t);                       \
  template void vaxpy<S>(S, const S*, S*, std::size_t);                        \
  template S reduce_sum<S>(const S*, std::size_t);                             \
  template S reduce_sqsum<S>(const S*, std::size_t);                           \
  template void adamw_step<S>(S*, const S*, S*, S*, std::size_t, S, S, S, S, S, S, S);

MTM_INSTANTIATE_AVX2(float)
MTM_INSTANTIATE_AVX2(double)

}  // namespace mtm::kernels::avx2

#endif  // MTM_HAVE_AVX2_TU
