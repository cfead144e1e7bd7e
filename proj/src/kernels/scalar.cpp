#include "mtm/kernels/kernels.hpp"

#include <cmath>
#include <cstring>

namespace mtm::kernels::scalar {

template <class S>
void gemm_nn(const S* a, const S* b, S* c, int m, int n, int k, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    S* ci = c + static_cast<std::size_t>(i) * n;
    if (!accumulate) std::memset(ci, 0, sizeof(S) * n);
    const S* ai = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const S aip = ai[p];
      const S* bp = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

template <class S>
void gemm_tn(const S* a, const S* b, S* c, int m, int n, int k, bool accumulate) {
  // c[i,j] = sum_p a[p,i] * b[p,j]
  if (!accumulate) std::memset(c, 0, sizeof(S) * static_cast<std::size_t>(m) * n);
  for (int p = 0; p < k; ++p) {
    const S* ap = a + static_cast<std::size_t>(p) * m;
    const S* bp = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const S api = ap[i];
      S* ci = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

template <class S>
void gemm_nt(const S* a, const S* b, S* c, int m, int n, int k, bool accumulate) {
  // c[i,j] = sum_p a[i,p] * b[j,p]
  for (int i = 0; i < m; ++i) {
    const S* ai = a + static_cast<std::size_t>(i) * k;
    S* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const S* bj = b + static_cast<std::size_t>(j) * k;
      S acc = 0;
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = accumulate ? ci[j] + acc : acc;
    }
  }
}

template <class S>
void vadd(const S* x, const S* y, S* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

template <class S>
void vmul(const S* x, const S* y, S* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

template <class S>
void vscale(const S* x, S alpha, S* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * alpha;
}

template <class S>
void vaxpy(S alpha, const S* x, S* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class S>
S reduce_sum(const S* x, std::size_t n) {
  S acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template <class S>
S reduce_sqsum(const S* x, std::size_t n) {
  S acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

template <class S>
void adamw_step(S* p, const S* g, S* m, S* v, std::size_t n, S lr, S beta1,
                S beta2, S eps, S wd, S bc1, S bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (S(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (S(1) - beta2) * g[i] * g[i];
    const S mhat = m[i] / bc1;
    const S vhat = v[i] / bc2;
    p[i] -= lr * (mhat / (std::sqrt(vhat) + eps)) + lr * wd * p[i];
  }
}

#define MTM_INSTANTIATE_SCALAR(S)                                              \
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

MTM_INSTANTIATE_SCALAR(float)
MTM_INSTANTIATE_SCALAR(double)

}  // namespace mtm::kernels::scalar
