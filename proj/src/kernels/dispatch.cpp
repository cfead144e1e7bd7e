#include "mtm/kernels/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace mtm::kernels {

namespace {

bool detect_avx2() {
#if MTM_HAVE_AVX2_TU
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  if (const char* env = std::getenv("MTM_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
    if (std::strcmp(env, "avx2") == 0) {
      if (!detect_avx2()) throw std::runtime_error("MTM_KERNELS=avx2 but host lacks AVX2/FMA");
      return Backend::Avx2;
    }
    // anything else (including "auto") falls through to detection
  }
  return detect_avx2() ? Backend::Avx2 : Backend::Scalar;
}

Backend& backend_slot() {
  static Backend b = initial_backend();
  return b;
}

}  // namespace

bool avx2_supported() { return detect_avx2(); }

Backend active_backend() { return backend_slot(); }

void set_backend(Backend b) {
  if (b == Backend::Avx2 && !detect_avx2())
    throw std::runtime_error("kernel backend avx2 not supported on this host");
  backend_slot() = b;
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
  }
  return "?";
}

#if MTM_HAVE_AVX2_TU
#define MTM_DISPATCH(fn, ...)                                    \
  if (backend_slot() == Backend::Avx2) return avx2::fn(__VA_ARGS__); \
  return scalar::fn(__VA_ARGS__)
#else
#define MTM_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

template <class S>
void gemm_nn(const S* a, const S* b, S* c, int m, int n, int k, bool accumulate) {
  MTM_DISPATCH(gemm_nn, a, b, c, m, n, k, accumulate);
}
template <class S>
void gemm_tn(const S* a, const S* b, S* c, int m, int n, int k, bool accumulate) {
  MTM_DISPATCH(gemm_tn, a, b, c, m, n, k, accumulate);
}
template <class S>
void gemm_nt(const S* a, const S* b, S* c, int m, int n, int k, bool accumulate) {
  MTM_DISPATCH(gemm_nt, a, b, c, m, n, k, accumulate);
}
template <class S>
void vadd(const S* x, const S* y, S* out, std::size_t n) {
  MTM_DISPATCH(vadd, x, y, out, n);
}
template <class S>
void vmul(const S* x, const S* y, S* out, std::size_t n) {
  MTM_DISPATCH(vmul, x, y, out, n);
}
template <class S>
void vscale(const S* x, S alpha, S* out, std::size_t n) {
  MTM_DISPATCH(vscale, x, alpha, out, n);
}
template <class S>
void vaxpy(S alpha, const S* x, S* y, std::size_t n) {
  MTM_DISPATCH(vaxpy, alpha, x, y, n);
}
template <class S>
S reduce_sum(const S* x, std::size_t n) {
  MTM_DISPATCH(reduce_sum, x, n);
}
template <class S>
S reduce_sqsum(const S* x, std::size_t n) {
  MTM_DISPATCH(reduce_sqsum, x, n);
}
template <class S>
void adamw_step(S* p, const S* g, S* m, S* v, std::size_t n, S lr, S beta1,
                S beta2, S eps, S wd, S bc1, S bc2) {
  MTM_DISPATCH(adamw_step, p, g, m, v, n, lr, beta1, beta2, eps, wd, bc1, bc2);
}

#undef MTM_DISPATCH

#define MTM_INSTANTIATE_DISPATCH(S)                                            \
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

MTM_INSTANTIATE_DISPATCH(float)
MTM_INSTANTIATE_DISPATCH(double)

}  // namespace mtm::kernels
