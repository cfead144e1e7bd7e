#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel arithmetic kernels behind the tensor ops. Every kernel has a
// scalar reference implementation; on x86 the float/double hot paths have AVX2
// variants selected at runtime. The two implementations are equivalence-tested
// against each other (see tests/test_kernels.cpp).
//
// Matrix arguments are dense row-major with no padding. Output is m x n with
// reduction length k; `accumulate` selects C += AB versus C = AB.

namespace mtm::kernels {

enum class Backend { Scalar, Avx2 };

// Active backend for all dispatched kernels. Defaults to the best supported
// one; MTM_KERNELS=scalar|avx2 in the environment overrides at startup.
Backend active_backend();
void set_backend(Backend b);  // throws std::runtime_error if unsupported
const char* backend_name(Backend b);
bool avx2_supported();

// C[m,n] = A[m,k] * B[k,n]
template <class S>
void gemm_nn(const S* a, const S* b, S* c, int m, int n, int k, bool accumulate);
// C[m,n] = A[k,m]^T * B[k,n]
template <class S>
void gemm_tn(const S* a, const S* b, S* c, int m, int n, int k, bool accumulate);
// C[m,n] = A[m,k] * B[n,k]^T
template <class S>
void gemm_nt(const S* a, const S* b, S* c, int m, int n, int k, bool accumulate);

template <class S> void vadd(const S* x, const S* y, S* out, std::size_t n);
template <class S> void vmul(const S* x, const S* y, S* out, std::size_t n);
template <class S> void vscale(const S* x, S alpha, S* out, std::size_t n);
template <class S> void vaxpy(S alpha, const S* x, S* y, std::size_t n);  // y += alpha*x
template <class S> S reduce_sum(const S* x, std::size_t n);
template <class S> S reduce_sqsum(const S* x, std::size_t n);

// One fused AdamW step over n parameters. bc1/bc2 are the bias corrections
// 1-beta1^t and 1-beta2^t. Decay is decoupled: p -= lr*wd*p.
template <class S>
void adamw_step(S* p, const S* g, S* m, S* v, std::size_t n, S lr, S beta1,
                S beta2, S eps, S wd, S bc1, S bc2);

// Scalar reference implementations, exposed for equivalence tests.
namespace scalar {
template <class S>
void gemm_nn(const S* a, const S* b, S* c, int m, int n, int k, bool accumulate);
template <class S>
void gemm_tn(const S* a, const S* b, S* c, int m, int n, int k, bool accumulate);
template <class S>
void gemm_nt(const S* a, const S* b, S* c, int m, int n, int k, bool accumulate);
template <class S> void vadd(const S* x, const S* y, S* out, std::size_t n);
template <class S> void vmul(const S* x, const S* y, S* out, std::size_t n);
template <class S> void vscale(const S* x, S alpha, S* out, std::size_t n);
template <class S> void vaxpy(S alpha, const S* x, S* y, std::size_t n);
template <class S> S reduce_sum(const S* x, std::size_t n);
template <class S> S reduce_sqsum(const S* x, std::size_t n);
template <class S>
void adamw_step(S* p, const S* g, S* m, S* v, std::size_t n, S lr, S beta1,
                S beta2, S eps, S wd, S bc1, S bc2);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define MTM_HAVE_AVX2_TU 1
namespace avx2 {
template <class S>
void gemm_nn(const S* a, const S* b, S* c, int m, int n, int k, bool accumulate);
template <class S>
void gemm_tn(const S* a, const S* b, S* c, int m, int n, int k, bool accumulate);
template <class S>
void gemm_nt(const S* a, const S* b, S* c, int m, int n, int k, bool accumulate);
template <class S> void vadd(const S* x, const S* y, S* out, std::size_t n);
template <class S> void vmul(const S* x, const S* y, S* out, std::size_t n);
template <class S> void vscale(const S* x, S alpha, S* out, std::size_t n);
template <class S> void vaxpy(S alpha, const S* x, S* y, std::size_t n);
template <class S> S reduce_sum(const S* x, std::size_t n);
template <class S> S reduce_sqsum(const S* x, std::size_t n);
template <class S>
void adamw_step(S* p, const S* g, S* m, S* v, std::size_t n, S lr, S beta1,
                S beta2, S eps, S wd, S bc1, S bc2);
}  // namespace avx2
#else
#define MTM_HAVE_AVX2_TU 0
#endif

}  // namespace mtm::kernels
