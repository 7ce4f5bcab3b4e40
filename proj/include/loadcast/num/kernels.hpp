#pragma once

#include <cstddef>

// Dense kernels backing the autodiff engine. Every kernel exists twice with
// an identical contract: loadcast::num::kernels uses OpenMP on large inputs,
// loadcast::num::serial is the plain reference kept for testing and for the
// kernel benchmark. Per output element the two perform the same operations in
// the same order, so their results are required to be bit-identical; the
// kernel test suite asserts exactly that.
//
// All matrices are row-major double buffers. `_acc` kernels accumulate into
// their output instead of assigning, which is what backward passes need.

namespace loadcast::num {

#define LOADCAST_DECLARE_KERNELS                                               \
  /* c[m x n] = a[m x k] * b[k x n] */                                         \
  void mm_nn(double* c, const double* a, const double* b, std::size_t m,       \
             std::size_t k, std::size_t n);                                    \
  /* c[m x k] += a[m x n] * b[k x n]^T */                                      \
  void mm_nt_acc(double* c, const double* a, const double* b, std::size_t m,   \
                 std::size_t n, std::size_t k);                                \
  /* c[k x n] += a[m x k]^T * b[m x n] */                                      \
  void mm_tn_acc(double* c, const double* a, const double* b, std::size_t m,   \
                 std::size_t k, std::size_t n);                                \
  /* per-row softmax with max subtraction; y and x are [m x n] */              \
  void softmax_rows(double* y, const double* x, std::size_t m,                 \
                    std::size_t n);                                            \
  /* dx[m x n] += y * (dy - sum(dy * y)) per row */                            \
  void softmax_rows_bwd_acc(double* dx, const double* y, const double* dy,     \
                            std::size_t m, std::size_t n);                     \
  /* y = gain * xhat + bias; xhat = (x - mean) * invstd per row.               \
     xhat[m x n] and invstd[m] are written for the backward pass. */           \
  void layer_norm_fwd(double* y, double* xhat, double* invstd,                 \
                      const double* x, const double* gain, const double* bias, \
                      std::size_t m, std::size_t n, double eps);               \
  /* accumulates input/gain/bias gradients for layer_norm_fwd */               \
  void layer_norm_bwd_acc(double* dx, double* dgain, double* dbias,            \
                          const double* dy, const double* xhat,                \
                          const double* invstd, const double* gain,            \
                          std::size_t m, std::size_t n);                       \
  void relu_fwd(double* y, const double* x, std::size_t size);                 \
  void relu_bwd_acc(double* dx, const double* x, const double* dy,             \
                    std::size_t size);

namespace kernels {
LOADCAST_DECLARE_KERNELS
}

namespace serial {
LOADCAST_DECLARE_KERNELS
}

#undef LOADCAST_DECLARE_KERNELS

}  // namespace loadcast::num
