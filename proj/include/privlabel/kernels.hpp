#pragma once

#include <cstddef>

namespace privlabel::kernels {

// Row-major dense views. The encoder keeps every activation and parameter
// block in flat std::vector<double> storage and hands these views around.
struct ConstMat {
  const double* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  const double& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  const double* row(std::size_t r) const { return data + r * cols; }
};

struct Mat {
  double* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  double& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double* row(std::size_t r) const { return data + r * cols; }
  operator ConstMat() const { return {data, rows, cols}; }
};

enum class Exec { kSerial, kParallel };

// All three compute C (+)= op(A) op(B); `accumulate = false` overwrites C.
// Shapes are checked with assertions only.
namespace serial {
// C[m,n] = A[m,k] B[k,n]
void gemm(ConstMat a, ConstMat b, Mat c, bool accumulate);
// C[m,n] = A[m,k] B[n,k]^T
void gemm_nt(ConstMat a, ConstMat b, Mat c, bool accumulate);
// C[k,n] = A[m,k]^T B[m,n]
void gemm_tn(ConstMat a, ConstMat b, Mat c, bool accumulate);
}  // namespace serial

// OpenMP versions parallelize over output rows. Each output element is
// reduced in the same order as the serial kernel, so results are bitwise
// identical to serial::*.
namespace omp {
void gemm(ConstMat a, ConstMat b, Mat c, bool accumulate);
void gemm_nt(ConstMat a, ConstMat b, Mat c, bool accumulate);
void gemm_tn(ConstMat a, ConstMat b, Mat c, bool accumulate);
}  // namespace omp

inline void gemm(Exec e, ConstMat a, ConstMat b, Mat c, bool accumulate) {
  e == Exec::kParallel ? omp::gemm(a, b, c, accumulate) : serial::gemm(a, b, c, accumulate);
}
inline void gemm_nt(Exec e, ConstMat a, ConstMat b, Mat c, bool accumulate) {
  e == Exec::kParallel ? omp::gemm_nt(a, b, c, accumulate) : serial::gemm_nt(a, b, c, accumulate);
}
inline void gemm_tn(Exec e, ConstMat a, ConstMat b, Mat c, bool accumulate) {
  e == Exec::kParallel ? omp::gemm_tn(a, b, c, accumulate) : serial::gemm_tn(a, b, c, accumulate);
}

// Sum of `count` equally sized buffers into `out`, buffer 0 first. The
// parallel version splits the element range, keeping the per-element
// summation order fixed.
namespace serial {
void sum_buffers(const double* buffers, std::size_t count, std::size_t length, double* out);
}
namespace omp {
void sum_buffers(const double* buffers, std::size_t count, std::size_t length, double* out);
}

int max_threads();

}  // namespace privlabel::kernels
