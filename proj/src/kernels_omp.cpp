#include <omp.h>

#include <cassert>
#include <cstdint>

#include "privlabel/kernels.hpp"

namespace privlabel::kernels {

int max_threads() { return omp_get_max_threads(); }

namespace omp {

void gemm(ConstMat a, ConstMat b, Mat c, bool accumulate) {
  assert(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols);
  const auto rows = static_cast<std::int64_t>(a.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    double* crow = c.row(i);
    if (!accumulate) {
      for (std::size_t j = 0; j < c.cols; ++j) crow[j] = 0.0;
    }
    const double* arow = a.row(i);
    for (std::size_t p = 0; p < a.cols; ++p) {
      const double av = arow[p];
      const double* brow = b.row(p);
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(ConstMat a, ConstMat b, Mat c, bool accumulate) {
  assert(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows);
  const auto rows = static_cast<std::int64_t>(a.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* brow = b.row(j);
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols; ++p) s += arow[p] * brow[p];
      crow[j] = accumulate ? crow[j] + s : s;
    }
  }
}

void gemm_tn(ConstMat a, ConstMat b, Mat c, bool accumulate) {
  assert(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols);
  // Output row r only reads column r of A, so rows are independent.
  const auto rows = static_cast<std::int64_t>(a.cols);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    double* crow = c.row(r);
    if (!accumulate) {
      for (std::size_t j = 0; j < c.cols; ++j) crow[j] = 0.0;
    }
    for (std::size_t m = 0; m < a.rows; ++m) {
      const double av = a(m, r);
      if (av == 0.0) continue;
      const double* brow = b.row(m);
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
    }
  }
}

void sum_buffers(const double* buffers, std::size_t count, std::size_t length, double* out) {
  const auto n = static_cast<std::int64_t>(length);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t b = 0; b < count; ++b) s += buffers[b * length + i];
    out[i] = s;
  }
}

}  // namespace omp
}  // namespace privlabel::kernels
