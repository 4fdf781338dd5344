#include <cassert>

#include "privlabel/kernels.hpp"

namespace privlabel::kernels::serial {

void gemm(ConstMat a, ConstMat b, Mat c, bool accumulate) {
  assert(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
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
  for (std::size_t i = 0; i < a.rows; ++i) {
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
  if (!accumulate) {
    for (std::size_t i = 0; i < c.rows * c.cols; ++i) c.data[i] = 0.0;
  }
  for (std::size_t r = 0; r < a.cols; ++r) {
    double* crow = c.row(r);
    for (std::size_t m = 0; m < a.rows; ++m) {
      const double av = a(m, r);
      if (av == 0.0) continue;
      const double* brow = b.row(m);
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
    }
  }
}

void sum_buffers(const double* buffers, std::size_t count, std::size_t length, double* out) {
  for (std::size_t i = 0; i < length; ++i) {
    double s = 0.0;
    for (std::size_t b = 0; b < count; ++b) s += buffers[b * length + i];
    out[i] = s;
  }
}

}  // namespace privlabel::kernels::serial
