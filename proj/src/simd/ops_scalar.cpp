#include "shadowfit/simd/ops.hpp"

#include <cmath>

namespace shadowfit::simd {
namespace {

void exp_v_scalar(const double* src, double* dst, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = std::exp(src[i]);
}

void logistic_v_scalar(const double* src, double* dst, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double x = src[i];
    if (x >= 0.0) {
      dst[i] = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      dst[i] = e / (1.0 + e);
    }
  }
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double dot3_scalar(const double* a, const double* b, const double* c, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i] * c[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops{"scalar", exp_v_scalar, logistic_v_scalar,
                       dot_scalar, dot3_scalar, axpy_scalar};
  return ops;
}

}  // namespace shadowfit::simd
