// AVX2+FMA backend. Compiled with -mavx2 -mfma only; the dispatcher never
// hands out these function pointers unless the CPU reports both features.

#include "shadowfit/simd/ops.hpp"

#include <immintrin.h>

#include <cmath>
#include <cstdint>

namespace shadowfit::simd {
namespace {

// exp on [-708, 709] with Cody-Waite reduction x = k*ln2 + r and a degree-13
// Taylor polynomial for exp(r), |r| <= ln2/2. Inputs below -708 flush to 0,
// inputs above 709 are clamped (exp(709) is still finite in double).
constexpr double kExpLo = -708.0;
constexpr double kExpHi = 709.0;

inline __m256d exp4(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
  const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);

  const __m256d underflow = _mm256_cmp_pd(x, _mm256_set1_pd(kExpLo), _CMP_LT_OQ);
  x = _mm256_min_pd(x, _mm256_set1_pd(kExpHi));
  x = _mm256_max_pd(x, _mm256_set1_pd(kExpLo));

  const __m256d k = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(k, ln2_hi, x);
  r = _mm256_fnmadd_pd(k, ln2_lo, r);

  // exp(r) = sum_{i<=13} r^i / i!
  __m256d p = _mm256_set1_pd(1.0 / 6227020800.0);
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 479001600.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  // scale by 2^k via exponent bits; |k| <= 1023 after the clamp above
  const __m128i k32 = _mm256_cvtpd_epi32(k);
  const __m256i k64 = _mm256_cvtepi32_epi64(k32);
  const __m256i bits =
      _mm256_slli_epi64(_mm256_add_epi64(k64, _mm256_set1_epi64x(1023)), 52);
  p = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));

  return _mm256_andnot_pd(underflow, p);
}

void exp_v_avx2(const double* src, double* dst, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(dst + i, exp4(_mm256_loadu_pd(src + i)));
  }
  if (i < n) {
    alignas(32) double buf[4] = {0, 0, 0, 0};
    for (std::size_t j = i; j < n; ++j) buf[j - i] = src[j];
    alignas(32) double out[4];
    _mm256_store_pd(out, exp4(_mm256_load_pd(buf)));
    for (std::size_t j = i; j < n; ++j) dst[j] = out[j - i];
  }
}

void logistic_v_avx2(const double* src, double* dst, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d signbit = _mm256_set1_pd(-0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(src + i);
    const __m256d ax = _mm256_andnot_pd(signbit, x);
    const __m256d e = exp4(_mm256_sub_pd(_mm256_setzero_pd(), ax));
    const __m256d inv = _mm256_div_pd(one, _mm256_add_pd(one, e));
    // x >= 0: 1/(1+e); x < 0: e/(1+e) = 1 - 1/(1+e)
    const __m256d neg = _mm256_cmp_pd(x, _mm256_setzero_pd(), _CMP_LT_OQ);
    _mm256_storeu_pd(dst + i, _mm256_blendv_pd(inv, _mm256_sub_pd(one, inv), neg));
  }
  for (; i < n; ++i) {
    const double x = src[i];
    if (x >= 0.0) {
      dst[i] = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      dst[i] = e / (1.0 + e);
    }
  }
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double dot3_avx2(const double* a, const double* b, const double* c, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d ab = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(ab, _mm256_loadu_pd(c + i), acc);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s += a[i] * b[i] * c[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops ops{"avx2", exp_v_avx2, logistic_v_avx2,
                       dot_avx2, dot3_avx2, axpy_avx2};
  return ops;
}

}  // namespace shadowfit::simd
