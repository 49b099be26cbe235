#pragma once

#include <cstddef>
#include <string_view>

// Runtime-dispatched arithmetic kernels for the data-parallel inner loops
// (batched exp/logistic evaluation and weighted reductions used by the
// integral-equation assembly). Every backend must produce results that agree
// with the scalar reference to a few ulp; the unit tests enforce this.
//
// Backend selection happens once, at first use: the best instruction set the
// CPU supports wins, unless the environment variable SHADOWFIT_SIMD names a
// backend explicitly ("scalar" or "avx2").

namespace shadowfit::simd {

struct Ops {
  const char* name;
  // dst[i] = exp(src[i])
  void (*exp_v)(const double* src, double* dst, std::size_t n);
  // dst[i] = 1 / (1 + exp(-src[i]))
  void (*logistic_v)(const double* src, double* dst, std::size_t n);
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum_i a[i] * b[i] * c[i]
  double (*dot3)(const double* a, const double* b, const double* c, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

// Active backend (selected at first call, stable for the process lifetime
// unless force_backend is used).
const Ops& ops();

// Scalar reference implementation, always available.
const Ops& scalar_ops();

// Force a specific backend ("scalar", "avx2"). Returns false if unknown or
// unsupported on this CPU. Intended for equivalence tests.
bool force_backend(std::string_view name);

// Names of all backends usable on this CPU.
const char* const* available_backends(std::size_t* count);

}  // namespace shadowfit::simd
