#pragma once

#include "shadowfit/model.hpp"

// Kernel functions, bandwidth rules and kernel density estimation for the
// kernel-weighted integral equation and the nonparametric density variant.

namespace shadowfit {

enum class KernelShape { epanechnikov };

struct KernelSpec {
  KernelShape shape = KernelShape::epanechnikov;
  int order_m = 2;
};

// K(v); Epanechnikov: 0.75 (1 - v^2) on [-1, 1], else 0.
double kernel_eval(const KernelSpec& spec, double v);

// Product kernel K_h(v) = h^{-d} prod_j K(v_j / h).
double product_kernel(const KernelSpec& spec, ConstVecRef v, double h);

enum class BandwidthKind { c_n_third, c_n_two_sevenths, explicit_h };

struct BandwidthRule {
  BandwidthKind kind = BandwidthKind::c_n_third;
  double constant = 1.5;  // C for the rate rules, h itself for explicit_h

  static BandwidthRule cn_third(double c) { return {BandwidthKind::c_n_third, c}; }
  static BandwidthRule cn_two_sevenths(double c) {
    return {BandwidthKind::c_n_two_sevenths, c};
  }
  static BandwidthRule fixed(double h) { return {BandwidthKind::explicit_h, h}; }
};

double bandwidth(const BandwidthRule& rule, int n, int d);

// f_hat(x0) = N^{-1} sum_i K_h(x_i - x0) over the rows of X.
double kde(const Mat& X, const KernelSpec& spec, double h, ConstVecRef x0);

}  // namespace shadowfit
