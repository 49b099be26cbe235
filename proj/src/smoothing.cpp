#include "shadowfit/smoothing.hpp"

#include <cmath>
#include <stdexcept>

namespace shadowfit {

double kernel_eval(const KernelSpec& spec, double v) {
  switch (spec.shape) {
    case KernelShape::epanechnikov:
      return std::abs(v) <= 1.0 ? 0.75 * (1.0 - v * v) : 0.0;
  }
  throw std::logic_error("unknown kernel shape");
}

double product_kernel(const KernelSpec& spec, ConstVecRef v, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("product_kernel: h must be positive");
  const int d = static_cast<int>(v.size());
  double k = 1.0;
  for (int j = 0; j < d; ++j) {
    k *= kernel_eval(spec, v[j] / h);
    if (k == 0.0) return 0.0;
  }
  return k / std::pow(h, d);
}

double bandwidth(const BandwidthRule& rule, int n, int d) {
  (void)d;
  if (n < 2) throw std::invalid_argument("bandwidth: need n >= 2");
  double h;
  switch (rule.kind) {
    case BandwidthKind::c_n_third:
      h = rule.constant * std::pow(static_cast<double>(n), -1.0 / 3.0);
      break;
    case BandwidthKind::c_n_two_sevenths:
      h = rule.constant * std::pow(static_cast<double>(n), -2.0 / 7.0);
      break;
    case BandwidthKind::explicit_h:
      h = rule.constant;
      break;
    default:
      throw std::logic_error("unknown bandwidth rule");
  }
  if (!(h > 0.0)) throw std::invalid_argument("bandwidth: nonpositive result");
  return h;
}

double kde(const Mat& X, const KernelSpec& spec, double h, ConstVecRef x0) {
  if (X.cols() != x0.size()) throw std::invalid_argument("kde: dimension mismatch");
  const Eigen::Index n = X.rows();
  if (n == 0) throw std::invalid_argument("kde: empty sample");
  double s = 0.0;
  Vec diff(x0.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    diff = X.row(i).transpose() - x0;
    s += product_kernel(spec, diff, h);
  }
  return s / static_cast<double>(n);
}

}  // namespace shadowfit
