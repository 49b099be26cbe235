#pragma once

#include <functional>
#include <vector>

#include "shadowfit/model.hpp"

// Quadrature over the outcome variable and over covariate space.
// Continuous outcomes use a Gauss-Hermite rule mapped through an affine
// envelope; binary outcomes use the exact two-point counting-measure sum.

namespace shadowfit {

struct RawRule {
  Vec nodes;
  Vec weights;
};

// n-point Gauss-Hermite rule normalized against the standard normal density:
// sum_j w_j g(t_j) ~ E[g(T)], T ~ N(0,1); weights sum to one. 1 <= n <= 64.
RawRule gauss_hermite(int n);

enum class YGridKind { gauss_hermite_affine, discrete_support };

// Shared grid for all integrals over the outcome. For the affine kind the
// stored weights are plain Lebesgue weights w_j = gh_w_j * scale / phi(t_j),
// so sum_j w_j g(node_j) ~ integral of g for integrands that decay inside the
// N(center, scale^2) envelope. For binary support the weights are the
// counting measure (1, 1) on nodes (0, 1).
struct YGrid {
  YGridKind kind = YGridKind::discrete_support;
  Vec nodes;
  Vec weights;
  double center = 0.0;
  double scale = 1.0;

  int size() const { return static_cast<int>(nodes.size()); }
};

YGrid y_grid_binary();
YGrid y_grid_affine(int n, double center, double scale);

// Grid placement from data: binary support -> two-point grid; real line ->
// affine Gauss-Hermite centered at the observed-outcome mean with
// scale = envelope_scale * observed sd. Throws if fewer than two outcomes are
// observed or the observed spread is degenerate.
YGrid y_grid(const OutcomeModel& model, const Dataset& data, int n,
             double envelope_scale = 1.5);

double integrate_y(const YGrid& grid, const std::function<double(double)>& g);
Vec integrate_y(const YGrid& grid, const std::function<Vec(double)>& g);

// Covariate-space rule; weights are probability masses for integrals against
// a covariate density (they sum to ~1).
struct XGrid {
  Mat points;  // Q x d
  Vec weights; // Q
};

// Cartesian product of 1-d rules; guards against dimension blow-up (d <= 4).
XGrid tensor_grid(const std::vector<RawRule>& rules);

// Tensor Gauss-Hermite rule mapped to N(mean, cov) via Cholesky.
XGrid mvn_grid(const Vec& mean, const Mat& cov, int points_per_dim);

// Trapezoid rule on [lo, hi] with n points; weights are Lebesgue.
RawRule trapezoid_rule(double lo, double hi, int n);

}  // namespace shadowfit
