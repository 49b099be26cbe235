#include "shadowfit/quadrature.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace shadowfit {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double std_normal_pdf(double t) { return kInvSqrt2Pi * std::exp(-0.5 * t * t); }
}  // namespace

RawRule gauss_hermite(int n) {
  if (n < 1 || n > 64) throw std::invalid_argument("gauss_hermite: n out of range [1, 64]");

  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite family:
  // zero diagonal, off-diagonal sqrt(k).
  Vec diag = Vec::Zero(n);
  Vec sub(n > 1 ? n - 1 : 0);
  for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));

  Eigen::SelfAdjointEigenSolver<Mat> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("gauss_hermite: eigenvalue solve failed");

  RawRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights = es.eigenvectors().row(0).transpose().array().square();

  // Enforce the exact +/- symmetry of the rule.
  for (int j = 0; j < n / 2; ++j) {
    const int k = n - 1 - j;
    const double t = 0.5 * (rule.nodes[k] - rule.nodes[j]);
    rule.nodes[j] = -t;
    rule.nodes[k] = t;
    const double w = 0.5 * (rule.weights[j] + rule.weights[k]);
    rule.weights[j] = w;
    rule.weights[k] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  rule.weights /= rule.weights.sum();
  return rule;
}

YGrid y_grid_binary() {
  YGrid g;
  g.kind = YGridKind::discrete_support;
  g.nodes = Vec(2);
  g.nodes << 0.0, 1.0;
  g.weights = Vec::Ones(2);
  return g;
}

YGrid y_grid_affine(int n, double center, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("y_grid_affine: scale must be positive");
  const RawRule gh = gauss_hermite(n);
  YGrid g;
  g.kind = YGridKind::gauss_hermite_affine;
  g.center = center;
  g.scale = scale;
  g.nodes = (center + scale * gh.nodes.array()).matrix();
  g.weights = Vec(n);
  for (int j = 0; j < n; ++j)
    g.weights[j] = gh.weights[j] * scale / std_normal_pdf(gh.nodes[j]);
  return g;
}

YGrid y_grid(const OutcomeModel& model, const Dataset& data, int n,
             double envelope_scale) {
  if (model.support() == OutcomeSupport::binary01) return y_grid_binary();

  double sum = 0.0, sumsq = 0.0;
  int m = 0;
  for (int i = 0; i < data.N(); ++i) {
    if (!data.r[static_cast<std::size_t>(i)]) continue;
    sum += data.y[i];
    sumsq += data.y[i] * data.y[i];
    ++m;
  }
  if (m < 2) throw std::invalid_argument("y_grid: need at least two observed outcomes");
  const double mean = sum / m;
  const double var = (sumsq - m * mean * mean) / (m - 1);
  if (!(var > 0.0)) throw std::invalid_argument("y_grid: degenerate outcome spread");
  return y_grid_affine(n, mean, envelope_scale * std::sqrt(var));
}

double integrate_y(const YGrid& grid, const std::function<double(double)>& g) {
  double s = 0.0;
  for (int j = 0; j < grid.size(); ++j) {
    const double v = g(grid.nodes[j]);
    if (!std::isfinite(v)) throw std::runtime_error("integrate_y: non-finite integrand");
    s += grid.weights[j] * v;
  }
  return s;
}

Vec integrate_y(const YGrid& grid, const std::function<Vec(double)>& g) {
  Vec s;
  for (int j = 0; j < grid.size(); ++j) {
    Vec v = g(grid.nodes[j]);
    if (!v.allFinite()) throw std::runtime_error("integrate_y: non-finite integrand");
    if (s.size() == 0) s = Vec::Zero(v.size());
    s += grid.weights[j] * v;
  }
  return s;
}

XGrid tensor_grid(const std::vector<RawRule>& rules) {
  const int d = static_cast<int>(rules.size());
  if (d < 1) throw std::invalid_argument("tensor_grid: need at least one rule");
  if (d > 4) throw std::invalid_argument("tensor_grid: dimension guard (d <= 4) exceeded");

  Eigen::Index q = 1;
  for (const auto& r : rules) q *= r.nodes.size();

  XGrid g;
  g.points = Mat(q, d);
  g.weights = Vec::Ones(q);
  Eigen::Index repeat = 1;
  for (int c = 0; c < d; ++c) {
    const auto& r = rules[static_cast<std::size_t>(c)];
    const Eigen::Index nc = r.nodes.size();
    for (Eigen::Index i = 0; i < q; ++i) {
      const Eigen::Index idx = (i / repeat) % nc;
      g.points(i, c) = r.nodes[idx];
      g.weights[i] *= r.weights[idx];
    }
    repeat *= nc;
  }
  return g;
}

XGrid mvn_grid(const Vec& mean, const Mat& cov, int points_per_dim) {
  const int d = static_cast<int>(mean.size());
  if (cov.rows() != d || cov.cols() != d)
    throw std::invalid_argument("mvn_grid: mean/cov dimension mismatch");
  std::vector<RawRule> rules(static_cast<std::size_t>(d), gauss_hermite(points_per_dim));
  XGrid g = tensor_grid(rules);
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("mvn_grid: covariance not positive definite");
  const Mat L = llt.matrixL();
  g.points = (g.points * L.transpose()).rowwise() + mean.transpose();
  return g;
}

RawRule trapezoid_rule(double lo, double hi, int n) {
  if (n < 2 || !(hi > lo)) throw std::invalid_argument("trapezoid_rule: bad arguments");
  RawRule r;
  r.nodes = Vec::LinSpaced(n, lo, hi);
  const double h = (hi - lo) / (n - 1);
  r.weights = Vec::Constant(n, h);
  r.weights[0] = 0.5 * h;
  r.weights[n - 1] = 0.5 * h;
  return r;
}

}  // namespace shadowfit
