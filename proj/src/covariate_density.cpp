#include "shadowfit/covariate_density.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <cmath>
#include <stdexcept>

namespace shadowfit {

namespace {

XGrid gaussian_linear_grid(ConstVecRef u, const Vec& coef, double resid_var,
                           int points_per_dim) {
  if (coef.size() != u.size() + 1)
    throw std::invalid_argument("oracle density: conditional coefficient length mismatch");
  const double mean = coef[0] + coef.tail(u.size()).dot(u);
  const RawRule gh = gauss_hermite(points_per_dim);
  const double sd = std::sqrt(resid_var);
  XGrid g;
  const int du = static_cast<int>(u.size());
  g.points = Mat(gh.nodes.size(), du + 1);
  g.points.leftCols(du).rowwise() = u.transpose();
  g.points.col(du) = (mean + sd * gh.nodes.array()).matrix();
  g.weights = gh.weights;
  return g;
}

XGrid bernoulli_grid(ConstVecRef u, double b0, double b1) {
  if (u.size() != 1) throw std::invalid_argument("oracle density: bernoulli z|u expects du = 1");
  const double eta = b0 + b1 * u[0];
  const double p = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                              : std::exp(eta) / (1.0 + std::exp(eta));
  XGrid g;
  g.points = Mat(2, 2);
  g.points << u[0], 0.0, u[0], 1.0;
  g.weights = Vec(2);
  g.weights << 1.0 - p, p;
  return g;
}

}  // namespace

XGrid oracle_xgrid(const OracleDensity& density, int points_per_dim) {
  if (density.kind != OracleDensity::Kind::mvn_joint)
    throw std::invalid_argument("oracle_xgrid: joint rule requires an mvn_joint density");
  return mvn_grid(density.mean, density.cov, points_per_dim);
}

XGrid oracle_xgrid_at_u(const OracleDensity& density, ConstVecRef u, int points_per_dim) {
  switch (density.kind) {
    case OracleDensity::Kind::gaussian_linear_z_given_u:
      return gaussian_linear_grid(u, density.coef, density.resid_var, points_per_dim);
    case OracleDensity::Kind::bernoulli_logistic_z_given_u:
      return bernoulli_grid(u, density.b0, density.b1);
    default:
      throw std::invalid_argument("oracle_xgrid_at_u: density kind has no conditional rule");
  }
}

XGrid ParametricDensityFit::xgrid(int points_per_dim) const {
  if (family != ParametricFamily::multivariate_normal)
    throw std::invalid_argument("parametric xgrid: joint rule requires multivariate_normal");
  return mvn_grid(mean, cov, points_per_dim);
}

XGrid ParametricDensityFit::xgrid_at_u(ConstVecRef u, int) const {
  if (family != ParametricFamily::bernoulli_logistic_z_given_u)
    throw std::invalid_argument("parametric xgrid_at_u: needs the bernoulli z|u family");
  return bernoulli_grid(u, b0, b1);
}

namespace {

ParametricDensityFit fit_mvn(const Dataset& data) {
  const Mat X = data.covariate_matrix();
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  if (n <= d) throw std::invalid_argument("fit_covariate_density: too few rows");

  ParametricDensityFit out;
  out.family = ParametricFamily::multivariate_normal;
  out.mean = X.colwise().mean().transpose();
  Mat centered = X.rowwise() - out.mean.transpose();
  out.cov = centered.transpose() * centered / n;  // MLE scaling

  Eigen::LLT<Mat> llt(out.cov);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("fit_covariate_density: singular covariance estimate");
  const Mat cov_inv = llt.solve(Mat::Identity(d, d));

  // alpha = (mean, vech(cov)); the MLE influence of the moments is exact
  const int q = d + d * (d + 1) / 2;
  out.alpha_hat.resize(q);
  out.alpha_hat.head(d) = out.mean;
  out.phi = Mat(n, q);
  out.log_grad = Mat(n, q);

  int idx = d;
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) out.alpha_hat[idx++] = out.cov(a, b);

  for (int i = 0; i < n; ++i) {
    const Vec dev = centered.row(i).transpose();
    const Vec sdev = cov_inv * dev;
    out.phi.row(i).head(d) = dev.transpose();
    out.log_grad.row(i).head(d) = sdev.transpose();
    const Mat M = 0.5 * (sdev * sdev.transpose() - cov_inv);
    idx = d;
    for (int a = 0; a < d; ++a) {
      for (int b = a; b < d; ++b) {
        out.phi(i, idx) = dev[a] * dev[b] - out.cov(a, b);
        out.log_grad(i, idx) = (a == b) ? M(a, a) : 2.0 * M(a, b);
        ++idx;
      }
    }
  }
  return out;
}

ParametricDensityFit fit_bernoulli_z_given_u(const Dataset& data) {
  if (data.u_dim() != 1 || data.z_dim() != 1)
    throw std::invalid_argument("fit_covariate_density: bernoulli z|u expects du = dz = 1");
  const int n = data.N();
  for (int i = 0; i < n; ++i)
    if (data.z(i, 0) != 0.0 && data.z(i, 0) != 1.0)
      throw std::invalid_argument("fit_covariate_density: z must be binary for this family");

  // logistic regression of z on (1, u) by Newton scoring
  Vec alpha = Vec::Zero(2);
  for (int it = 0; it < 100; ++it) {
    Vec grad = Vec::Zero(2);
    Mat info = Mat::Zero(2, 2);
    for (int i = 0; i < n; ++i) {
      const double ui = data.u(i, 0);
      const double eta = alpha[0] + alpha[1] * ui;
      const double p = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                                  : std::exp(eta) / (1.0 + std::exp(eta));
      const double res = data.z(i, 0) - p;
      const double wv = p * (1.0 - p);
      grad[0] += res;
      grad[1] += res * ui;
      info(0, 0) += wv;
      info(0, 1) += wv * ui;
      info(1, 1) += wv * ui * ui;
    }
    info(1, 0) = info(0, 1);
    Eigen::LLT<Mat> llt(info);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("fit_covariate_density: singular information matrix");
    const Vec step = llt.solve(grad);
    alpha += step;
    if (step.cwiseAbs().maxCoeff() < 1e-12) break;
  }

  ParametricDensityFit out;
  out.family = ParametricFamily::bernoulli_logistic_z_given_u;
  out.alpha_hat = alpha;
  out.b0 = alpha[0];
  out.b1 = alpha[1];
  out.phi = Mat(n, 2);
  out.log_grad = Mat(n, 2);

  Mat info = Mat::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    const double ui = data.u(i, 0);
    const double eta = alpha[0] + alpha[1] * ui;
    const double p = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                                : std::exp(eta) / (1.0 + std::exp(eta));
    const double res = data.z(i, 0) - p;
    out.log_grad(i, 0) = res;
    out.log_grad(i, 1) = res * ui;
    const double wv = p * (1.0 - p);
    info(0, 0) += wv;
    info(0, 1) += wv * ui;
    info(1, 1) += wv * ui * ui;
  }
  info(1, 0) = info(0, 1);
  info /= n;
  Eigen::LLT<Mat> llt(info);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("fit_covariate_density: singular information matrix");
  out.phi = llt.solve(out.log_grad.transpose()).transpose();
  return out;
}

}  // namespace

ParametricDensityFit fit_covariate_density(const Dataset& data, ParametricFamily family) {
  switch (family) {
    case ParametricFamily::multivariate_normal:
      return fit_mvn(data);
    case ParametricFamily::bernoulli_logistic_z_given_u:
      return fit_bernoulli_z_given_u(data);
  }
  throw std::logic_error("unknown parametric family");
}

XGrid kde_xgrid(const Mat& X, const KernelSpec& spec, double h, int points_per_dim) {
  const int d = static_cast<int>(X.cols());
  if (d > 4) throw std::invalid_argument("kde_xgrid: dimension guard (d <= 4) exceeded");
  std::vector<RawRule> rules;
  rules.reserve(static_cast<std::size_t>(d));
  for (int c = 0; c < d; ++c) {
    const double lo = X.col(c).minCoeff() - h;
    const double hi = X.col(c).maxCoeff() + h;
    rules.push_back(trapezoid_rule(lo, hi, points_per_dim));
  }
  XGrid g = tensor_grid(rules);
  for (Eigen::Index q = 0; q < g.points.rows(); ++q)
    g.weights[q] *= kde(X, spec, h, g.points.row(q).transpose());
  const double total = g.weights.sum();
  if (!(total > 0.0)) throw std::runtime_error("kde_xgrid: estimated density vanishes");
  g.weights /= total;
  // drop zero-mass points so the density-rule preconditions hold
  std::vector<Eigen::Index> keep;
  for (Eigen::Index q = 0; q < g.weights.size(); ++q)
    if (g.weights[q] > 0.0) keep.push_back(q);
  XGrid out;
  out.points = Mat(static_cast<Eigen::Index>(keep.size()), d);
  out.weights = Vec(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.points.row(static_cast<Eigen::Index>(k)) = g.points.row(keep[k]);
    out.weights[static_cast<Eigen::Index>(k)] = g.weights[keep[k]];
  }
  return out;
}

}  // namespace shadowfit
