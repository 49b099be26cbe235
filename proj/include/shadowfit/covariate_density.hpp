#pragma once

#include "shadowfit/model.hpp"
#include "shadowfit/quadrature.hpp"
#include "shadowfit/smoothing.hpp"

// Covariate-law plug-ins for the estimator variants that integrate against a
// density instead of averaging over the sample: the infeasible oracle (true
// law), the parametric fit, and the kernel density estimate.

namespace shadowfit {

// Closed-form covariate law for the oracle variant.
struct OracleDensity {
  enum class Kind {
    none,
    mvn_joint,                    // x ~ N(mean, cov), marginal-mechanism setting
    gaussian_linear_z_given_u,    // z | u ~ N(coef' (1,u), resid_var), dz = 1
    bernoulli_logistic_z_given_u  // pr(z=1 | u) = logistic(b0 + b1 u), du = dz = 1
  };
  Kind kind = Kind::none;
  Vec mean;
  Mat cov;
  Vec coef;
  double resid_var = 1.0;
  double b0 = 0.0, b1 = 0.0;
};

// x-rule over the joint covariate law (mvn_joint only).
XGrid oracle_xgrid(const OracleDensity& density, int points_per_dim);

// x-rule over z | u at a fixed u; points are full covariates (u, z).
XGrid oracle_xgrid_at_u(const OracleDensity& density, ConstVecRef u, int points_per_dim);

enum class ParametricFamily { multivariate_normal, bernoulli_logistic_z_given_u };

// MLE of the covariate law on the fully observed covariates, together with
// the pieces the parametric-variant variance needs: per-observation influence
// phi_i and the alpha-gradient of the log density.
struct ParametricDensityFit {
  ParametricFamily family = ParametricFamily::multivariate_normal;
  Vec alpha_hat;
  Mat phi;       // N x q
  Mat log_grad;  // N x q

  // fitted law
  Vec mean;
  Mat cov;
  double b0 = 0.0, b1 = 0.0;

  XGrid xgrid(int points_per_dim) const;
  XGrid xgrid_at_u(ConstVecRef u, int points_per_dim) const;
};

ParametricDensityFit fit_covariate_density(const Dataset& data, ParametricFamily family);

// x-rule for the nonparametric variant: tensor trapezoid grid over the sample
// envelope (padded by h), weighted by the kernel density estimate and
// renormalized.
XGrid kde_xgrid(const Mat& X, const KernelSpec& spec, double h, int points_per_dim);

}  // namespace shadowfit
