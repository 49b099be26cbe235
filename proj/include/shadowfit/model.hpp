#pragma once

#include <Eigen/Core>

#include <functional>
#include <vector>

// Outcome models, working missingness-mechanism models, and the observation
// containers. Everything downstream pulls conditional densities, their
// beta-gradients and mechanism probabilities from here.

namespace shadowfit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using ConstVecRef = Eigen::Ref<const Eigen::VectorXd>;

// Regression coefficients, intercept first.
using ParamVector = Eigen::VectorXd;

enum class OutcomeFamily { linear_gaussian, logistic_binary };
enum class OutcomeSupport { real_line, binary01 };

struct OutcomeModel {
  OutcomeFamily family = OutcomeFamily::linear_gaussian;
  int covariate_dim = 1;
  double sigma = 1.0;  // residual sd for linear_gaussian, held fixed

  OutcomeSupport support() const {
    return family == OutcomeFamily::linear_gaussian ? OutcomeSupport::real_line
                                                    : OutcomeSupport::binary01;
  }
  int n_params() const { return covariate_dim + 1; }
  void validate() const;
};

// eta = beta[0] + beta[1:]' x
double linear_predictor(const ParamVector& beta, ConstVecRef x);

// f(y | x; beta)
double outcome_density(const OutcomeModel& model, const ParamVector& beta,
                       double y, ConstVecRef x);

// d f(y | x; beta) / d beta, length p
Vec outcome_density_grad(const OutcomeModel& model, const ParamVector& beta,
                         double y, ConstVecRef x);

// d log f / d beta = grad / density, computed analytically
Vec outcome_score(const OutcomeModel& model, const ParamVector& beta,
                  double y, ConstVecRef x);

// logistic(eta) for a batch of linear predictors (SIMD-backed)
Vec logistic_vec(const Vec& eta);

// Working missingness model pi*(y, u). Never estimated; an arbitrary
// (possibly misspecified) choice keeps the estimator consistent.
enum class MechanismForm { logistic_in_y, logistic_in_y_u, user_table };

struct MechanismModel {
  MechanismForm form = MechanismForm::logistic_in_y;
  double c0 = 0.0;
  double c1 = 0.0;
  Vec c_u;
  double delta_clip = 1e-6;
  // user_table: arbitrary user-supplied (y, u) -> probability
  std::function<double(double, ConstVecRef)> table;

  static MechanismModel logistic_y(double c0, double c1, double clip = 1e-6);
  static MechanismModel logistic_yu(double c0, double c1, Vec cu, double clip = 1e-6);
  static MechanismModel tabulated(std::function<double(double, ConstVecRef)> fn,
                                  double clip = 1e-6);

  // clipped into (delta_clip, 1 - delta_clip)
  double prob(double y, ConstVecRef u) const;
  double prob(double y) const { return prob(y, Vec()); }
  void validate() const;
};

struct Observation {
  bool r = false;
  double y = 0.0;  // meaningful only when r == true
  Vec u;           // mechanism covariates (possibly empty)
  Vec z;           // shadow covariates (never empty)
};

// Column-oriented sample of (r, r*y, u, z).
struct Dataset {
  std::vector<std::uint8_t> r;
  Vec y;  // NaN where r == 0
  Mat u;  // N x du (du may be 0)
  Mat z;  // N x dz (dz >= 1)

  int N() const { return static_cast<int>(r.size()); }
  int n_observed() const;
  int u_dim() const { return static_cast<int>(u.cols()); }
  int z_dim() const { return static_cast<int>(z.cols()); }
  int x_dim() const { return u_dim() + z_dim(); }

  Observation row(int i) const;
  Vec x_row(int i) const;       // (u_i, z_i)
  Mat covariate_matrix() const; // N x (du + dz), u columns first

  void validate() const;  // throws std::invalid_argument on violations
};

}  // namespace shadowfit
