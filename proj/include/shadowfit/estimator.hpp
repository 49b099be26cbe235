#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "shadowfit/covariate_density.hpp"
#include "shadowfit/fredholm.hpp"

// Working-model efficient score, estimating-equation root finding, the
// estimator variants (empirical, kernel-density, parametric, oracle), the
// complete-case baseline, and the sandwich variance with its operator-level
// correction term.

namespace shadowfit {

enum class Variant { empirical, nonparametric_kde, parametric_fx, oracle };
enum class Assumption { special, general };
enum class VarianceMethod { none, sandwich_plugin, bootstrap };

// How mechanism covariates u are handled under the general assumption:
// automatic inspects the number of distinct u rows.
enum class UMode { automatic, continuous, discrete };

struct SolverOptions {
  double tol = 1e-8;
  int max_iter = 100;
  double fd_step = 1e-5;
};

struct FitConfig {
  OutcomeModel model;
  MechanismModel mech;
  Variant variant = Variant::empirical;
  Assumption assumption = Assumption::special;
  int grid_size = 15;
  double envelope_scale = 1.5;
  KernelSpec kernel{};
  BandwidthRule bandwidth_rule = BandwidthRule::cn_third(1.5);
  SolverOptions solver{};
  VarianceMethod variance = VarianceMethod::sandwich_plugin;
  int bootstrap_samples = 200;
  std::uint64_t bootstrap_seed = 20260801;
  OracleDensity oracle_density{};
  ParametricFamily parametric_family = ParametricFamily::multivariate_normal;
  int xgrid_points = 15;  // per dimension, density variants
  UMode u_mode = UMode::automatic;
};

struct FitResult {
  Vec beta_hat;
  Mat covariance;  // Ahat^{-1} Bhat Ahat^{-T} / N
  Vec std_errors;
  Mat A_hat;
  Mat B_hat;
  int iterations = 0;
  bool converged = false;
  double residual_norm = 0.0;
  int n_used = 0;
  std::string message;
};

// Per-observation pieces entering the sandwich.
struct SandwichParts {
  Mat score_terms;  // N x p, S*_eff rows at beta
  Mat h_terms;      // N x p, correction rows (zero for the oracle variant)
  Mat a_matrix;     // p x p
  Mat b_matrix;     // p x p
};

// Maximum likelihood on the completely observed rows; the default starting
// point for the estimating-equation solve and the baseline comparator.
ParamVector complete_case_fit(const Dataset& data, const OutcomeModel& model);

// Inverse-information covariance of the complete-case baseline.
Mat complete_case_covariance(const Dataset& data, const OutcomeModel& model,
                             const ParamVector& beta);

// N^{-1} sum_i S*_eff at beta, re-solving the integral equation(s) at beta.
Vec estimating_function(const Dataset& data, const FitConfig& config, const ParamVector& beta);

// All N score rows at beta.
Mat score_matrix(const Dataset& data, const FitConfig& config, const ParamVector& beta);

// Score of a single observation given an already-solved b.
Vec efficient_score(const OutcomeModel& model, const MechanismModel& mech,
                    const ParamVector& beta, const BSolution& b, const Observation& obs);

FitResult fit(const Dataset& data, const FitConfig& config);

// Score and correction rows plus the sandwich matrices at beta (normally the
// fitted root).
SandwichParts sandwich_parts(const Dataset& data, const FitConfig& config,
                             const ParamVector& beta);

// Nonparametric bootstrap over rows; refits every resample.
Mat bootstrap_variance(const Dataset& data, const FitConfig& config, int B,
                       std::uint64_t seed);

}  // namespace shadowfit
