#pragma once

#include <Eigen/LU>

#include "shadowfit/quadrature.hpp"
#include "shadowfit/smoothing.hpp"

// Discretized Fredholm integral equations of the second kind,
//
//     b(y) u1(y) + int b(t) u2(t, y) dt = v(y),
//
// collocated at the quadrature nodes of a YGrid (Nystrom). The ingredients
// u1, u2, v are weighted averages over covariate sources: data rows for the
// empirical equation, kernel-weighted rows for the conditional version,
// stratum rows for discrete mechanism covariates, and density-rule points for
// the oracle / parametric / KDE variants. The unknown b is vector valued (one
// column per regression coefficient) and every column shares one operator.

namespace shadowfit {

struct FredholmSystem {
  YGrid grid;
  Vec pi_nodes;  // working mechanism at the nodes
  Vec diag;      // u1 at the nodes, strictly positive
  Mat kernel;    // (j, k) = w_k * u2(t_k, t_j)
  Mat rhs;       // m x p, v at the nodes
  double weight_total = 0.0;

  int size() const { return static_cast<int>(diag.size()); }
  int n_rhs() const { return static_cast<int>(rhs.cols()); }
};

struct BSolution {
  YGrid grid;
  Mat values;  // m x p
  double residual_sup_norm = 0.0;
};

// pi*(t_j, u) for every grid node.
Vec mechanism_at_nodes(const MechanismModel& mech, const YGrid& grid, ConstVecRef u);

// Core accumulation: sources are the rows of X with nonnegative weights.
// Throws if a source's conditional observation probability 1 - int f pi* dt
// falls below 1e-10 (the offending row index is reported) or if all weights
// vanish.
FredholmSystem assemble_weighted(const OutcomeModel& model, const ParamVector& beta,
                                 const YGrid& grid, const Vec& pi_nodes,
                                 const Mat& X, const Vec& weights);

// Empirical equation: every data row contributes with weight 1/N.
FredholmSystem assemble_empirical(const Dataset& data, const OutcomeModel& model,
                                  const MechanismModel& mech, const ParamVector& beta,
                                  const YGrid& grid);

// Kernel-weighted equation at a target u0: row i contributes with weight
// K_h(u_i - u0)/N and the outcome model is evaluated at (u0, z_i).
FredholmSystem assemble_general(const Dataset& data, const OutcomeModel& model,
                                const MechanismModel& mech, const ParamVector& beta,
                                const YGrid& grid, ConstVecRef u0,
                                const KernelSpec& kernel, double bandwidth);

// Stratified equation for discrete u: rows with u_i == u_stratum contribute
// with weight 1/N_k and the model is evaluated at (u_stratum, z_i).
FredholmSystem assemble_stratified(const Dataset& data, const OutcomeModel& model,
                                   const MechanismModel& mech, const ParamVector& beta,
                                   const YGrid& grid, ConstVecRef u_stratum);

// Mixed discrete/continuous u: stratify on the leading discrete columns and
// kernel-weight the remaining continuous ones around u_cont0.
FredholmSystem assemble_stratified_mixed(const Dataset& data, const OutcomeModel& model,
                                         const MechanismModel& mech, const ParamVector& beta,
                                         const YGrid& grid, ConstVecRef u_disc,
                                         ConstVecRef u_cont0, const KernelSpec& kernel,
                                         double bandwidth);

// Density-rule equation: xgrid points are full covariate vectors (u, z) with
// probability weights representing the integral against the covariate law;
// mech_u is the mechanism argument (empty under the marginal assumption).
FredholmSystem assemble_density(const XGrid& xgrid, const OutcomeModel& model,
                                const MechanismModel& mech, const ParamVector& beta,
                                const YGrid& grid, ConstVecRef mech_u);

// One LU factorization serves the system solve and any number of extra
// right-hand sides (the variance correction reuses it per observation).
class FredholmSolver {
 public:
  explicit FredholmSolver(FredholmSystem sys);

  const FredholmSystem& system() const { return sys_; }

  // reciprocal condition estimate of the row-equilibrated system
  double rcond() const { return rcond_; }

  Mat solve(const Mat& rhs) const;
  BSolution solve_b() const;

  // operator application: diag .* g + kernel * g
  Mat apply(const Mat& g) const;

 private:
  FredholmSystem sys_;
  Eigen::PartialPivLU<Mat> lu_;
  double rcond_ = 0.0;
};

BSolution solve_system(const FredholmSystem& sys);

// b at an arbitrary outcome value: exact lookup on binary grids, piecewise
// linear in between nodes otherwise, constant beyond the end nodes.
Vec interpolate_b(const BSolution& b, double y);

// Operator ingredients of a single source, shared by the efficient score and
// the sandwich correction.
struct SourceEval {
  Vec frow;         // f(t_j, x)
  Vec gcoef;        // df/deta at the nodes; the beta-gradient is gcoef x (1, x)
  double int_f_pi;  // sum_j w_j f_j pi_j
  double int_g_pi;  // sum_j w_j gcoef_j pi_j
  double denom;     // 1 - int_f_pi
};

void eval_source(const OutcomeModel& model, const ParamVector& beta, ConstVecRef x,
                 const YGrid& grid, const Vec& pi_nodes, SourceEval& out);

}  // namespace shadowfit
