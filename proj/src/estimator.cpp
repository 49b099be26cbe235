#include "shadowfit/estimator.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "shadowfit/parallel.hpp"
#include "shadowfit/rng.hpp"

namespace shadowfit {

namespace {

// ---------------------------------------------------------------------------
// complete-case baselines

Vec cc_linear(const Dataset& data, const OutcomeModel& model) {
  const int p = model.n_params();
  const int n1 = data.n_observed();
  Mat A(n1, p);
  Vec yy(n1);
  int k = 0;
  for (int i = 0; i < data.N(); ++i) {
    if (!data.r[static_cast<std::size_t>(i)]) continue;
    A(k, 0) = 1.0;
    A.row(k).tail(p - 1) = data.x_row(i).transpose();
    yy[k] = data.y[i];
    ++k;
  }
  Eigen::ColPivHouseholderQR<Mat> qr(A);
  if (qr.rank() < p)
    throw std::runtime_error("complete_case_fit: rank-deficient design");
  return qr.solve(yy);
}

Vec cc_logistic(const Dataset& data, const OutcomeModel& model) {
  const int p = model.n_params();
  const int n1 = data.n_observed();
  Mat A(n1, p);
  Vec yy(n1);
  int k = 0;
  for (int i = 0; i < data.N(); ++i) {
    if (!data.r[static_cast<std::size_t>(i)]) continue;
    A(k, 0) = 1.0;
    A.row(k).tail(p - 1) = data.x_row(i).transpose();
    yy[k] = data.y[i];
    ++k;
  }

  Vec beta = Vec::Zero(p);
  for (int it = 0; it < 100; ++it) {
    Vec eta = A * beta;
    if (eta.cwiseAbs().maxCoeff() > 36.0)
      throw std::runtime_error("complete_case_fit: separation in logistic fit");
    Vec pvec = logistic_vec(eta);
    Vec grad = A.transpose() * (yy - pvec);
    Mat H = A.transpose() * pvec.cwiseProduct((1.0 - pvec.array()).matrix()).asDiagonal() * A;
    Eigen::FullPivLU<Mat> lu(H);
    if (!lu.isInvertible())
      throw std::runtime_error("complete_case_fit: singular information (separation?)");
    Vec step = lu.solve(grad);
    beta += step;
    if (step.cwiseAbs().maxCoeff() < 1e-12) return beta;
  }
  throw std::runtime_error("complete_case_fit: IRLS did not converge");
}

// ---------------------------------------------------------------------------
// score evaluation engine

struct Stratum {
  Vec u_value;
  std::vector<int> members;
};

std::vector<Stratum> find_strata(const Mat& U) {
  std::map<std::vector<double>, std::size_t> seen;
  std::vector<Stratum> strata;
  std::vector<double> key(static_cast<std::size_t>(U.cols()));
  for (int i = 0; i < U.rows(); ++i) {
    for (int c = 0; c < U.cols(); ++c) key[static_cast<std::size_t>(c)] = U(i, c);
    auto [it, inserted] = seen.emplace(key, strata.size());
    if (inserted) {
      Stratum s;
      s.u_value = U.row(i).transpose();
      strata.push_back(std::move(s));
    }
    strata[it->second].members.push_back(i);
  }
  return strata;
}

class ScoreEngine {
 public:
  enum class Mode { special_single, general_strata, general_continuous };

  ScoreEngine(const Dataset& data, const FitConfig& cfg) : data_(data), cfg_(cfg) {
    cfg_.model.validate();
    cfg_.mech.validate();
    data_.validate();
    if (data_.x_dim() != cfg_.model.covariate_dim)
      throw std::invalid_argument("fit: dataset covariate dimension does not match the model");

    grid_ = y_grid(cfg_.model, data_, cfg_.grid_size, cfg_.envelope_scale);
    X_ = data_.covariate_matrix();
    const int n = data_.N();

    if (cfg_.assumption == Assumption::special) {
      mode_ = Mode::special_single;
      pi_special_ = mechanism_at_nodes(cfg_.mech, grid_, Vec());
      setup_special_sources();
      return;
    }

    if (data_.u_dim() == 0)
      throw std::invalid_argument("fit: the conditional-mechanism setting needs u columns");

    bool discrete;
    if (cfg_.u_mode == UMode::discrete) {
      discrete = true;
    } else if (cfg_.u_mode == UMode::continuous) {
      discrete = false;
    } else {
      const auto strata = find_strata(data_.u);
      const int limit = std::max<int>(2, std::min(20, n / 10));
      discrete = static_cast<int>(strata.size()) <= limit;
    }

    if (discrete) {
      mode_ = Mode::general_strata;
      strata_ = find_strata(data_.u);
      stratum_of_.assign(static_cast<std::size_t>(n), -1);
      for (std::size_t k = 0; k < strata_.size(); ++k)
        for (int i : strata_[k].members) stratum_of_[static_cast<std::size_t>(i)] = static_cast<int>(k);
      pi_strata_.reserve(strata_.size());
      for (const auto& s : strata_)
        pi_strata_.push_back(mechanism_at_nodes(cfg_.mech, grid_, s.u_value));
      setup_strata_sources();
    } else {
      mode_ = Mode::general_continuous;
      if (cfg_.variant == Variant::nonparametric_kde ||
          cfg_.variant == Variant::parametric_fx)
        throw std::invalid_argument(
            "fit: this variant is not available with continuous mechanism covariates");
      h_ = bandwidth(cfg_.bandwidth_rule, n, data_.u_dim());
      if (data_.u_dim() == 1) {
        order_.resize(static_cast<std::size_t>(n));
        std::iota(order_.begin(), order_.end(), 0);
        std::sort(order_.begin(), order_.end(),
                  [&](int a, int b) { return data_.u(a, 0) < data_.u(b, 0); });
        u_sorted_.resize(n);
        z_sorted_ = Mat(n, data_.z_dim());
        for (int k = 0; k < n; ++k) {
          u_sorted_[k] = data_.u(order_[static_cast<std::size_t>(k)], 0);
          z_sorted_.row(k) = data_.z.row(order_[static_cast<std::size_t>(k)]);
        }
      }
    }
  }

  const FitConfig& config() const { return cfg_; }
  const YGrid& grid() const { return grid_; }

  Vec mean_score(const Vec& beta) const { return scores(beta).colwise().mean().transpose(); }

  Mat scores(const Vec& beta) const {
    Mat s(data_.N(), cfg_.model.n_params());
    run(beta, s, nullptr);
    return s;
  }

  void scores_and_corrections(const Vec& beta, Mat& s, Mat& h) const {
    s.resize(data_.N(), cfg_.model.n_params());
    h.resize(data_.N(), cfg_.model.n_params());
    run(beta, s, &h);
    if (cfg_.variant == Variant::parametric_fx) {
      // var(S + C phi) with C = E[S dlogf/dalpha']
      const Mat C = s.transpose() * pfit_.log_grad / data_.N();
      h = -(pfit_.phi * C.transpose());
    } else if (cfg_.variant == Variant::oracle) {
      h.setZero();
    }
  }

 private:
  void setup_special_sources() {
    const int n = data_.N();
    switch (cfg_.variant) {
      case Variant::empirical:
        src_points_ = X_;
        src_weights_ = Vec::Constant(n, 1.0 / n);
        break;
      case Variant::oracle: {
        const XGrid g = oracle_xgrid(cfg_.oracle_density, cfg_.xgrid_points);
        src_points_ = g.points;
        src_weights_ = g.weights;
        break;
      }
      case Variant::parametric_fx: {
        pfit_ = fit_covariate_density(data_, cfg_.parametric_family);
        const XGrid g = pfit_.xgrid(cfg_.xgrid_points);
        src_points_ = g.points;
        src_weights_ = g.weights;
        break;
      }
      case Variant::nonparametric_kde: {
        const double h = bandwidth(cfg_.bandwidth_rule, n, data_.x_dim());
        // the trapezoid rule has to resolve structure at the bandwidth scale;
        // only affordable in low dimension, coarser tensor rules otherwise
        int ppd = cfg_.xgrid_points;
        if (data_.x_dim() == 1) ppd = std::max(ppd, 80);
        if (data_.x_dim() == 2) ppd = std::max(ppd, 40);
        const XGrid g = kde_xgrid(X_, cfg_.kernel, h, ppd);
        src_points_ = g.points;
        src_weights_ = g.weights;
        break;
      }
    }
  }

  void setup_strata_sources() {
    if (cfg_.variant == Variant::nonparametric_kde)
      throw std::invalid_argument("fit: the kernel-density variant handles marginal mechanisms only");
    if (cfg_.variant == Variant::parametric_fx)
      pfit_ = fit_covariate_density(data_, cfg_.parametric_family);
  }

  // stratum system (or the single special-assumption system)
  FredholmSystem stratum_system(const Vec& beta, int k) const {
    if (mode_ == Mode::special_single) {
      return assemble_weighted(cfg_.model, beta, grid_, pi_special_, src_points_,
                               src_weights_);
    }
    const auto& st = strata_[static_cast<std::size_t>(k)];
    const auto& pi = pi_strata_[static_cast<std::size_t>(k)];
    switch (cfg_.variant) {
      case Variant::empirical: {
        const int nk = static_cast<int>(st.members.size());
        Mat X(nk, data_.x_dim());
        for (int r = 0; r < nk; ++r) {
          X.row(r).head(data_.u_dim()) = st.u_value.transpose();
          X.row(r).tail(data_.z_dim()) = data_.z.row(st.members[static_cast<std::size_t>(r)]);
        }
        return assemble_weighted(cfg_.model, beta, grid_, pi, X,
                                 Vec::Constant(nk, 1.0 / nk));
      }
      case Variant::oracle: {
        const XGrid g = oracle_xgrid_at_u(cfg_.oracle_density, st.u_value, cfg_.xgrid_points);
        return assemble_weighted(cfg_.model, beta, grid_, pi, g.points, g.weights);
      }
      case Variant::parametric_fx: {
        const XGrid g = pfit_.xgrid_at_u(st.u_value, cfg_.xgrid_points);
        return assemble_weighted(cfg_.model, beta, grid_, pi, g.points, g.weights);
      }
      default:
        throw std::logic_error("unsupported stratified variant");
    }
  }

  // kernel-weighted local system at the u of row i (continuous mechanism)
  FredholmSystem local_system(const Vec& beta, int i, const Vec& pi) const {
    const int n = data_.N();
    if (cfg_.variant == Variant::oracle) {
      const XGrid g =
          oracle_xgrid_at_u(cfg_.oracle_density, data_.u.row(i).transpose(), cfg_.xgrid_points);
      return assemble_weighted(cfg_.model, beta, grid_, pi, g.points, g.weights);
    }
    const Vec u0 = data_.u.row(i).transpose();
    if (data_.u_dim() == 1) {
      const double ui = u0[0];
      const auto lo_it = std::lower_bound(u_sorted_.data(), u_sorted_.data() + n, ui - h_);
      const auto hi_it = std::upper_bound(u_sorted_.data(), u_sorted_.data() + n, ui + h_);
      const int lo = static_cast<int>(lo_it - u_sorted_.data());
      const int nk = static_cast<int>(hi_it - lo_it);
      if (nk <= 0)
        throw std::runtime_error("fit: empty kernel neighborhood (bandwidth too small)");
      Mat X(nk, data_.x_dim());
      Vec w(nk);
      for (int r = 0; r < nk; ++r) {
        X(r, 0) = ui;
        X.row(r).tail(data_.z_dim()) = z_sorted_.row(lo + r);
        const double v = (u_sorted_[lo + r] - ui) / h_;
        w[r] = kernel_eval(cfg_.kernel, v) / (h_ * n);
      }
      return assemble_weighted(cfg_.model, beta, grid_, pi, X, w);
    }
    // multi-dimensional u: direct weights over all rows
    Vec w(n);
    Vec diff(data_.u_dim());
    for (int r = 0; r < n; ++r) {
      diff = data_.u.row(r).transpose() - u0;
      w[r] = product_kernel(cfg_.kernel, diff, h_) / n;
    }
    Mat X(n, data_.x_dim());
    X.leftCols(data_.u_dim()).rowwise() = u0.transpose();
    X.rightCols(data_.z_dim()) = data_.z;
    return assemble_weighted(cfg_.model, beta, grid_, pi, X, w);
  }

  // score of row i given its solved system
  void score_row(const Vec& beta, int i, const Vec& pi, const FredholmSolver& solver,
                 const BSolution& b, Eigen::RowVectorXd& s_out,
                 Eigen::RowVectorXd& h_out, bool want_h, SourceEval& se) const {
    const int p = cfg_.model.n_params();
    const int m = grid_.size();
    const Vec x = data_.x_row(i);
    eval_source(cfg_.model, beta, x, grid_, pi, se);

    Vec onex(p);
    onex[0] = 1.0;
    onex.tail(p - 1) = x;

    // int b(t) f(t) pi(t) dt per coefficient
    Vec bint = Vec::Zero(p);
    for (int j = 0; j < m; ++j)
      bint += (grid_.weights[j] * pi[j] * se.frow[j]) * b.values.row(j).transpose();

    if (data_.r[static_cast<std::size_t>(i)]) {
      const Vec sc = outcome_score(cfg_.model, beta, data_.y[i], x);
      s_out = (sc - interpolate_b(b, data_.y[i])).transpose();
    } else {
      s_out = ((bint - se.int_g_pi * onex) / se.denom).transpose();
    }

    if (!want_h) return;

    // correction rows: g = v_i - (A_i b), one operator solve against A-hat
    Mat g(m, p);
    const Vec srow = bint / se.denom;  // recycled inner integral
    for (int j = 0; j < m; ++j) {
      const double a = se.gcoef[j] + (se.int_g_pi / se.denom) * se.frow[j];
      g.row(j) = a * onex.transpose() -
                 se.frow[j] * (b.values.row(j) + srow.transpose());
    }
    const Mat w = solver.solve(g);
    Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(p);
    for (int j = 0; j < m; ++j) {
      h += (grid_.weights[j] * (pi[j] - 1.0)) * g.row(j);
      h += (grid_.weights[j] * solver.system().diag[j]) * w.row(j);
    }
    h_out = h;
  }

  void run(const Vec& beta, Mat& s, Mat* hptr) const {
    const int n = data_.N();
    const bool want_h =
        hptr != nullptr && cfg_.variant != Variant::oracle && cfg_.variant != Variant::parametric_fx;
    if (hptr) hptr->setZero(n, cfg_.model.n_params());

    if (mode_ == Mode::special_single || mode_ == Mode::general_strata) {
      const int nsys = mode_ == Mode::special_single ? 1 : static_cast<int>(strata_.size());
      std::vector<FredholmSolver> solvers;
      std::vector<BSolution> bsols;
      solvers.reserve(static_cast<std::size_t>(nsys));
      bsols.reserve(static_cast<std::size_t>(nsys));
      for (int k = 0; k < nsys; ++k) {
        solvers.emplace_back(stratum_system(beta, k));
        bsols.push_back(solvers.back().solve_b());
      }
      parallel_for_blocks(static_cast<std::size_t>(n), [&](std::size_t lo, std::size_t hi) {
        SourceEval se;
        Eigen::RowVectorXd srow(cfg_.model.n_params()), hrow(cfg_.model.n_params());
        for (std::size_t i = lo; i < hi; ++i) {
          const int k = mode_ == Mode::special_single ? 0 : stratum_of_[i];
          const Vec& pi = mode_ == Mode::special_single ? pi_special_
                                                        : pi_strata_[static_cast<std::size_t>(k)];
          score_row(beta, static_cast<int>(i), pi, solvers[static_cast<std::size_t>(k)],
                    bsols[static_cast<std::size_t>(k)], srow, hrow, want_h, se);
          s.row(static_cast<Eigen::Index>(i)) = srow;
          if (want_h) hptr->row(static_cast<Eigen::Index>(i)) = hrow;
        }
      });
      return;
    }

    // continuous mechanism covariate: one local solve per observation
    parallel_for_blocks(static_cast<std::size_t>(n), [&](std::size_t lo, std::size_t hi) {
      SourceEval se;
      Eigen::RowVectorXd srow(cfg_.model.n_params()), hrow(cfg_.model.n_params());
      for (std::size_t i = lo; i < hi; ++i) {
        const Vec pi = mechanism_at_nodes(cfg_.mech, grid_, data_.u.row(static_cast<int>(i)).transpose());
        FredholmSolver solver(local_system(beta, static_cast<int>(i), pi));
        const BSolution b = solver.solve_b();
        score_row(beta, static_cast<int>(i), pi, solver, b, srow, hrow, want_h, se);
        s.row(static_cast<Eigen::Index>(i)) = srow;
        if (want_h) hptr->row(static_cast<Eigen::Index>(i)) = hrow;
      }
    });
  }

  const Dataset& data_;
  FitConfig cfg_;
  YGrid grid_;
  Mat X_;
  Mode mode_ = Mode::special_single;

  // special assumption / density variants
  Vec pi_special_;
  Mat src_points_;
  Vec src_weights_;
  ParametricDensityFit pfit_;

  // strata
  std::vector<Stratum> strata_;
  std::vector<int> stratum_of_;
  std::vector<Vec> pi_strata_;

  // continuous u
  double h_ = 0.0;
  std::vector<int> order_;
  Vec u_sorted_;
  Mat z_sorted_;
};

Mat fd_jacobian(const ScoreEngine& engine, const Vec& beta, double fd_step) {
  const int p = static_cast<int>(beta.size());
  Mat J(p, p);
  for (int j = 0; j < p; ++j) {
    const double step = fd_step * (1.0 + std::abs(beta[j]));
    Vec bp = beta, bm = beta;
    bp[j] += step;
    bm[j] -= step;
    J.col(j) = (engine.mean_score(bp) - engine.mean_score(bm)) / (2.0 * step);
  }
  return J;
}

// Observed-data log likelihood under the working mechanism (beta-dependent
// part). The estimating equation can have a spurious far root with a flat
// slope column; this criterion ranks candidate roots.
double working_loglik(const Dataset& data, const FitConfig& cfg, const Vec& beta) {
  const YGrid grid = y_grid(cfg.model, data, cfg.grid_size, cfg.envelope_scale);
  const bool marginal = cfg.assumption == Assumption::special || data.u_dim() == 0;
  Vec pi_shared;
  if (marginal) pi_shared = mechanism_at_nodes(cfg.mech, grid, Vec());

  SourceEval se;
  double L = 0.0;
  for (int i = 0; i < data.N(); ++i) {
    const Vec x = data.x_row(i);
    if (data.r[static_cast<std::size_t>(i)]) {
      L += std::log(std::max(outcome_density(cfg.model, beta, data.y[i], x), 1e-300));
    } else {
      const Vec pi = marginal
                         ? pi_shared
                         : mechanism_at_nodes(cfg.mech, grid, data.u.row(i).transpose());
      eval_source(cfg.model, beta, x, grid, pi, se);
      L += std::log(std::max(se.denom, 1e-300));
    }
  }
  return L;
}

// Maximizer of working_loglik, a robust extra starting point: under a correct
// working mechanism it is the observed-data MLE, and in general it sits far
// from the degenerate rays where the estimating function decays to zero.
Vec working_mle(const Dataset& data, const FitConfig& cfg, const Vec& start) {
  const YGrid grid = y_grid(cfg.model, data, cfg.grid_size, cfg.envelope_scale);
  const bool marginal = cfg.assumption == Assumption::special || data.u_dim() == 0;
  Vec pi_shared;
  if (marginal) pi_shared = mechanism_at_nodes(cfg.mech, grid, Vec());
  const int p = cfg.model.n_params();

  const auto gradient = [&](const Vec& beta) {
    SourceEval se;
    Vec g = Vec::Zero(p);
    Vec onex(p);
    onex[0] = 1.0;
    for (int i = 0; i < data.N(); ++i) {
      const Vec x = data.x_row(i);
      if (data.r[static_cast<std::size_t>(i)]) {
        g += outcome_score(cfg.model, beta, data.y[i], x);
      } else {
        const Vec pi = marginal
                           ? pi_shared
                           : mechanism_at_nodes(cfg.mech, grid, data.u.row(i).transpose());
        eval_source(cfg.model, beta, x, grid, pi, se);
        onex.tail(p - 1) = x;
        g -= (se.int_g_pi / se.denom) * onex;
      }
    }
    return Vec(g / data.N());
  };

  Vec beta = start;
  Vec g = gradient(beta);
  for (int it = 0; it < 100 && g.cwiseAbs().maxCoeff() > 1e-9; ++it) {
    Mat H(p, p);
    for (int j = 0; j < p; ++j) {
      const double step = 1e-5 * (1.0 + std::abs(beta[j]));
      Vec bp = beta, bm = beta;
      bp[j] += step;
      bm[j] -= step;
      H.col(j) = (gradient(bp) - gradient(bm)) / (2.0 * step);
    }
    Eigen::FullPivLU<Mat> lu(H);
    if (!lu.isInvertible()) break;
    Vec delta = lu.solve(-g);
    const double cap = 1.0 + beta.cwiseAbs().maxCoeff();
    if (delta.cwiseAbs().maxCoeff() > cap) delta *= cap / delta.cwiseAbs().maxCoeff();
    double alpha = 1.0;
    bool stepped = false;
    const double gnorm = g.cwiseAbs().maxCoeff();
    for (int half = 0; half < 10; ++half, alpha *= 0.5) {
      const Vec cand = beta + alpha * delta;
      const Vec gc = gradient(cand);
      if (gc.cwiseAbs().maxCoeff() < gnorm) {
        beta = cand;
        g = gc;
        stepped = true;
        break;
      }
    }
    if (!stepped || beta.cwiseAbs().maxCoeff() > 50.0) break;
  }
  return beta;
}

}  // namespace

// ---------------------------------------------------------------------------
// public surface

ParamVector complete_case_fit(const Dataset& data, const OutcomeModel& model) {
  model.validate();
  data.validate();
  if (data.n_observed() < model.n_params())
    throw std::invalid_argument("complete_case_fit: fewer complete cases than parameters");
  return model.family == OutcomeFamily::linear_gaussian ? cc_linear(data, model)
                                                        : cc_logistic(data, model);
}

Mat complete_case_covariance(const Dataset& data, const OutcomeModel& model,
                             const ParamVector& beta) {
  const int p = model.n_params();
  const int n1 = data.n_observed();
  Mat A(n1, p);
  int k = 0;
  for (int i = 0; i < data.N(); ++i) {
    if (!data.r[static_cast<std::size_t>(i)]) continue;
    A(k, 0) = 1.0;
    A.row(k).tail(p - 1) = data.x_row(i).transpose();
    ++k;
  }
  Mat info;
  if (model.family == OutcomeFamily::linear_gaussian) {
    info = A.transpose() * A / (model.sigma * model.sigma);
  } else {
    Vec pvec = logistic_vec(A * beta);
    info = A.transpose() * pvec.cwiseProduct((1.0 - pvec.array()).matrix()).asDiagonal() * A;
  }
  Eigen::FullPivLU<Mat> lu(info);
  if (!lu.isInvertible())
    throw std::runtime_error("complete_case_covariance: singular information");
  return lu.inverse();
}

Vec estimating_function(const Dataset& data, const FitConfig& config, const ParamVector& beta) {
  return ScoreEngine(data, config).mean_score(beta);
}

Mat score_matrix(const Dataset& data, const FitConfig& config, const ParamVector& beta) {
  return ScoreEngine(data, config).scores(beta);
}

Vec efficient_score(const OutcomeModel& model, const MechanismModel& mech,
                    const ParamVector& beta, const BSolution& b, const Observation& obs) {
  const Vec pi = mechanism_at_nodes(mech, b.grid, obs.u);
  Vec x(obs.u.size() + obs.z.size());
  if (obs.u.size() > 0) x.head(obs.u.size()) = obs.u;
  x.tail(obs.z.size()) = obs.z;

  SourceEval se;
  eval_source(model, beta, x, b.grid, pi, se);
  const int p = model.n_params();

  if (obs.r) return outcome_score(model, beta, obs.y, x) - interpolate_b(b, obs.y);

  Vec bint = Vec::Zero(p);
  for (int j = 0; j < b.grid.size(); ++j)
    bint += (b.grid.weights[j] * pi[j] * se.frow[j]) * b.values.row(j).transpose();
  Vec onex(p);
  onex[0] = 1.0;
  onex.tail(p - 1) = x;
  return (bint - se.int_g_pi * onex) / se.denom;
}

namespace {

struct NewtonOutcome {
  Vec beta;
  double fnorm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  std::string message;
};

// Damped Newton on F (or on the deflated field (1 + 1/|beta - r1|) F when a
// previously found root r1 is supplied, which repels the iteration from r1
// and exposes any second root). Convergence is always judged on the raw F.
NewtonOutcome run_newton(const ScoreEngine& engine, const SolverOptions& opt,
                         const Vec& start, const Vec* deflate = nullptr) {
  NewtonOutcome out;
  out.beta = start;
  const int p = static_cast<int>(start.size());

  const auto field = [&](const Vec& beta) {
    Vec F = engine.mean_score(beta);
    if (deflate) {
      const double dist = (beta - *deflate).norm();
      F *= 1.0 + 1.0 / std::max(dist, 1e-8);
    }
    return F;
  };

  Vec F;
  try {
    F = field(out.beta);
  } catch (const std::exception& e) {
    out.message = e.what();
    return out;
  }
  double merit = F.cwiseAbs().maxCoeff();

  for (out.iterations = 0; out.iterations < opt.max_iter; ++out.iterations) {
    // convergence on the raw estimating function
    const double raw =
        deflate ? merit / (1.0 + 1.0 / std::max((out.beta - *deflate).norm(), 1e-8))
                : merit;
    if (raw < opt.tol) break;

    Mat J(p, p);
    try {
      for (int j = 0; j < p; ++j) {
        const double step = opt.fd_step * (1.0 + std::abs(out.beta[j]));
        Vec bp = out.beta, bm = out.beta;
        bp[j] += step;
        bm[j] -= step;
        J.col(j) = (field(bp) - field(bm)) / (2.0 * step);
      }
    } catch (const std::exception& e) {
      out.message = e.what();
      break;
    }
    Eigen::FullPivLU<Mat> lu(J);
    if (!lu.isInvertible()) {
      out.message = "singular estimating-equation Jacobian";
      break;
    }
    Vec delta = lu.solve(-F);
    // keep steps local: the equation can flatten far from the data-supported
    // region and Newton directions there are unreliable
    for (int j = 0; j < p; ++j) {
      const double cap = 0.5 * (1.0 + std::abs(out.beta[j]));
      if (std::abs(delta[j]) > cap) delta *= cap / std::abs(delta[j]);
    }

    double alpha = 1.0;
    bool stepped = false;
    for (int half = 0; half < 12; ++half, alpha *= 0.5) {
      const Vec cand = out.beta + alpha * delta;
      try {
        const Vec Fc = field(cand);
        const double cnorm = Fc.cwiseAbs().maxCoeff();
        if (cnorm < merit) {
          out.beta = cand;
          F = Fc;
          merit = cnorm;
          stepped = true;
          break;
        }
      } catch (const std::exception&) {
        // step left the feasible region; shrink
      }
    }
    if (!stepped) {
      out.message = "line search stalled";
      break;
    }
    if (out.beta.cwiseAbs().maxCoeff() > 50.0) {
      // the estimating function decays to zero along degenerate rays; a walk
      // out there is divergence, not a root
      out.message = "diverged along a degenerate direction";
      out.fnorm = std::numeric_limits<double>::infinity();
      out.converged = false;
      return out;
    }
  }

  out.fnorm = deflate
                  ? merit / (1.0 + 1.0 / std::max((out.beta - *deflate).norm(), 1e-8))
                  : merit;
  out.converged = out.fnorm < opt.tol;
  if (deflate && (out.beta - *deflate).norm() < 1e-5) out.converged = false;
  if (!out.converged && out.message.empty()) out.message = "max iterations reached";
  return out;
}

}  // namespace

FitResult fit(const Dataset& data, const FitConfig& config) {
  ScoreEngine engine(data, config);
  const int p = config.model.n_params();
  const auto& opt = config.solver;

  FitResult res;
  res.n_used = data.N();

  // The estimating equation can carry spurious roots besides the consistent
  // one: a second finite root along the near-zero-slope ridge, and decaying
  // tails where F -> 0 at infinity. Newton runs from three deterministic
  // starts (complete-case fit, a slope-inflated variant of it, and the
  // working-model pseudo-MLE); the complete-case root is kept unless another
  // distinct root beats it decisively on observed-data working likelihood.
  const Vec cc = complete_case_fit(data, config.model);
  std::vector<Vec> starts{cc};
  {
    Vec xbar = Vec::Zero(data.x_dim());
    int n1 = 0;
    for (int i = 0; i < data.N(); ++i) {
      if (!data.r[static_cast<std::size_t>(i)]) continue;
      xbar += data.x_row(i);
      ++n1;
    }
    xbar /= std::max(n1, 1);
    Vec inflated = cc;
    inflated.tail(p - 1) *= 2.0;
    // keep the linear predictor unchanged at the observed covariate mean
    inflated[0] = cc[0] + (cc.tail(p - 1) - inflated.tail(p - 1)).dot(xbar);
    if ((inflated - cc).cwiseAbs().maxCoeff() > 1e-10) starts.push_back(inflated);
    try {
      const Vec wmle = working_mle(data, config, cc);
      if ((wmle - cc).cwiseAbs().maxCoeff() > 1e-8) starts.push_back(wmle);
    } catch (const std::exception&) {
      // optional start only
    }
  }

  // roots on the decaying rays report tiny residuals at implausible
  // coefficient magnitudes; treat them as non-convergence
  const double magnitude_bound = std::max(10.0, 5.0 * (1.0 + cc.cwiseAbs().maxCoeff()));

  constexpr double kDecisiveLogLik = 10.0;
  NewtonOutcome best;
  best.beta = cc;
  double best_loglik = -std::numeric_limits<double>::infinity();
  bool best_is_primary = false;
  int total_iterations = 0;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    NewtonOutcome cand = run_newton(engine, opt, starts[k]);
    total_iterations += cand.iterations;
    if (cand.converged && cand.beta.cwiseAbs().maxCoeff() > magnitude_bound) {
      cand.converged = false;
      cand.fnorm = std::numeric_limits<double>::infinity();
      cand.message = "root rejected: degenerate coefficient magnitude";
    }
    if (!cand.converged) {
      if (!best.converged && cand.fnorm <= best.fnorm) best = cand;
      continue;
    }
    if (best.converged && (cand.beta - best.beta).cwiseAbs().maxCoeff() < 1e-5) continue;
    const double ll = working_loglik(data, config, cand.beta);
    if (!best.converged) {
      best = cand;
      best_loglik = ll;
      best_is_primary = k == 0;
    } else if (ll > best_loglik + (best_is_primary ? kDecisiveLogLik : 0.0)) {
      best = cand;
      best_loglik = ll;
      best_is_primary = false;
    }
  }

  res.beta_hat = best.beta;
  res.residual_norm = best.fnorm;
  res.converged = best.converged;
  res.iterations = total_iterations;
  res.message = best.message;

  res.A_hat = Mat::Zero(p, p);
  res.B_hat = Mat::Zero(p, p);
  res.covariance = Mat::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
  res.std_errors = Vec::Constant(p, std::numeric_limits<double>::quiet_NaN());

  if (!res.converged || config.variance == VarianceMethod::none) return res;

  if (config.variance == VarianceMethod::bootstrap) {
    res.covariance = bootstrap_variance(data, config, config.bootstrap_samples,
                                        config.bootstrap_seed);
    res.std_errors = res.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    return res;
  }

  res.A_hat = fd_jacobian(engine, res.beta_hat, opt.fd_step);
  Mat s, h;
  engine.scores_and_corrections(res.beta_hat, s, h);
  Mat centered = s - h;
  centered.rowwise() -= centered.colwise().mean();
  res.B_hat = centered.transpose() * centered / data.N();

  Eigen::FullPivLU<Mat> alu(res.A_hat);
  if (!alu.isInvertible()) {
    res.message = "singular A-hat in the sandwich";
    return res;
  }
  const Mat Ainv = alu.inverse();
  res.covariance = Ainv * res.B_hat * Ainv.transpose() / data.N();
  res.covariance = 0.5 * (res.covariance + res.covariance.transpose()).eval();
  res.std_errors = res.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  return res;
}

SandwichParts sandwich_parts(const Dataset& data, const FitConfig& config,
                             const ParamVector& beta) {
  ScoreEngine engine(data, config);
  SandwichParts parts;
  engine.scores_and_corrections(beta, parts.score_terms, parts.h_terms);
  parts.a_matrix = fd_jacobian(engine, beta, config.solver.fd_step);
  Mat centered = parts.score_terms - parts.h_terms;
  centered.rowwise() -= centered.colwise().mean();
  parts.b_matrix = centered.transpose() * centered / data.N();
  return parts;
}

Mat bootstrap_variance(const Dataset& data, const FitConfig& config, int B,
                       std::uint64_t seed) {
  if (B < 50) throw std::invalid_argument("bootstrap_variance: need B >= 50");
  const int n = data.N();
  const int p = config.model.n_params();

  FitConfig inner = config;
  inner.variance = VarianceMethod::none;

  Mat betas(B, p);
  std::vector<std::uint8_t> ok(static_cast<std::size_t>(B), 0);

  parallel_for(static_cast<std::size_t>(B), [&](std::size_t b) {
    Rng rng(derive_seed(seed, b));
    Dataset res;
    res.r.resize(static_cast<std::size_t>(n));
    res.y.resize(n);
    res.u.resize(n, data.u_dim());
    res.z.resize(n, data.z_dim());
    for (int i = 0; i < n; ++i) {
      const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      res.r[static_cast<std::size_t>(i)] = data.r[static_cast<std::size_t>(j)];
      res.y[i] = data.y[j];
      if (data.u_dim() > 0) res.u.row(i) = data.u.row(j);
      res.z.row(i) = data.z.row(j);
    }
    try {
      const FitResult fr = fit(res, inner);
      if (fr.converged) {
        betas.row(static_cast<Eigen::Index>(b)) = fr.beta_hat.transpose();
        ok[b] = 1;
      }
    } catch (const std::exception&) {
      // counted below
    }
  });

  int nok = 0;
  for (const auto f : ok) nok += f;
  if (nok < B - B / 10)
    throw std::runtime_error("bootstrap_variance: more than 10% of resample fits failed");

  Mat kept(nok, p);
  int k = 0;
  for (int b = 0; b < B; ++b)
    if (ok[static_cast<std::size_t>(b)]) kept.row(k++) = betas.row(b);
  kept.rowwise() -= kept.colwise().mean();
  return kept.transpose() * kept / (nok - 1);
}

}  // namespace shadowfit
