#include "shadowfit/simulate.hpp"

#include <Eigen/Cholesky>

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "shadowfit/parallel.hpp"
#include "shadowfit/rng.hpp"

namespace shadowfit {

namespace {

Mat ar1_cov(int d, double rho) {
  Mat S(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) S(i, j) = std::pow(rho, std::abs(i - j));
  return S;
}

double logistic(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

constexpr double kZ975 = 1.959963984540054;

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::empirical: return "empirical";
    case Variant::nonparametric_kde: return "kde";
    case Variant::parametric_fx: return "parametric";
    case Variant::oracle: return "oracle";
  }
  return "?";
}

ScenarioId scenario_from_string(const std::string& s) {
  if (s == "S1" || s == "s1") return ScenarioId::S1;
  if (s == "S2" || s == "s2") return ScenarioId::S2;
  if (s == "S3" || s == "s3") return ScenarioId::S3;
  if (s == "S4" || s == "s4") return ScenarioId::S4;
  throw std::invalid_argument("unknown scenario: " + s);
}

ScenarioSpec ScenarioSpec::make(ScenarioId id, int n_override) {
  ScenarioSpec s;
  s.id = id;
  switch (id) {
    case ScenarioId::S1: {
      s.name = "S1";
      s.N = 500;
      s.truth = Vec(2);
      s.truth << 0.25, -0.5;
      s.model = {OutcomeFamily::linear_gaussian, 1, 1.0};
      s.assumption = Assumption::special;
      s.x_mean = Vec::Constant(1, 0.5);
      s.x_cov = Mat::Constant(1, 1, 0.25);
      s.n_u = 0;
      s.mech_true = MechanismModel::logistic_y(1.0, 1.0);
      s.mech_misspec = MechanismModel::logistic_y(1.0, -1.0);
      s.bandwidth_rule = BandwidthRule::cn_third(1.5);
      s.oracle_density.kind = OracleDensity::Kind::mvn_joint;
      s.oracle_density.mean = s.x_mean;
      s.oracle_density.cov = s.x_cov;
      s.parametric_family = ParametricFamily::multivariate_normal;
      s.xgrid_points = 15;
      break;
    }
    case ScenarioId::S2: {
      s.name = "S2";
      s.N = 1000;
      s.truth = Vec(4);
      s.truth << 0.0, 0.1, -0.2, -0.3;
      s.model = {OutcomeFamily::linear_gaussian, 3, 1.0};
      s.assumption = Assumption::special;
      s.x_mean = Vec::Zero(3);
      s.x_cov = ar1_cov(3, 0.5);
      s.n_u = 0;
      s.mech_true = MechanismModel::logistic_y(1.0, 1.0);
      s.mech_misspec = MechanismModel::logistic_y(1.0, -1.0);
      s.bandwidth_rule = BandwidthRule::cn_two_sevenths(2.0);
      s.oracle_density.kind = OracleDensity::Kind::mvn_joint;
      s.oracle_density.mean = s.x_mean;
      s.oracle_density.cov = s.x_cov;
      s.parametric_family = ParametricFamily::multivariate_normal;
      s.xgrid_points = 6;
      break;
    }
    case ScenarioId::S3: {
      s.name = "S3";
      s.N = 1000;
      s.truth = Vec(3);
      s.truth << 0.0, 0.3, -0.3;
      s.model = {OutcomeFamily::logistic_binary, 2, 1.0};
      s.assumption = Assumption::general;
      s.x_mean = Vec::Zero(2);
      s.x_cov = ar1_cov(2, 0.5);
      s.n_u = 1;
      s.mech_true = MechanismModel::logistic_yu(1.0, 1.0, Vec::Constant(1, 1.0));
      s.mech_misspec = MechanismModel::logistic_yu(1.0, -1.0, Vec::Constant(1, -1.0));
      s.bandwidth_rule = BandwidthRule::cn_third(2.0);
      s.oracle_density.kind = OracleDensity::Kind::gaussian_linear_z_given_u;
      s.oracle_density.coef = Vec(2);
      s.oracle_density.coef << 0.0, 0.5;  // E[z | u] under the AR(1) pair
      s.oracle_density.resid_var = 0.75;
      s.xgrid_points = 15;
      break;
    }
    case ScenarioId::S4: {
      s.name = "S4";
      s.N = 2000;
      s.truth = Vec(3);
      s.truth << -0.5, 0.2, 0.7;
      s.model = {OutcomeFamily::logistic_binary, 2, 1.0};
      s.assumption = Assumption::general;
      s.n_u = 1;
      s.binary_pair = true;
      s.u_p = 0.5;
      s.z_b0 = -1.5;
      s.z_b1 = 0.2;
      s.mech_true = MechanismModel::logistic_yu(1.0, -2.0, Vec::Constant(1, 0.3));
      s.mech_misspec = MechanismModel::logistic_yu(1.0, 2.0, Vec::Constant(1, 0.3));
      s.oracle_density.kind = OracleDensity::Kind::bernoulli_logistic_z_given_u;
      s.oracle_density.b0 = -1.5;
      s.oracle_density.b1 = 0.2;
      s.parametric_family = ParametricFamily::bernoulli_logistic_z_given_u;
      break;
    }
    case ScenarioId::custom:
      break;
  }
  if (n_override > 0) s.N = n_override;
  return s;
}

Dataset generate(const ScenarioSpec& spec, std::uint64_t seed) {
  if (spec.N < 2) throw std::invalid_argument("generate: N too small");
  Rng rng(seed);
  const int n = spec.N;
  const int p = static_cast<int>(spec.truth.size());
  const int d = p - 1;
  const int du = spec.n_u;
  const int dz = d - du;
  if (dz < 1) throw std::invalid_argument("generate: scenario leaves no shadow covariate");

  Dataset data;
  data.r.resize(static_cast<std::size_t>(n));
  data.y.resize(n);
  data.u.resize(n, du);
  data.z.resize(n, dz);

  Mat L;
  if (!spec.binary_pair) {
    Eigen::LLT<Mat> llt(spec.x_cov);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("generate: covariate covariance not positive definite");
    L = llt.matrixL();
  }

  Vec x(d), g(d), uvec(du);
  for (int i = 0; i < n; ++i) {
    if (spec.binary_pair) {
      const double uv = rng.bernoulli(spec.u_p) ? 1.0 : 0.0;
      const double zv = rng.bernoulli(logistic(spec.z_b0 + spec.z_b1 * uv)) ? 1.0 : 0.0;
      x[0] = uv;
      x[1] = zv;
    } else {
      for (int c = 0; c < d; ++c) g[c] = rng.normal();
      x = spec.x_mean + L * g;
    }
    if (du > 0) data.u.row(i) = x.head(du).transpose();
    data.z.row(i) = x.tail(dz).transpose();

    const double eta = spec.truth[0] + spec.truth.tail(d).dot(x);
    double yv;
    if (spec.model.family == OutcomeFamily::linear_gaussian) {
      yv = eta + spec.model.sigma * rng.normal();
    } else {
      yv = rng.bernoulli(logistic(eta)) ? 1.0 : 0.0;
    }

    uvec = x.head(du);
    const double pi_true = spec.mech_true.prob(yv, uvec);
    const bool observed = rng.bernoulli(pi_true);
    data.r[static_cast<std::size_t>(i)] = observed ? 1 : 0;
    data.y[i] = observed ? yv : std::numeric_limits<double>::quiet_NaN();
  }
  return data;
}

FitConfig scenario_fit_config(const ScenarioSpec& spec, Variant variant, bool correct_mech) {
  FitConfig cfg;
  cfg.model = spec.model;
  cfg.mech = correct_mech ? spec.mech_true : spec.mech_misspec;
  cfg.variant = variant;
  cfg.assumption = spec.assumption;
  cfg.grid_size = spec.grid_size;
  cfg.bandwidth_rule = spec.bandwidth_rule;
  cfg.xgrid_points = spec.xgrid_points;
  cfg.oracle_density = spec.oracle_density;
  cfg.parametric_family = spec.parametric_family;
  return cfg;
}

StudyReport run_study(const ScenarioSpec& spec, const std::vector<StudyVariant>& variants,
                      int replicates, std::uint64_t base_seed) {
  if (replicates < 2) throw std::invalid_argument("run_study: need at least two replicates");
  if (variants.empty()) throw std::invalid_argument("run_study: no variants requested");

  const auto t0 = std::chrono::steady_clock::now();
  const int p = static_cast<int>(spec.truth.size());
  const int ncells = static_cast<int>(variants.size());

  std::vector<FitConfig> cfgs;
  cfgs.reserve(variants.size());
  for (const auto& v : variants) cfgs.push_back(scenario_fit_config(spec, v.variant, v.correct_mech));

  // per replicate x cell storage, filled in parallel, reduced in order
  Mat betas(replicates * ncells, p);
  Mat ses(replicates * ncells, p);
  std::vector<std::uint8_t> ok(static_cast<std::size_t>(replicates * ncells), 0);

  parallel_for(static_cast<std::size_t>(replicates), [&](std::size_t rep) {
    const Dataset data = generate(spec, derive_seed(base_seed, rep));
    for (int c = 0; c < ncells; ++c) {
      const auto slot = static_cast<Eigen::Index>(rep) * ncells + c;
      try {
        const FitResult fr = fit(data, cfgs[static_cast<std::size_t>(c)]);
        if (fr.converged && fr.std_errors.allFinite()) {
          betas.row(slot) = fr.beta_hat.transpose();
          ses.row(slot) = fr.std_errors.transpose();
          ok[static_cast<std::size_t>(slot)] = 1;
        }
      } catch (const std::exception&) {
        // counted as a failure below
      }
    }
  });

  StudyReport report;
  report.scenario = spec.name;
  report.N = spec.N;
  report.replicates = replicates;
  report.base_seed = base_seed;
  report.truth = spec.truth;

  for (int c = 0; c < ncells; ++c) {
    StudyCell cell;
    cell.variant = variants[static_cast<std::size_t>(c)].variant;
    cell.correct_mech = variants[static_cast<std::size_t>(c)].correct_mech;
    cell.bias = Vec::Zero(p);
    cell.mc_std = Vec::Zero(p);
    cell.std_hat_mean = Vec::Zero(p);
    cell.coverage = Vec::Zero(p);

    int nok = 0;
    Vec mean = Vec::Zero(p);
    for (int rep = 0; rep < replicates; ++rep) {
      const auto slot = static_cast<Eigen::Index>(rep) * ncells + c;
      if (!ok[static_cast<std::size_t>(slot)]) continue;
      ++nok;
      mean += betas.row(slot).transpose();
    }
    cell.converged = nok;
    cell.failed = replicates - nok;
    if (nok >= 2) {
      mean /= nok;
      Vec ss = Vec::Zero(p);
      for (int rep = 0; rep < replicates; ++rep) {
        const auto slot = static_cast<Eigen::Index>(rep) * ncells + c;
        if (!ok[static_cast<std::size_t>(slot)]) continue;
        const Vec dev = betas.row(slot).transpose() - mean;
        ss += dev.cwiseProduct(dev);
        cell.std_hat_mean += ses.row(slot).transpose();
        for (int j = 0; j < p; ++j) {
          const double half = kZ975 * ses(slot, j);
          if (std::abs(betas(slot, j) - spec.truth[j]) <= half) cell.coverage[j] += 1.0;
        }
      }
      cell.bias = mean - spec.truth;
      cell.mc_std = (ss / (nok - 1)).cwiseSqrt();
      cell.std_hat_mean /= nok;
      cell.coverage /= nok;
    }
    report.cells.push_back(std::move(cell));
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace shadowfit
