#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shadowfit/estimator.hpp"

// The four study designs, the replication harness and its aggregates
// (bias / std / std-hat / coverage at the nominal 95% level).

namespace shadowfit {

enum class ScenarioId { S1, S2, S3, S4, custom };

struct ScenarioSpec {
  ScenarioId id = ScenarioId::custom;
  std::string name = "custom";
  int N = 0;
  Vec truth;
  OutcomeModel model;
  Assumption assumption = Assumption::special;

  // covariate generator: either joint normal over (u, z) or the binary pair
  Vec x_mean;
  Mat x_cov;
  int n_u = 0;  // leading covariates acting as mechanism covariates
  bool binary_pair = false;  // u ~ Bernoulli(u_p), z | u ~ Bernoulli(logistic)
  double u_p = 0.5;
  double z_b0 = 0.0, z_b1 = 0.0;

  MechanismModel mech_true;
  MechanismModel mech_misspec;

  // estimation defaults
  int grid_size = 15;
  BandwidthRule bandwidth_rule = BandwidthRule::cn_third(1.5);
  int xgrid_points = 15;
  OracleDensity oracle_density;
  ParametricFamily parametric_family = ParametricFamily::multivariate_normal;

  static ScenarioSpec make(ScenarioId id, int n_override = 0);
};

ScenarioId scenario_from_string(const std::string& s);

// Draws covariates, outcome and the missingness indicator under the true
// mechanism; masks y where r = 0. Deterministic given the seed.
Dataset generate(const ScenarioSpec& spec, std::uint64_t seed);

// FitConfig for one estimator cell of a study.
FitConfig scenario_fit_config(const ScenarioSpec& spec, Variant variant, bool correct_mech);

struct StudyVariant {
  Variant variant = Variant::empirical;
  bool correct_mech = true;
};

struct StudyCell {
  Variant variant = Variant::empirical;
  bool correct_mech = true;
  Vec bias;
  Vec mc_std;
  Vec std_hat_mean;
  Vec coverage;
  int converged = 0;
  int failed = 0;
};

struct StudyReport {
  std::string scenario;
  int N = 0;
  int replicates = 0;
  std::uint64_t base_seed = 0;
  Vec truth;
  std::vector<StudyCell> cells;
  double wall_seconds = 0.0;
};

// Per replicate: one generated dataset, every requested cell fitted on it;
// failed fits are excluded from the aggregates and counted.
StudyReport run_study(const ScenarioSpec& spec, const std::vector<StudyVariant>& variants,
                      int replicates, std::uint64_t base_seed);

const char* variant_name(Variant v);

}  // namespace shadowfit
