#pragma once

#include <string>
#include <vector>

#include "shadowfit/simulate.hpp"

// Report emission: JSON, CSV and aligned text tables for study summaries and
// per-coefficient fit results (estimate / standard error / z / p).

namespace shadowfit {

double normal_cdf(double z);
double two_sided_p(double z);

struct CoefficientReport {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  double p = 0.0;
};

struct VariantReport {
  std::string label;
  std::vector<CoefficientReport> coefficients;
  bool converged = false;
  int iterations = 0;
  double residual_norm = 0.0;
};

struct FitReport {
  std::string input;
  std::string family;
  std::vector<VariantReport> variants;
};

VariantReport make_variant_report(const std::string& label, const FitResult& fr,
                                  const std::vector<std::string>& coef_names);

std::string study_to_json(const StudyReport& report);
std::string study_to_table(const StudyReport& report);
std::string study_to_csv(const StudyReport& report);

std::string fit_to_json(const FitReport& report);
std::string fit_to_table(const FitReport& report);
std::string fit_to_csv(const FitReport& report);

}  // namespace shadowfit
