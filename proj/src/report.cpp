#include "shadowfit/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace shadowfit {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

VariantReport make_variant_report(const std::string& label, const FitResult& fr,
                                  const std::vector<std::string>& coef_names) {
  VariantReport vr;
  vr.label = label;
  vr.converged = fr.converged;
  vr.iterations = fr.iterations;
  vr.residual_norm = fr.residual_norm;
  for (int j = 0; j < fr.beta_hat.size(); ++j) {
    CoefficientReport c;
    c.name = static_cast<std::size_t>(j) < coef_names.size()
                 ? coef_names[static_cast<std::size_t>(j)]
                 : "beta" + std::to_string(j);
    c.estimate = fr.beta_hat[j];
    c.std_error = fr.std_errors.size() > j ? fr.std_errors[j] : std::nan("");
    c.z = c.std_error > 0.0 ? c.estimate / c.std_error : std::nan("");
    c.p = std::isfinite(c.z) ? two_sided_p(c.z) : std::nan("");
    vr.coefficients.push_back(std::move(c));
  }
  return vr;
}

namespace {

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

nlohmann::json cell_to_json(const StudyCell& cell) {
  nlohmann::json j;
  j["variant"] = variant_name(cell.variant);
  j["mechanism"] = cell.correct_mech ? "correct" : "misspecified";
  j["bias"] = std::vector<double>(cell.bias.data(), cell.bias.data() + cell.bias.size());
  j["std"] = std::vector<double>(cell.mc_std.data(), cell.mc_std.data() + cell.mc_std.size());
  j["std_hat"] = std::vector<double>(cell.std_hat_mean.data(),
                                     cell.std_hat_mean.data() + cell.std_hat_mean.size());
  j["cvg"] = std::vector<double>(cell.coverage.data(),
                                 cell.coverage.data() + cell.coverage.size());
  j["converged"] = cell.converged;
  j["failed"] = cell.failed;
  return j;
}

}  // namespace

std::string study_to_json(const StudyReport& report) {
  nlohmann::json j;
  j["config"]["scenario"] = report.scenario;
  j["config"]["N"] = report.N;
  j["config"]["replicates"] = report.replicates;
  j["config"]["seed"] = report.base_seed;
  j["config"]["truth"] =
      std::vector<double>(report.truth.data(), report.truth.data() + report.truth.size());
  j["cells"] = nlohmann::json::array();
  for (const auto& cell : report.cells) j["cells"].push_back(cell_to_json(cell));
  // no volatile fields here: fixed-seed runs are byte-identical
  return j.dump(2) + "\n";
}

std::string study_to_table(const StudyReport& report) {
  std::ostringstream os;
  const int p = static_cast<int>(report.truth.size());
  os << "scenario " << report.scenario << "  N=" << report.N
     << "  replicates=" << report.replicates << "  seed=" << report.base_seed << "\n";
  os << "---------------------------------------------------------------\n";
  for (const auto& cell : report.cells) {
    os << variant_name(cell.variant) << " / "
       << (cell.correct_mech ? "correct" : "misspecified") << " pi*"
       << "  (converged " << cell.converged << ", failed " << cell.failed << ")\n";
    os << "  measure";
    for (int j = 0; j < p; ++j) os << "     beta" << j;
    os << "\n";
    const auto row = [&](const char* name, const Vec& v) {
      os << "  " << name;
      for (int k = static_cast<int>(std::string(name).size()); k < 7; ++k) os << ' ';
      for (int j = 0; j < p; ++j) os << "  " << fmt(v[j]);
      os << "\n";
    };
    row("bias", cell.bias);
    row("std", cell.mc_std);
    row("std-hat", cell.std_hat_mean);
    row("cvg", cell.coverage);
  }
  return os.str();
}

std::string study_to_csv(const StudyReport& report) {
  std::ostringstream os;
  os << "scenario,variant,mechanism,coefficient,bias,std,std-hat,cvg\n";
  for (const auto& cell : report.cells) {
    for (int j = 0; j < cell.bias.size(); ++j) {
      os << report.scenario << "," << variant_name(cell.variant) << ","
         << (cell.correct_mech ? "correct" : "misspecified") << ",beta" << j << ","
         << cell.bias[j] << "," << cell.mc_std[j] << "," << cell.std_hat_mean[j] << ","
         << cell.coverage[j] << "\n";
    }
  }
  return os.str();
}

std::string fit_to_json(const FitReport& report) {
  nlohmann::json j;
  j["config"]["input"] = report.input;
  j["config"]["family"] = report.family;
  j["per_variant"] = nlohmann::json::object();
  for (const auto& vr : report.variants) {
    nlohmann::json v;
    v["coefficients"] = nlohmann::json::array();
    for (const auto& c : vr.coefficients) {
      v["coefficients"].push_back({{"name", c.name},
                                   {"estimate", c.estimate},
                                   {"std_error", c.std_error},
                                   {"z", c.z},
                                   {"p", c.p}});
    }
    v["diagnostics"] = {{"converged", vr.converged},
                        {"iterations", vr.iterations},
                        {"residual_norm", vr.residual_norm}};
    j["per_variant"][vr.label] = v;
  }
  return j.dump(2) + "\n";
}

std::string fit_to_table(const FitReport& report) {
  std::ostringstream os;
  for (const auto& vr : report.variants) {
    os << vr.label << (vr.converged ? "" : "  [NOT CONVERGED]") << "\n";
    os << "  coefficient      estimate   std error           z     p-value\n";
    for (const auto& c : vr.coefficients) {
      os << "  " << c.name;
      for (std::size_t k = c.name.size(); k < 12; ++k) os << ' ';
      os << "  " << fmt(c.estimate) << "      " << fmt(c.std_error) << "    "
         << fmt(c.z) << "    " << fmt(c.p) << "\n";
    }
  }
  return os.str();
}

std::string fit_to_csv(const FitReport& report) {
  std::ostringstream os;
  os << "variant,coefficient,estimate,std_error,z,p\n";
  for (const auto& vr : report.variants)
    for (const auto& c : vr.coefficients)
      os << vr.label << "," << c.name << "," << c.estimate << "," << c.std_error << ","
         << c.z << "," << c.p << "\n";
  return os.str();
}

}  // namespace shadowfit
