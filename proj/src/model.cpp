#include "shadowfit/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "shadowfit/simd/ops.hpp"

namespace shadowfit {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

void check_x_dim(const OutcomeModel& model, ConstVecRef x) {
  if (x.size() != model.covariate_dim)
    throw std::invalid_argument("covariate dimension mismatch");
}

void check_binary_y(double y) {
  if (y != 0.0 && y != 1.0)
    throw std::invalid_argument("binary outcome must be 0 or 1");
}

double clip(double p, double delta) {
  if (p < delta) return delta;
  if (p > 1.0 - delta) return 1.0 - delta;
  return p;
}
}  // namespace

void OutcomeModel::validate() const {
  if (covariate_dim < 1) throw std::invalid_argument("covariate_dim must be >= 1");
  if (family == OutcomeFamily::linear_gaussian && !(sigma > 0.0))
    throw std::invalid_argument("sigma must be positive");
}

double linear_predictor(const ParamVector& beta, ConstVecRef x) {
  if (beta.size() != x.size() + 1)
    throw std::invalid_argument("beta length must be covariate_dim + 1");
  return beta[0] + beta.tail(x.size()).dot(x);
}

double outcome_density(const OutcomeModel& model, const ParamVector& beta,
                       double y, ConstVecRef x) {
  check_x_dim(model, x);
  const double eta = linear_predictor(beta, x);
  if (model.family == OutcomeFamily::linear_gaussian) {
    const double zres = (y - eta) / model.sigma;
    return kInvSqrt2Pi / model.sigma * std::exp(-0.5 * zres * zres);
  }
  check_binary_y(y);
  double p;
  if (eta >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-eta));
  } else {
    const double e = std::exp(eta);
    p = e / (1.0 + e);
  }
  return y == 1.0 ? p : 1.0 - p;
}

Vec outcome_density_grad(const OutcomeModel& model, const ParamVector& beta,
                         double y, ConstVecRef x) {
  // density * d log-density / d eta * (1, x)
  const double f = outcome_density(model, beta, y, x);
  const double eta = linear_predictor(beta, x);
  double dlog_deta;
  if (model.family == OutcomeFamily::linear_gaussian) {
    dlog_deta = (y - eta) / (model.sigma * model.sigma);
  } else {
    double p;
    if (eta >= 0.0) {
      p = 1.0 / (1.0 + std::exp(-eta));
    } else {
      const double e = std::exp(eta);
      p = e / (1.0 + e);
    }
    dlog_deta = y - p;
  }
  Vec g(beta.size());
  g[0] = f * dlog_deta;
  g.tail(x.size()) = (f * dlog_deta) * x;
  return g;
}

Vec outcome_score(const OutcomeModel& model, const ParamVector& beta,
                  double y, ConstVecRef x) {
  check_x_dim(model, x);
  const double eta = linear_predictor(beta, x);
  double dlog_deta;
  if (model.family == OutcomeFamily::linear_gaussian) {
    dlog_deta = (y - eta) / (model.sigma * model.sigma);
  } else {
    check_binary_y(y);
    double p;
    if (eta >= 0.0) {
      p = 1.0 / (1.0 + std::exp(-eta));
    } else {
      const double e = std::exp(eta);
      p = e / (1.0 + e);
    }
    dlog_deta = y - p;
  }
  Vec s(beta.size());
  s[0] = dlog_deta;
  s.tail(x.size()) = dlog_deta * x;
  return s;
}

Vec logistic_vec(const Vec& eta) {
  Vec out(eta.size());
  simd::ops().logistic_v(eta.data(), out.data(), static_cast<std::size_t>(eta.size()));
  return out;
}

MechanismModel MechanismModel::logistic_y(double c0, double c1, double clip) {
  MechanismModel m;
  m.form = MechanismForm::logistic_in_y;
  m.c0 = c0;
  m.c1 = c1;
  m.delta_clip = clip;
  return m;
}

MechanismModel MechanismModel::logistic_yu(double c0, double c1, Vec cu, double clip) {
  MechanismModel m;
  m.form = MechanismForm::logistic_in_y_u;
  m.c0 = c0;
  m.c1 = c1;
  m.c_u = std::move(cu);
  m.delta_clip = clip;
  return m;
}

MechanismModel MechanismModel::tabulated(std::function<double(double, ConstVecRef)> fn,
                                         double clip) {
  MechanismModel m;
  m.form = MechanismForm::user_table;
  m.table = std::move(fn);
  m.delta_clip = clip;
  return m;
}

void MechanismModel::validate() const {
  if (!(delta_clip > 0.0 && delta_clip < 0.5))
    throw std::invalid_argument("delta_clip must lie in (0, 0.5)");
  if (form == MechanismForm::user_table && !table)
    throw std::invalid_argument("user_table mechanism needs a table function");
}

double MechanismModel::prob(double y, ConstVecRef u) const {
  double p;
  switch (form) {
    case MechanismForm::logistic_in_y: {
      const double eta = c0 + c1 * y;
      p = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                     : std::exp(eta) / (1.0 + std::exp(eta));
      break;
    }
    case MechanismForm::logistic_in_y_u: {
      if (u.size() != c_u.size())
        throw std::invalid_argument("mechanism u dimension mismatch");
      const double eta = c0 + c1 * y + c_u.dot(u);
      p = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                     : std::exp(eta) / (1.0 + std::exp(eta));
      break;
    }
    case MechanismForm::user_table:
      p = table(y, u);
      break;
    default:
      throw std::logic_error("unknown mechanism form");
  }
  return clip(p, delta_clip);
}

int Dataset::n_observed() const {
  int n = 0;
  for (const auto ri : r) n += ri ? 1 : 0;
  return n;
}

Observation Dataset::row(int i) const {
  Observation o;
  o.r = r[static_cast<std::size_t>(i)] != 0;
  o.y = y[i];
  o.u = u.row(i).transpose();
  o.z = z.row(i).transpose();
  return o;
}

Vec Dataset::x_row(int i) const {
  Vec x(x_dim());
  if (u_dim() > 0) x.head(u_dim()) = u.row(i).transpose();
  x.tail(z_dim()) = z.row(i).transpose();
  return x;
}

Mat Dataset::covariate_matrix() const {
  Mat X(N(), x_dim());
  if (u_dim() > 0) X.leftCols(u_dim()) = u;
  X.rightCols(z_dim()) = z;
  return X;
}

void Dataset::validate() const {
  const auto n = static_cast<Eigen::Index>(r.size());
  if (y.size() != n || u.rows() != n || z.rows() != n)
    throw std::invalid_argument("dataset columns disagree on N");
  if (z.cols() < 1)
    throw std::invalid_argument("shadow covariate z cannot be empty");
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool observed = r[static_cast<std::size_t>(i)] != 0;
    if (observed && !std::isfinite(y[i]))
      throw std::invalid_argument("observed outcome is not finite");
    if (!observed && !std::isnan(y[i]))
      throw std::invalid_argument("missing outcome must be stored as NaN");
  }
  if (!u.allFinite() || !z.allFinite())
    throw std::invalid_argument("covariates must be finite");
}

}  // namespace shadowfit
