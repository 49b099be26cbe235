#include <doctest.h>

#include <cmath>

#include "shadowfit/quadrature.hpp"
#include "shadowfit/rng.hpp"

using namespace shadowfit;

namespace {

// dense-trapezoid oracle for integrals against the standard normal density
double trapezoid_normal_moment(int k, double lo = -12.0, double hi = 12.0, int n = 400001) {
  double s = 0.0;
  const double h = (hi - lo) / (n - 1);
  for (int i = 0; i < n; ++i) {
    const double t = lo + i * h;
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    s += w * std::pow(t, k) * std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI);
  }
  return s * h;
}

double normal_moment(int k) {
  // 0 for odd k, (k-1)!! for even k
  if (k % 2 == 1) return 0.0;
  double m = 1.0;
  for (int j = k - 1; j > 1; j -= 2) m *= j;
  return m;
}

}  // namespace

TEST_CASE("gauss-hermite weights are normalized and exact to degree 2n-1") {
  for (const int n : {1, 2, 5, 15, 31, 64}) {
    const RawRule rule = gauss_hermite(n);
    REQUIRE(rule.nodes.size() == n);
    CHECK(rule.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
    for (int j = 1; j < n; ++j) CHECK(rule.nodes[j] > rule.nodes[j - 1]);
    for (int k = 0; k <= 2 * n - 1 && k <= 29; ++k) {
      // symmetric-pair summation: the rule is +/- symmetric, so odd-degree
      // cancellation is exact when paired terms are added together
      double s = 0.0;
      for (int j = 0; j < n / 2; ++j)
        s += rule.weights[j] *
             (std::pow(rule.nodes[j], k) + std::pow(rule.nodes[n - 1 - j], k));
      if (n % 2 == 1) s += rule.weights[n / 2] * std::pow(rule.nodes[n / 2], k);
      CHECK(std::abs(s - normal_moment(k)) < 1e-10 * std::max(1.0, normal_moment(k)));
    }
  }
  CHECK_THROWS(gauss_hermite(0));
  CHECK_THROWS(gauss_hermite(65));
}

TEST_CASE("fourth normal moment equals the trapezoid oracle") {
  const RawRule rule = gauss_hermite(15);
  double s = 0.0;
  for (int j = 0; j < 15; ++j) s += rule.weights[j] * std::pow(rule.nodes[j], 4);
  CHECK(s == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(s == doctest::Approx(trapezoid_normal_moment(4)).epsilon(1e-9));
}

TEST_CASE("affine grid integrates a standard normal density to one") {
  const YGrid grid = y_grid_affine(25, 0.0, 1.5);
  const double mass = integrate_y(
      grid, std::function<double(double)>([](double t) {
        return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI);
      }));
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("integrate_y is linear and handles the binary grid exactly") {
  const YGrid bin = y_grid_binary();
  CHECK(integrate_y(bin, std::function<double(double)>([](double t) { return t; })) == 1.0);
  CHECK(integrate_y(bin, std::function<double(double)>([](double) { return 0.0; })) == 0.0);

  const YGrid grid = y_grid_affine(15, 0.3, 1.2);
  auto g1 = [](double t) { return std::exp(-0.5 * t * t); };
  auto g2 = [](double t) { return std::cos(t) * std::exp(-t * t); };
  const double a = 2.75;
  const double lhs = integrate_y(grid, std::function<double(double)>(
                                           [&](double t) { return a * g1(t) + g2(t); }));
  const double rhs = a * integrate_y(grid, std::function<double(double)>(g1)) +
                     integrate_y(grid, std::function<double(double)>(g2));
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-14));

  CHECK_THROWS(integrate_y(grid, std::function<double(double)>([](double t) {
                 return 1.0 / (t - t);  // NaN at every node
               })));
}

TEST_CASE("y_grid placement from data") {
  OutcomeModel logistic{OutcomeFamily::logistic_binary, 1, 1.0};
  OutcomeModel gaussian{OutcomeFamily::linear_gaussian, 1, 1.0};

  Dataset d;
  d.r = {1, 1, 1, 1};
  d.y.resize(4);
  d.y << -1.0, 0.0, 1.0, 2.0;  // mean 0.5, sd ~1.29
  d.u.resize(4, 0);
  d.z = Mat::Ones(4, 1);

  const YGrid bin = y_grid(logistic, d, 15);
  CHECK(bin.kind == YGridKind::discrete_support);
  CHECK(bin.nodes[0] == 0.0);
  CHECK(bin.nodes[1] == 1.0);
  CHECK(bin.weights[0] == 1.0);

  const YGrid g = y_grid(gaussian, d, 15);
  CHECK(g.kind == YGridKind::gauss_hermite_affine);
  CHECK(g.center == doctest::Approx(0.5).epsilon(1e-14));
  const double sd = std::sqrt((1.5 * 1.5 + 0.25 + 0.25 + 2.25) / 3.0);
  CHECK(g.scale == doctest::Approx(1.5 * sd).epsilon(1e-12));

  Dataset degenerate = d;
  degenerate.y.setConstant(2.0);
  CHECK_THROWS_WITH_AS(static_cast<void>(y_grid(gaussian, degenerate, 15)),
                       doctest::Contains("degenerate"), std::invalid_argument);

  Dataset thin = d;
  thin.r = {1, 0, 0, 0};
  thin.y << 1.0, std::nan(""), std::nan(""), std::nan("");
  CHECK_THROWS(static_cast<void>(y_grid(gaussian, thin, 15)));
}

TEST_CASE("tensor grid shapes and weights") {
  const RawRule gh6 = gauss_hermite(6);
  const XGrid g3 = tensor_grid({gh6, gh6, gh6});
  CHECK(g3.points.rows() == 216);
  CHECK(g3.points.cols() == 3);
  CHECK(g3.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));

  const XGrid g1 = tensor_grid({gh6});
  CHECK(g1.points.rows() == 6);
  for (int j = 0; j < 6; ++j) {
    CHECK(g1.points(j, 0) == gh6.nodes[j]);
    CHECK(g1.weights[j] == gh6.weights[j]);
  }

  CHECK_THROWS(tensor_grid({gh6, gh6, gh6, gh6, gh6}));
}

TEST_CASE("mvn tensor rule reproduces first and second moments") {
  Vec mean(2);
  mean << 0.4, -0.7;
  Mat cov(2, 2);
  cov << 1.0, 0.5, 0.5, 1.0;
  const XGrid g = mvn_grid(mean, cov, 8);
  Vec m1 = Vec::Zero(2);
  Mat m2 = Mat::Zero(2, 2);
  for (int q = 0; q < g.points.rows(); ++q) {
    m1 += g.weights[q] * g.points.row(q).transpose();
    m2 += g.weights[q] * g.points.row(q).transpose() * g.points.row(q);
  }
  CHECK((m1 - mean).cwiseAbs().maxCoeff() < 1e-12);
  const Mat cov_hat = m2 - mean * mean.transpose();
  CHECK((cov_hat - cov).cwiseAbs().maxCoeff() < 1e-12);
}
