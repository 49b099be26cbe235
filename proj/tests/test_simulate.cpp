#include <doctest.h>

#include <cmath>

#include "shadowfit/rng.hpp"
#include "shadowfit/simulate.hpp"

using namespace shadowfit;

TEST_CASE("generators are deterministic and hit the documented missingness") {
  const auto s1 = ScenarioSpec::make(ScenarioId::S1);
  CHECK(s1.N == 500);
  const Dataset a = generate(s1, 42);
  const Dataset b = generate(s1, 42);
  CHECK(a.y.size() == b.y.size());
  CHECK((a.y.array().isNaN() == b.y.array().isNaN()).all());
  for (int i = 0; i < a.N(); ++i) {
    CHECK(a.r[static_cast<std::size_t>(i)] == b.r[static_cast<std::size_t>(i)]);
    if (a.r[static_cast<std::size_t>(i)]) CHECK(a.y[i] == b.y[i]);
    CHECK(a.z(i, 0) == b.z(i, 0));
  }
  const Dataset c = generate(s1, 43);
  CHECK(c.z(0, 0) != a.z(0, 0));

  // realized missingness across replicates: ~1/3 for S1, ~0.20 for S3
  double miss1 = 0.0, miss3 = 0.0;
  const int reps = 100;
  const auto s3 = ScenarioSpec::make(ScenarioId::S3, 1000);
  for (int rep = 0; rep < reps; ++rep) {
    const Dataset d1 = generate(s1, derive_seed(7, rep));
    miss1 += 1.0 - static_cast<double>(d1.n_observed()) / d1.N();
    const Dataset d3 = generate(s3, derive_seed(8, rep));
    miss3 += 1.0 - static_cast<double>(d3.n_observed()) / d3.N();
  }
  miss1 /= reps;
  miss3 /= reps;
  CHECK(std::abs(miss1 - 1.0 / 3.0) < 0.05);
  CHECK(std::abs(miss3 - 0.20) < 0.05);
}

TEST_CASE("scenario shapes") {
  const auto s2 = ScenarioSpec::make(ScenarioId::S2);
  CHECK(s2.N == 1000);
  const Dataset d2 = generate(s2, 1);
  CHECK(d2.u_dim() == 0);
  CHECK(d2.z_dim() == 3);
  CHECK(s2.truth.size() == 4);

  const auto s4 = ScenarioSpec::make(ScenarioId::S4);
  CHECK(s4.N == 2000);
  const Dataset d4 = generate(s4, 1);
  CHECK(d4.u_dim() == 1);
  CHECK(d4.z_dim() == 1);
  for (int i = 0; i < d4.N(); ++i) {
    CHECK((d4.u(i, 0) == 0.0 || d4.u(i, 0) == 1.0));
    CHECK((d4.z(i, 0) == 0.0 || d4.z(i, 0) == 1.0));
  }

  // covariate moments of S2 follow the AR(1) design
  Mat X = d2.covariate_matrix();
  Mat cov = (X.rowwise() - X.colwise().mean()).transpose() *
            (X.rowwise() - X.colwise().mean()) / (X.rows() - 1);
  CHECK(cov(0, 1) == doctest::Approx(0.5).epsilon(0.2));
  CHECK(cov(0, 2) == doctest::Approx(0.25).epsilon(0.45));
}

TEST_CASE("a two-replicate smoke study emits a well-formed report") {
  const auto spec = ScenarioSpec::make(ScenarioId::S1, 120);
  const StudyReport rep =
      run_study(spec, {{Variant::empirical, true}}, 2, 99);
  REQUIRE(rep.cells.size() == 1);
  CHECK(rep.replicates == 2);
  CHECK(rep.cells[0].converged + rep.cells[0].failed == 2);
  CHECK(rep.cells[0].bias.size() == 2);
  CHECK(rep.cells[0].coverage.size() == 2);
  CHECK((rep.cells[0].coverage.array() >= 0.0).all());
  CHECK((rep.cells[0].coverage.array() <= 1.0).all());
  CHECK(rep.wall_seconds >= 0.0);
}

TEST_CASE("studies are reproducible") {
  const auto spec = ScenarioSpec::make(ScenarioId::S1, 150);
  const std::vector<StudyVariant> cells = {{Variant::empirical, true},
                                           {Variant::empirical, false}};
  const StudyReport a = run_study(spec, cells, 4, 2024);
  const StudyReport b = run_study(spec, cells, 4, 2024);
  for (std::size_t c = 0; c < a.cells.size(); ++c) {
    CHECK((a.cells[c].bias - b.cells[c].bias).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.cells[c].std_hat_mean - b.cells[c].std_hat_mean).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.cells[c].converged == b.cells[c].converged);
  }
}

TEST_CASE("rng basics") {
  Rng rng(1);
  double mean = 0.0, var = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double g = rng.normal();
    mean += g;
    var += g * g;
  }
  mean /= n;
  var = var / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);

  // derive_seed decorrelates consecutive replicate streams
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}
