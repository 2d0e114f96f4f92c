#include <doctest.h>

#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "dacs/analysis.hpp"
#include "dacs/ct_engine.hpp"
#include "dacs/scenario.hpp"

using namespace dacs;
using namespace dacs::analysis;

TEST_CASE("tracking error series") {
  Trajectory traj;
  traj.push(0.0, {0, 1}, Vector{{1.0, 3.0}}, Vector{{1.0, 3.0}}, 2.0);
  traj.push(0.1, {0, 1}, Vector{{2.0, 2.0}}, Vector{{1.0, 3.0}}, 2.0);
  auto err = tracking_error(traj);
  REQUIRE(err.size() == 2);
  CHECK(err[0][0] == -1.0);
  CHECK(err[1][0] == 1.0);
  CHECK(err[0][1] == 0.0);
  CHECK(err[1][1] == 0.0);

  // Identical signals at consensus: the error series is identically zero.
  Trajectory same;
  for (int k = 0; k < 5; ++k)
    same.push(0.1 * k, {0, 1, 2}, Vector::Constant(3, 1.5),
              Vector::Constant(3, 1.5), 1.5);
  for (const auto& series : tracking_error(same))
    for (double e : series) CHECK(e == 0.0);
}

TEST_CASE("steady state error over the tail window") {
  std::vector<double> zeros(100, 0.0);
  CHECK(steady_state_error(zeros, 0.2) == 0.0);
  std::vector<double> c(50, -0.7);
  CHECK(steady_state_error(c, 0.5) == doctest::Approx(0.7));
  std::vector<double> env(200);
  for (int k = 0; k < 200; ++k) env[k] = 0.3 * std::sin(0.21 * k);
  double oracle = 0.0;
  for (int k = 160; k < 200; ++k) oracle = std::max(oracle, std::abs(env[k]));
  CHECK(steady_state_error(env, 0.2) == doctest::Approx(oracle));
  CHECK_THROWS(steady_state_error(zeros, 0.0));
}

TEST_CASE("rate fit recovers exact geometric decays") {
  std::vector<double> series(60);
  for (int k = 0; k < 60; ++k) series[k] = 3.0 * std::pow(0.42, k);
  auto fit = fit_rate(series, 0, 25);
  CHECK(fit.rate == doctest::Approx(0.42).epsilon(1e-10));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-9));

  std::vector<double> flat(40, 0.9);
  auto flat_fit = fit_rate(flat, 0, 40);
  CHECK(flat_fit.rate == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS(fit_rate(series, 10, 11));
}

TEST_CASE("rate-fit window skips transients but stays above the floor") {
  std::vector<double> series(300);
  for (int k = 0; k < 300; ++k) series[k] = std::pow(0.9, k);
  auto [begin, end] = rate_fit_window(series);
  CHECK(begin == 50);
  CHECK(end > begin + 20);
  auto fit = fit_rate(series, begin, end);
  CHECK(fit.rate == doctest::Approx(0.9).epsilon(1e-10));

  // Fast decay: the window is pulled forward so it keeps 20 samples.
  std::vector<double> fast(300);
  for (int k = 0; k < 300; ++k) fast[k] = std::pow(0.3, k);
  auto [fb, fe] = rate_fit_window(fast);
  CHECK(fe - fb >= 20);
  CHECK(fb < 50);
  for (int k = fb; k < fe; ++k) CHECK(fast[k] > 1e-16);
}

TEST_CASE("symmetric-part ISS bound") {
  Matrix neg = -Matrix::Identity(3, 3);
  auto b1 = iss_sym_bound(neg);
  REQUIRE(b1.has_value());
  CHECK(b1->kappa == 1.0);
  CHECK(b1->lambda == doctest::Approx(1.0));

  Matrix diag = Matrix::Zero(2, 2);
  diag(0, 0) = -1.0;
  diag(1, 1) = -3.0;
  auto b2 = iss_sym_bound(diag);
  REQUIRE(b2.has_value());
  CHECK(b2->lambda == doctest::Approx(1.0));

  Matrix unstable = Matrix::Identity(2, 2);
  CHECK_FALSE(iss_sym_bound(unstable).has_value());
}

TEST_CASE("PI error-system constants come from the empirical fallback") {
  // Sym(A) of the PI error system always has a zero eigenvalue (the integral
  // coupling is skew), so the kappa = 1 route is inapplicable and the
  // matrix-exponential fit is used; A itself is Hurwitz.
  auto g = scenario::example_graph_b();
  auto [a, b] = ct::pidac_error_system(g, 1.0, 1.0);
  CHECK_FALSE(iss_sym_bound(a).has_value());

  auto fit = empirical_iss_fit(a);
  CHECK(fit.lambda > 0.0);
  for (int j = 0; j <= 40; ++j) {
    double t = 0.5 * j;
    double norm = (a * t).exp().operatorNorm();
    CHECK(norm <= fit.kappa * std::exp(-fit.lambda * t) * (1.0 + 1e-9));
  }
  CHECK(b.operatorNorm() > 0.0);
}

TEST_CASE("error decomposition round-trips") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss;
  for (int n : {2, 4, 9}) {
    auto basis = disagreement_basis(n);
    Vector ones_err = 0.37 * Vector::Ones(n);
    auto d1 = decompose_error(ones_err, basis);
    CHECK(d1.consensus_component == doctest::Approx(0.37 * std::sqrt(double(n))));
    CHECK(d1.disagreement.cwiseAbs().maxCoeff() < 1e-12);

    Vector perp(n);
    for (int i = 0; i < n; ++i) perp(i) = gauss(rng);
    perp -= Vector::Constant(n, perp.mean());
    auto d2 = decompose_error(perp, basis);
    CHECK(std::abs(d2.consensus_component) < 1e-12);
    CHECK((d2.disagreement - basis.r.transpose() * perp).cwiseAbs().maxCoeff() <
          1e-12);

    Vector e(n);
    for (int i = 0; i < n; ++i) e(i) = gauss(rng);
    auto d3 = decompose_error(e, basis);
    Vector back = basis.full() *
                  (Vector(n) << d3.consensus_component, d3.disagreement).finished();
    CHECK((back - e).norm() < 1e-12);
  }
}
