#include <doctest.h>

#include <chrono>
#include <cmath>

#include "selfsim/errors.hpp"
#include "selfsim/groundstate.hpp"

using namespace selfsim;

namespace {

// One-dimensional closed form ((p+1)/2)^{1/(p-1)} sech^{2/(p-1)}((p-1) r / 2).
double closed_form(double p, double r) {
  return std::pow(0.5 * (p + 1), 1 / (p - 1)) * std::pow(1 / std::cosh(0.5 * (p - 1) * r), 2 / (p - 1));
}

}  // namespace

TEST_CASE("cubic ground state in one dimension is sqrt(2) sech") {
  const auto t0 = std::chrono::steady_clock::now();
  const auto gs = solve_ground_state(3.0, 1);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(std::abs(gs.center - std::sqrt(2.0)) < 1e-8);
  double err = 0;
  for (Eigen::Index i = 0; i < gs.grid->size(); ++i)
    err = std::max(err, std::abs(gs.Q[i] - closed_form(3.0, gs.grid->r(i))));
  CHECK(err < 1e-6);
  CHECK(secs < 1.0);
}

TEST_CASE("one-dimensional closed form for other exponents") {
  for (double p : {2.0, 4.0, 5.0, 7.0}) {
    const auto gs = solve_ground_state(p, 1);
    CHECK(gs.center == doctest::Approx(std::pow(0.5 * (p + 1), 1 / (p - 1))).epsilon(1e-10));
    double err = 0;
    for (Eigen::Index i = 0; i < gs.grid->size(); ++i)
      err = std::max(err, std::abs(gs.Q[i] - closed_form(p, gs.grid->r(i))));
    CHECK(err < 1e-6);
  }
}

TEST_CASE("ground state shape invariants") {
  const auto gs = solve_ground_state(3.0, 3);
  CHECK(gs.center == doctest::Approx(4.3373877).epsilon(1e-7));
  for (Eigen::Index i = 1; i < gs.grid->size(); ++i) {
    CHECK(gs.Q[i] > 0);
    CHECK(gs.Q[i] < gs.Q[i - 1]);
  }
  CHECK(gs.Q[gs.grid->size() - 1] < 1e-8 * gs.center);
}

TEST_CASE("critical ground state has zero energy") {
  for (int N = 1; N <= 5; ++N) {
    const auto gs = solve_ground_state(critical_exponent(N), N);
    const double grad = pairing(*gs.grid, gs.dQ, gs.dQ);
    CHECK(std::abs(gs.energy) / grad < 1e-6);
  }
}

TEST_CASE("Pohozaev pairings") {
  for (auto [N, p] : {std::pair{1, 3.0}, std::pair{2, 3.0}, std::pair{3, 7.0 / 3}, std::pair{4, 2.5}}) {
    const auto rep = pohozaev_checks(solve_ground_state(p, N));
    CHECK(rep.with_q < 1e-6);
    CHECK(rep.with_lambda_q < 1e-6);
  }
}

TEST_CASE("kernel identities") {
  for (auto [N, p] : {std::pair{1, 3.0}, std::pair{2, 3.0}, std::pair{3, 7.0 / 3}}) {
    const auto rep = kernel_checks(solve_ground_state(p, N));
    CHECK(rep.lminus <= 1e-8);
    CHECK(rep.lplus_lambda <= 1e-6);
    if (N >= 2) CHECK(std::abs(rep.sector1_eigenvalue) < 1e-3);
    else CHECK(std::isnan(rep.sector1_eigenvalue));
  }
}

TEST_CASE("rho identity, residual and decay") {
  for (auto [N, p] : {std::pair{1, 3.0}, std::pair{2, 3.0}, std::pair{1, 5.2}}) {
    const auto gs = solve_ground_state(p, N);
    const auto rho = solve_rho(gs);
    const double lhs = 2 * pairing(*gs.grid, rho.rho.values, gs.Q);
    const double rhs = 0.25 * (1 + sigma_c(N, p)) * gs.moment2;
    CHECK(std::abs(lhs / rhs - 1) < 1e-6);
    CHECK(rho.residual <= 1e-8);
    CHECK(std::abs(rho.rho[rho.rho.size() - 1]) <= 1e-6 * rho.rho.values.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("grid doubling leaves Q(0) unchanged") {
  const auto a = solve_ground_state(3.0, 2, make_grid(ground_state_grid(2, 40, 0.02)));
  const auto b = solve_ground_state(3.0, 2, make_grid(ground_state_grid(2, 40, 0.01)));
  CHECK(std::abs(a.center / b.center - 1) <= 1e-8);
}

TEST_CASE("ground state domain errors") {
  CHECK_THROWS_AS(solve_ground_state(1.0, 2), DomainError);
  CHECK_THROWS_AS(solve_ground_state(5.0, 3), DomainError);
  CHECK_THROWS_AS(solve_ground_state(3.0, 6), DomainError);
  CHECK_THROWS_AS(solve_ground_state(3.0, 1, make_grid(ground_state_grid(1, 10))), ConfigurationError);
}
