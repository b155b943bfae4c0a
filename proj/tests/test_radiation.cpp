#include <doctest.h>

#include <chrono>
#include <cmath>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "selfsim/errors.hpp"
#include "selfsim/numerics.hpp"
#include "selfsim/profiles.hpp"
#include "selfsim/radiation.hpp"

using namespace selfsim;

namespace {

struct Sweep {
  std::vector<double> b, log_gamma, flatness;
};

const Sweep& critical_sweep() {
  static const Sweep s = [] {
    Sweep out;
    for (const auto& row : gamma_sweep(2, critical_exponent(2), {0.30, 0.25, 0.20, 0.15}, 0.1, 4)) {
      out.b.push_back(row.b);
      out.log_gamma.push_back(std::log(row.estimate.gamma));
      out.flatness.push_back(row.estimate.flatness);
    }
    return out;
  }();
  return s;
}

struct Setup {
  GridPtr grid;
  SelfSimilarProfile prof;
  RadiationSolution sol;
  GammaEstimate est;
};

Setup setup(double b, const GroundState& gs) {
  auto grid = make_grid(radiation_grid(gs.N, b, 0.1));
  auto prof = build_leading_profile(b, gs, grid);
  auto sol = solve_radiation(b, error_psi0(prof));
  auto est = extract_Gamma(sol);
  return {grid, std::move(prof), std::move(sol), est};
}

}  // namespace

TEST_CASE("theta closed form") {
  CHECK(theta(0) == 0.0);
  CHECK(theta(2) == doctest::Approx(M_PI / 2).epsilon(1e-15));
  CHECK(theta(4) == doctest::Approx(M_PI).epsilon(1e-15));
  boost::math::quadrature::tanh_sinh<double> q;
  for (double w : {0.1, 0.5, 1.0, 1.5, 1.9, 2.0}) {
    const double ref = q.integrate([](double z) { return std::sqrt(std::max(0.0, 1 - 0.25 * z * z)); }, 0.0, w);
    CHECK(std::abs(theta(w) - ref) < 1e-10);
  }
  CHECK_THROWS_AS(theta(-0.1), DomainError);
}

TEST_CASE("far-field root is the slow characteristic root") {
  for (int N : {1, 2, 3}) {
    for (double b : {0.1, 0.3}) {
      const double r = 200;
      const cplx mu = far_field_root(N, b, r);
      const cplx res = mu * mu + cplx((N - 1) / r, b * r) * mu + cplx(-1, 0.5 * b * N);
      CHECK(std::abs(res) < 1e-12);
      // leading order -N/(2r) - i/(b r)
      CHECK(mu.real() == doctest::Approx(-0.5 * N / r).epsilon(0.05));
      CHECK(mu.imag() == doctest::Approx(-1 / (b * r)).epsilon(0.05));
    }
  }
}

TEST_CASE("zero source gives zero radiation and the problem is linear") {
  const auto gs = solve_ground_state(critical_exponent(2), 2);
  auto grid = make_grid(radiation_grid(2, 0.3, 0.1));
  const auto prof = build_leading_profile(0.3, gs, grid);
  RadialField zero(grid);
  CHECK(solve_radiation(0.3, zero).zeta.cwiseAbs().maxCoeff() == 0.0);
  const auto psi = error_psi0(prof);
  const auto one = solve_radiation(0.3, psi);
  const auto two = solve_radiation(0.3, RadialField(grid, CVec(2.0 * psi.values)));
  CHECK((two.zeta - 2.0 * one.zeta).norm() <= 1e-10 * one.zeta.norm());
  CHECK(extract_Gamma(two).gamma == doctest::Approx(4 * extract_Gamma(one).gamma).epsilon(1e-9));
  CHECK(one.residual < 1e-8);
}

TEST_CASE("Gamma_b follows exp(-pi/b) at the critical exponent in two dimensions") {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& s = critical_sweep();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 120);
  std::vector<double> x;
  for (std::size_t k = 0; k < s.b.size(); ++k) {
    CHECK(s.flatness[k] <= 1.25);
    CHECK(s.log_gamma[k] < 0);
    x.push_back(-2 * theta(2) / s.b[k]);
  }
  const auto fit = linear_fit(x, s.log_gamma);
  CHECK(fit.slope >= 0.8);
  CHECK(fit.slope <= 1.2);
  // local slopes and pointwise exponents both approach one as b decreases
  double prev_gap = 1e300, prev_norm = 0;
  for (std::size_t k = 1; k < s.b.size(); ++k) {
    const double local = (s.log_gamma[k] - s.log_gamma[k - 1]) / (x[k] - x[k - 1]);
    CHECK(std::abs(local - 1) < prev_gap);
    prev_gap = std::abs(local - 1);
  }
  for (std::size_t k = 0; k < s.b.size(); ++k) {
    const double normalized = s.log_gamma[k] / x[k];
    CHECK(normalized > prev_norm);
    prev_norm = normalized;
  }
}

TEST_CASE("Gamma_b is stable under doubling r_max and halving h") {
  const double p = critical_exponent(2);
  const double base = extract_Gamma(radiation_for(2, p, 0.2)).gamma;
  CHECK(extract_Gamma(radiation_for(2, p, 0.2, 0.1, 0.01, 10.0)).gamma == doctest::Approx(base).epsilon(0.02));
  CHECK(extract_Gamma(radiation_for(2, p, 0.2, 0.1, 0.005)).gamma == doctest::Approx(base).epsilon(0.02));
}

TEST_CASE("exponent constant brackets Gamma_b") {
  const auto& s = critical_sweep();
  for (std::size_t k = 0; k < s.b.size(); ++k) {
    const double C = exponent_constant(s.b[k], std::exp(s.log_gamma[k]), 0.1);
    const double lo = -2 * (1 + C * 0.1) * theta(2) / s.b[k];
    const double hi = -2 * (1 - C * 0.1) * theta(2) / s.b[k];
    CHECK(s.log_gamma[k] >= lo - 1e-9);
    CHECK(s.log_gamma[k] <= hi + 1e-9);
  }
}

TEST_CASE("radiation bounds across a b-sweep") {
  const auto gs = solve_ground_state(critical_exponent(2), 2);
  double prev_grad = 0, prev_db = 0, prev_src = -1e300;
  std::vector<double> tail;
  for (double b : {0.3, 0.25, 0.2, 0.15}) {
    const auto c = setup(b, gs);
    const auto& g = *c.grid;
    const double half_log = 0.5 * std::log(c.est.gamma);
    // Dirichlet energy exponent approaches that of Gamma_b
    const double grad = std::log(c.sol.gradient_norm2) / (2 * half_log);
    CHECK(grad > prev_grad);
    CHECK(grad < 1);
    prev_grad = grad;
    // compact zone: |zeta e^{-s theta(b r)/b}| <= Gamma^{1/2 + s/10}
    for (double s : {0.5, 1.0, 2.0, 4.0}) {
      double m = 0;
      for (Eigen::Index i = 0; i < g.size() && g.r(i) <= c.prof.radius; ++i)
        m = std::max(m, std::abs(c.sol.zeta[i]) * std::exp(-s * theta(b * g.r(i)) / b));
      CHECK(std::log(m) <= (1 + s / 5) * half_log);
    }
    // gradient tail: |zeta'| r^{1+N/2} b / Gamma^{1/2} bounded beyond R_b^2
    CVec dz(g.size());
    dz.real() = g.d1() * c.sol.zeta.real();
    dz.imag() = g.d1() * c.sol.zeta.imag();
    double t = 0;
    for (Eigen::Index i = 0; i < g.size(); ++i)
      if (g.r(i) >= c.prof.radius * c.prof.radius)
        t = std::max(t, std::abs(dz[i]) * std::pow(g.r(i), 2.0) * b / std::sqrt(c.est.gamma));
    tail.push_back(t);
    // b-derivative: log sup|d zeta/db| / log Gamma^{1/2} increases toward one
    const double db = 1e-3 * b;
    const auto hi = solve_radiation(b + db, error_psi0(build_leading_profile(b + db, gs, c.grid)));
    const auto lo = solve_radiation(b - db, error_psi0(build_leading_profile(b - db, gs, c.grid)));
    const double d = std::log(((hi.zeta - lo.zeta) / (2 * db)).cwiseAbs().maxCoeff()) / half_log;
    CHECK(d > prev_db);
    CHECK(d < 1);
    prev_db = d;
    // weighted leading error (1 + r^2) Psi0 against Gamma^{1/2}: exponent ratio increasing
    const Vec e0 = error_psi0_real(c.prof);
    double w = 0;
    for (Eigen::Index i = 0; i < g.size(); ++i) w = std::max(w, (1 + g.r(i) * g.r(i)) * std::abs(e0[i]));
    const double src = std::log(w) / half_log;
    CHECK(src > prev_src);
    prev_src = src;
  }
  for (double t : tail) CHECK(t == doctest::Approx(tail.back()).epsilon(0.1));
}

TEST_CASE("radiation configuration errors") {
  const auto gs = solve_ground_state(critical_exponent(1), 1);
  auto small = make_grid(profile_grid(1, 0.1, 0.1));
  const auto prof = build_leading_profile(0.1, gs, small);
  // b r_max = 4 < 8
  CHECK_THROWS_AS(solve_radiation(0.1, error_psi0(prof)), ConfigurationError);
  GridSpec s = profile_grid(1, 0.3, 0.1);
  const auto mid = make_grid(s);
  const auto p2 = build_leading_profile(0.3, gs, mid);
  const auto sol = solve_radiation(0.3, error_psi0(p2));
  // grid stops short of 4 R_b^2
  CHECK_THROWS_AS(extract_Gamma(sol), ConfigurationError);
  CHECK_THROWS_AS(solve_radiation(-0.3, error_psi0(p2)), DomainError);
}
