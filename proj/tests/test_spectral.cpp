#include <doctest.h>

#include <cmath>

#include "selfsim/errors.hpp"
#include "selfsim/spectral.hpp"

using namespace selfsim;

TEST_CASE("spectral property in one dimension") {
  const auto rep = verify_spectral_property(1);
  CHECK(rep.property_holds());
  CHECK(rep.delta1 == doctest::Approx(0.234).epsilon(0.02));
  CHECK(rep.sectors.size() == 4);
}

TEST_CASE("spectral property in dimensions two to four") {
  for (int N = 2; N <= 4; ++N) {
    const auto rep = verify_spectral_property(N);
    CHECK(rep.property_holds());
    CHECK(rep.monotone_in_sector);
    CHECK(rep.sectors.size() == 8);
    for (const auto& s : rep.sectors) CHECK(s.gram_condition < 1e8);
  }
}

TEST_CASE("five dimensions: printed radial constraints leave a negative direction") {
  const auto printed = verify_spectral_property(5);
  CHECK_FALSE(printed.property_holds());
  CHECK(printed.sectors[0].minimum < -0.1);
  const auto moment = verify_spectral_property(5, {}, ConstraintVariant::moment);
  CHECK(moment.property_holds());
}

TEST_CASE("delta1 is stable under grid and domain doubling") {
  const auto base = verify_spectral_property(2, {30, 0.05, 4});
  const auto fine = verify_spectral_property(2, {30, 0.025, 4});
  const auto wide = verify_spectral_property(2, {60, 0.05, 4});
  CHECK(std::abs(fine.delta1 / base.delta1 - 1) < 0.1);
  CHECK(std::abs(wide.delta1 / base.delta1 - 1) < 0.1);
}

TEST_CASE("constraints are necessary") {
  for (int N = 1; N <= 3; ++N) CHECK(unconstrained_sector0_minimum(N) <= 0);
}

TEST_CASE("coercivity transfer on random constrained samples") {
  for (int N = 1; N <= 4; ++N) {
    const auto rep = coercivity_transfer(N, {}, 32);
    CHECK(rep.minimum > 0);
    CHECK(rep.sampled_minimum >= rep.minimum - 1e-12);
  }
}

TEST_CASE("lowest eigenpair of L_- is the ground state") {
  const auto gs = solve_ground_state(3.0, 2);
  const auto ep = lowest_eigenpair(make_Lminus(gs));
  CHECK(std::abs(ep.value) < 1e-8);
  CHECK(ep.residual <= 1e-8);
  CHECK(ep.vector[0] > 0);
  const Vec q = gs.Q / std::sqrt(pairing(*gs.grid, gs.Q, gs.Q));
  const Vec diff = ep.vector.values - q;
  CHECK(std::sqrt(pairing(*gs.grid, diff, diff)) < 1e-6);
}

TEST_CASE("L_+ has a negative eigenvalue in the radial sector") {
  const auto gs = solve_ground_state(3.0, 1);
  const auto ep = lowest_eigenpair(make_Lplus(gs));
  // Sech^2 well: -d^2 + 1 - 6 sech^2 has lowest eigenvalue 1 - 4 = -3.
  CHECK(ep.value == doctest::Approx(-3.0).epsilon(1e-8));
}

TEST_CASE("assembled matrix agrees with apply in the interior") {
  const auto gs = solve_ground_state(3.0, 1);
  const auto op = make_Lplus(gs);
  const SpMat A = assemble(op, true);
  const Vec x = gs.Q;
  const Vec d = A * x - apply(op, x);
  CHECK(d.head(d.size() - 1).cwiseAbs().maxCoeff() < 1e-10 * x.cwiseAbs().maxCoeff());
  CHECK((A * x)[x.size() - 1] == doctest::Approx(x[x.size() - 1]));
}

TEST_CASE("virial form H_p") {
  const auto gs = solve_ground_state(3.2, 1);
  const auto& g = gs.grid;
  RadialField zero(g);
  CHECK(virial_form_Hp(zero, gs) == 0.0);

  Vec bump = (-(g->nodes().array() - 1.0).square()).exp();
  RadialField re(g, bump.cast<cplx>());
  RadialField im(g, cplx(0, 1) * bump.cast<cplx>());
  // Swapping real and imaginary parts swaps the potential coefficients p(p-1)/2 <-> (p-1)/2.
  const double grad = gradient_norm2(re);
  const double a = virial_form_Hp(re, gs) - grad;
  const double b = virial_form_Hp(im, gs) - grad;
  CHECK(a / b == doctest::Approx(3.2).epsilon(1e-12));

  RadialField mixed(g, (bump.cast<cplx>() * cplx(1.0, 2.0)));
  CHECK(virial_form_Hp(mixed, gs) == doctest::Approx(grad * 5 + a + 4 * b).epsilon(1e-10));
}

TEST_CASE("virial potentials approach the critical ones") {
  const int N = 2;
  const auto crit = solve_ground_state(critical_exponent(N), N);
  const Vec Vc = make_curlyL1(crit).potential;
  std::vector<double> diffs;
  for (double dp : {0.2, 0.1, 0.05, 0.025}) {
    const auto gs = solve_ground_state(critical_exponent(N) + dp, N);
    diffs.push_back((make_curlyL1(gs).potential - Vc).cwiseAbs().maxCoeff());
  }
  for (std::size_t i = 1; i < diffs.size(); ++i) CHECK(diffs[i] < 0.6 * diffs[i - 1]);
  CHECK(diffs.back() < 0.2 * diffs.front());
}

TEST_CASE("spectral domain errors") {
  CHECK_THROWS_AS(verify_spectral_property(6), DomainError);
  LinearizedOperator op;
  op.grid = make_grid({});
  op.potential = Vec::Zero(3);
  CHECK_THROWS_AS(assemble(op), UsageError);
}
