#include <doctest.h>

#include <cmath>
#include <numbers>

#include "selfsim/errors.hpp"
#include "selfsim/grid.hpp"

using namespace selfsim;

namespace {

GridPtr grid(int N, double rmax = 30, double h = 0.01) {
  GridSpec s;
  s.dimension = N;
  s.r_max = rmax;
  s.h = h;
  return make_grid(s);
}

RealField sample(const GridPtr& g, double (*f)(double)) {
  Vec v(g->size());
  for (Eigen::Index i = 0; i < g->size(); ++i) v[i] = f(g->r(i));
  return RealField(g, v);
}

double gauss(double r) { return std::exp(-0.5 * r * r); }
double sech(double r) { return 1.0 / std::cosh(r); }

double gauss_laplacian_error(double h) {
  auto g = grid(3, 12, h);
  const auto lap = laplacian(sample(g, gauss));
  double err = 0;
  for (Eigen::Index i = 0; i < g->size(); ++i) {
    const double r = g->r(i);
    err = std::max(err, std::abs(lap[i] - (r * r - 3) * gauss(r)));
  }
  return err;
}

}  // namespace

TEST_CASE("unit sphere areas") {
  CHECK(unit_sphere_area(1) == doctest::Approx(2.0));
  CHECK(unit_sphere_area(2) == doctest::Approx(2 * std::numbers::pi));
  CHECK(unit_sphere_area(3) == doctest::Approx(4 * std::numbers::pi));
}

TEST_CASE("nodes start at the origin and increase") {
  auto g = grid(2, 50, 0.05);
  CHECK(g->r(0) == 0.0);
  CHECK(g->r_max() == 50.0);
  for (Eigen::Index i = 1; i < g->size(); ++i) CHECK(g->r(i) > g->r(i - 1));
}

TEST_CASE("laplacian of a Gaussian in three dimensions") {
  CHECK(gauss_laplacian_error(0.02) < 1e-6);
}

TEST_CASE("laplacian of a constant vanishes") {
  auto g = grid(2);
  const auto lap = laplacian(RealField(g, Vec::Ones(g->size())));
  CHECK(lap.values.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("laplacian of sech in one dimension") {
  auto g = grid(1, 20, 0.01);
  const auto lap = laplacian(sample(g, sech));
  double err = 0;
  for (Eigen::Index i = 0; i + 2 < g->size(); ++i) {
    const double s = sech(g->r(i));
    err = std::max(err, std::abs(lap[i] - (s - 2 * s * s * s)));
  }
  CHECK(err < 1e-7);
}

TEST_CASE("halving the step reduces the laplacian error at sixth order") {
  const double ratio = gauss_laplacian_error(0.04) / gauss_laplacian_error(0.02);
  CHECK(ratio > 40.0);
  CHECK(ratio < 90.0);
}

TEST_CASE("laplacian is symmetric under the quadrature pairing") {
  auto g = grid(3, 20, 0.02);
  const auto f = sample(g, gauss);
  const auto h = sample(g, [](double r) { return std::exp(-r * r) * (1 + r * r); });
  const double lhs = pairing(laplacian(f), h);
  const double rhs = pairing(f, laplacian(h));
  CHECK(std::abs(lhs - rhs) < 1e-7);
}

TEST_CASE("quadrature of r^(N-1) e^(-r) reproduces the Gamma function") {
  for (int N = 1; N <= 5; ++N) {
    auto g = grid(N, 60, 0.01);
    Vec f = (-g->nodes().array()).exp();
    const double exact = unit_sphere_area(N) * std::tgamma(N);
    CHECK(std::abs(integrate(*g, f) / exact - 1) < 1e-8);
  }
}

TEST_CASE("Gregory weights integrate low-degree polynomials exactly") {
  GridSpec s;
  s.mapping = Mapping::uniform;
  s.r_max = 3;
  s.h = 0.1;
  auto g = make_grid(s);
  Vec f = g->nodes().array().pow(5);
  CHECK(integrate(*g, f) == doctest::Approx(2 * std::pow(3.0, 6) / 6).epsilon(1e-12));
}

TEST_CASE("Gaussian mass in one dimension") {
  auto g = grid(1);
  CHECK(mass(complexify(sample(g, gauss))) == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-10));
}

TEST_CASE("momentum vanishes for real and radial fields") {
  auto g = grid(2);
  CHECK(momentum(complexify(sample(g, gauss))) == 0.0);
  RadialField chirp(g, CVec(g->size()));
  for (Eigen::Index i = 0; i < g->size(); ++i)
    chirp.values[i] = gauss(g->r(i)) * std::polar(1.0, -0.3 * g->r(i) * g->r(i));
  CHECK(std::abs(momentum(chirp)) < 1e-14);
}

TEST_CASE("virial moment of a chirped Gaussian") {
  // f = e^{-r^2/2 - i c r^2}: Im(r f' conj f) = -2 c r^2 e^{-r^2}.
  auto g = grid(1);
  const double c = 0.3;
  RadialField f(g, CVec(g->size()));
  for (Eigen::Index i = 0; i < g->size(); ++i)
    f.values[i] = std::polar(gauss(g->r(i)), -c * g->r(i) * g->r(i));
  const double exact = -2 * c * std::sqrt(std::numbers::pi) / 2;
  CHECK(virial_moment(f) == doctest::Approx(exact).epsilon(1e-9));
}

TEST_CASE("scale generators") {
  auto g = grid(1, 40, 0.01);
  const auto f = complexify(sample(g, [](double r) { return r * r * std::exp(-r); }));
  const auto h = complexify(sample(g, gauss));

  SUBCASE("D = Lambda + sigma_c at every node") {
    const double p = 3.0;
    const auto s = scale_generators(f, p);
    const CVec diff = s.dilation.values - s.lambda.values - sigma_c(1, p) * f.values;
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-13);
  }
  SUBCASE("critical exponent makes them equal") {
    const auto s = scale_generators(f, critical_exponent(1));
    CHECK((s.dilation.values - s.lambda.values).cwiseAbs().maxCoeff() < 1e-13);
  }
  SUBCASE("D is antisymmetric") {
    const auto df = scale_generators(f, 3.0).dilation;
    const auto dh = scale_generators(h, 3.0).dilation;
    CHECK(std::abs(pairing(df, h) + pairing(f, dh)) < 1e-8);
  }
  SUBCASE("p <= 1 is a domain error") { CHECK_THROWS_AS(scale_generators(f, 1.0), DomainError); }
}

TEST_CASE("weighted norm") {
  auto g = grid(1, 60);
  // integral over the line of e^{-|x|} = 2.
  CHECK(weighted_norm2(complexify(RealField(g, Vec::Ones(g->size())))) ==
        doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("error paths") {
  GridSpec tiny;
  tiny.r_max = 0.02;
  tiny.h = 0.01;
  CHECK_THROWS_AS(make_grid(tiny), ConfigurationError);
  GridSpec bad;
  bad.dimension = 6;
  CHECK_THROWS_AS(make_grid(bad), ConfigurationError);

  auto a = grid(1, 10);
  auto b = grid(1, 11);
  RadialField fa(a), fb(b);
  CHECK_THROWS_AS(pairing(fa, fb), UsageError);
  RadialField odd(a, CVec::Zero(a->size()), Parity::odd);
  CHECK_THROWS_AS(laplacian(odd), UsageError);
  RadialField nan(a);
  nan.values[3] = std::nan("");
  CHECK_THROWS_AS(mass(nan), UsageError);
}

TEST_CASE("serialization") {
  auto g = grid(1, 5, 0.5);
  const auto j = to_json(RadialField(g));
  CHECK(j["grid"]["dimension"] == 1);
  CHECK(j["re"].size() == static_cast<std::size_t>(g->size()));
}
