#include "selfsim/radiation.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include <Eigen/SparseLU>

#include "selfsim/errors.hpp"
#include "selfsim/numerics.hpp"
#include "selfsim/profiles.hpp"

namespace selfsim {

double theta(double w) {
  if (!(w >= 0)) throw DomainError("theta needs w >= 0");
  if (w <= 2) return 0.5 * w * std::sqrt(1 - 0.25 * w * w) + std::asin(0.5 * w);
  return 0.25 * M_PI * w;
}

cplx far_field_root(int N, double b, double r) {
  const cplx B((N - 1) / r, b * r);
  const cplx C(-1.0, 0.5 * b * N);
  const cplx s = std::sqrt(B * B - 4.0 * C);
  // mu = -2C / (B +- s); the larger denominator gives the small root without cancellation
  const cplx den = std::abs(B + s) >= std::abs(B - s) ? B + s : B - s;
  return -2.0 * C / den;
}

GridSpec radiation_grid(int N, double b, double eta, double h) {
  const double R = profile_radius(b, eta);
  GridSpec s;
  s.dimension = N;
  s.h = h;
  s.r_max = 5 * R * R;
  return s;
}

RadiationSolution solve_radiation(double b, const RadialField& psi0) {
  validate(psi0);
  const auto& g = *psi0.grid;
  if (!(b > 0)) throw DomainError("radiation needs b > 0");
  if (b * g.r_max() < 8) throw ConfigurationError("far-field closure ill-conditioned: b r_max < 8");
  const Eigen::Index n = g.size();
  const int N = g.dimension();
  const Eigen::Index last = n - 1;

  using CSp = Eigen::SparseMatrix<cplx>;
  std::vector<Eigen::Triplet<cplx>> t;
  t.reserve(g.laplacian().nonZeros() + g.d1().nonZeros() + n + 16);
  const cplx ib(0, b);
  for (int k = 0; k < g.laplacian().outerSize(); ++k)
    for (SpMat::InnerIterator it(g.laplacian(), k); it; ++it)
      if (it.row() != last) t.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < g.d1().outerSize(); ++k)
    for (SpMat::InnerIterator it(g.d1(), k); it; ++it)
      if (it.row() != last) t.emplace_back(it.row(), it.col(), ib * g.r(it.row()) * it.value());
  for (Eigen::Index i = 0; i < last; ++i) t.emplace_back(i, i, cplx(-1.0, 0.5 * b * N));
  const auto& dend = g.boundary_derivative();
  for (Eigen::Index j = 0; j < n; ++j)
    if (dend[j] != 0) t.emplace_back(last, j, dend[j]);
  t.emplace_back(last, last, -far_field_root(N, b, g.r_max()));
  CSp A(n, n);
  A.setFromTriplets(t.begin(), t.end());

  CVec rhs = psi0.values;
  rhs[last] = 0;
  RadiationSolution sol;
  sol.b = b;
  sol.grid = psi0.grid;
  if (rhs.cwiseAbs().maxCoeff() == 0) {
    sol.zeta = CVec::Zero(n);
    return sol;
  }
  Eigen::SparseLU<CSp> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw SolverFailure("radiation system is singular");
  sol.zeta = lu.solve(rhs);
  sol.residual = (A * sol.zeta - rhs).norm() / rhs.norm();
  if (!(sol.residual < 1e-8)) throw SolverFailure("radiation solve residual " + std::to_string(sol.residual));
  for (Eigen::Index i = n - 1; i >= 0; --i)
    if (psi0.values[i] != cplx(0)) {
      sol.source_radius = g.r(i);
      break;
    }
  CVec dz(n);
  dz.real() = g.d1() * sol.zeta.real();
  dz.imag() = g.d1() * sol.zeta.imag();
  sol.gradient_norm2 = pairing(g, dz, dz);
  return sol;
}

GammaEstimate extract_Gamma(const RadiationSolution& sol, double max_flatness) {
  const auto& g = *sol.grid;
  const double R = sol.source_radius;
  if (!(R > 0)) throw UsageError("radiation solution has no source");
  GammaEstimate e;
  e.r_lo = 2 * R * R;
  e.r_hi = 4 * R * R;
  if (g.r_max() < e.r_hi) throw ConfigurationError("radiation grid does not reach 4 R_b^2");
  std::vector<double> v;
  for (Eigen::Index i = g.locate(e.r_lo); i < g.size() && g.r(i) <= e.r_hi; ++i)
    v.push_back(std::pow(g.r(i), g.dimension()) * std::norm(sol.zeta[i]));
  if (v.size() < 8) throw ConfigurationError("extraction window holds fewer than 8 nodes");
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  e.flatness = *hi / *lo;
  e.gamma = median(v);
  if (!(e.flatness <= max_flatness))
    throw SolverFailure("no plateau in r^N |zeta|^2 (flatness " + std::to_string(e.flatness) + ")");
  return e;
}

double exponent_constant(double b, double gamma, double eta) {
  return std::abs(-b * std::log(gamma) / (2 * theta(2.0)) - 1) / eta;
}

RadiationSolution radiation_for(int N, double p, double b, double eta, double h, double r_max_factor) {
  GridSpec s = radiation_grid(N, b, eta, h);
  s.r_max *= r_max_factor / 5.0;
  const auto grid = make_grid(s);
  const auto gs = solve_ground_state(p, N);
  ProfileOptions opt;
  opt.eta = eta;
  const auto prof = build_leading_profile(b, gs, grid, opt);
  return solve_radiation(b, error_psi0(prof));
}

std::vector<GammaRow> gamma_sweep(int N, double p, const std::vector<double>& bs, double eta, int workers,
                                  double h) {
  auto one = [&](double b) {
    const auto sol = radiation_for(N, p, b, eta, h);
    GammaRow row;
    row.b = b;
    row.estimate = extract_Gamma(sol, std::numeric_limits<double>::infinity());
    row.normalized_exponent = -b * std::log(row.estimate.gamma) / M_PI;
    row.gradient_norm2 = sol.gradient_norm2;
    return row;
  };
  std::vector<GammaRow> rows(bs.size());
  workers = std::max(1, workers);
  for (std::size_t start = 0; start < bs.size(); start += static_cast<std::size_t>(workers)) {
    std::vector<std::future<GammaRow>> batch;
    for (std::size_t k = start; k < std::min(bs.size(), start + workers); ++k)
      batch.push_back(std::async(std::launch::async, one, bs[k]));
    for (std::size_t k = 0; k < batch.size(); ++k) rows[start + k] = batch[k].get();
  }
  return rows;
}

}  // namespace selfsim
