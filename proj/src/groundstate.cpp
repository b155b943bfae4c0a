#include "selfsim/groundstate.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SparseLU>

#include "selfsim/errors.hpp"
#include "selfsim/fv.hpp"
#include "selfsim/shooting.hpp"
#include "selfsim/spectral.hpp"

namespace selfsim {

GridSpec ground_state_grid(int N, double r_max, double h) {
  GridSpec s;
  s.dimension = N;
  s.r_max = r_max;
  s.h = h;
  return s;
}

namespace {

double norm2(const RadialGrid& g, const Vec& f) { return std::sqrt(pairing(g, f, f)); }

}  // namespace

GroundState solve_ground_state(double p, int N, GridPtr grid) {
  if (N < 1 || N > 5) throw DomainError("dimension must lie in 1..5");
  if (!(p > 1.0)) throw DomainError("exponent p must exceed 1");
  if (N >= 3 && !(p < (N + 2.0) / (N - 2.0))) throw DomainError("exponent is not energy-subcritical");
  if (!grid) grid = make_grid(ground_state_grid(N));
  if (grid->dimension() != N) throw UsageError("grid dimension does not match N");
  if (grid->r_max() < 20.0) throw ConfigurationError("ground state needs r_max >= 20");

  RadialOde ode{N, p, 0.0};
  const double r_end = std::min(grid->r_max(), 30.0);
  const double lo = 1.0 + 1e-3;
  const double hi = std::pow(0.5 * (p + 1.0), 1.0 / (p - 1.0)) * (1.0 + 0.5 * N);
  const double guess = bisect_center(ode, r_end, lo, hi, true);

  // Decaying tail Q ~ r^{-(N-1)/2} e^{-r} fixes the inward slope at r_max.
  const double R = grid->r_max();
  const double slope = -1.0 - 0.5 * (N - 1) / R;
  const auto m = match_two_sided(ode, *grid, guess, 5.0, R, 1.0, slope);

  GroundState gs;
  gs.N = N;
  gs.p = p;
  gs.grid = grid;
  gs.Q = m.P;
  gs.dQ = m.dP;
  gs.center = m.center;
  if ((gs.Q.array() <= 0).any() && gs.Q.minCoeff() < -1e-14 * gs.center)
    throw SolverFailure("ground state is not positive");
  const Vec& r = grid->nodes();
  gs.mass = pairing(*grid, gs.Q, gs.Q);
  gs.moment2 = pairing(*grid, gs.Q, Vec(gs.Q.cwiseProduct(r.cwiseAbs2())));
  const Vec potential = gs.Q.cwiseAbs().array().pow(p + 1.0);
  gs.energy = 0.5 * pairing(*grid, gs.dQ, gs.dQ) - integrate(*grid, potential) / (p + 1.0);
  return gs;
}

Rho solve_rho(const GroundState& gs) {
  const auto op = make_Lplus(gs);
  SpMat A = assemble(op, true);
  const Vec& r = gs.grid->nodes();
  Vec rhs = 0.25 * r.cwiseAbs2().cwiseProduct(gs.Q);
  rhs[rhs.size() - 1] = 0.0;
  Eigen::SparseLU<SpMat> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw SolverFailure("L_+ factorization failed");
  Vec rho = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !rho.allFinite()) throw SolverFailure("L_+ solve failed");
  Rho out;
  out.rho = RealField(gs.grid, rho);
  out.residual = (A * rho - rhs).norm() / rhs.norm();
  return out;
}

KernelReport kernel_checks(const GroundState& gs) {
  const auto& g = *gs.grid;
  KernelReport rep;
  const double qn = norm2(g, gs.Q);
  const Vec lm = apply(make_Lminus(gs), gs.Q);
  rep.lminus = norm2(g, lm) / qn;
  const Vec lq = (2.0 / (gs.p - 1.0)) * gs.Q + g.nodes().cwiseProduct(gs.dQ);
  const Vec lp = apply(make_Lplus(gs), lq) + 2.0 * gs.Q;
  rep.lplus_lambda = norm2(g, lp) / qn;
  rep.sector1_eigenvalue = std::numeric_limits<double>::quiet_NaN();
  if (gs.N >= 2) {
    const auto op = make_Lplus(gs);
    rep.sector1_eigenvalue = sector_spectrum(g, op.potential, 1, 1)[0];
  }
  return rep;
}

PohozaevReport pohozaev_checks(const GroundState& gs) {
  const auto& g = *gs.grid;
  const double N = gs.N, p = gs.p;
  const double grad = pairing(g, gs.dQ, gs.dQ);
  const double l2 = gs.mass;
  const double lp = integrate(g, gs.Q.array().pow(p + 1.0).matrix());
  PohozaevReport rep;
  // Pairing with Q: -|grad Q|^2 - |Q|^2 + |Q|_{p+1}^{p+1} = 0.
  rep.with_q = std::abs(-grad - l2 + lp) / lp;
  // Pairing with Lambda Q (Pohozaev): (N-2)/2 |grad Q|^2 + N/2 |Q|^2 - N/(p+1) |Q|^{p+1} = 0.
  rep.with_lambda_q = std::abs(0.5 * (N - 2) * grad + 0.5 * N * l2 - N / (p + 1) * lp) / lp;
  return rep;
}

}  // namespace selfsim
