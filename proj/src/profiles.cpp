#include "selfsim/profiles.hpp"

#include <cmath>

#include <Eigen/SparseLU>

#include "selfsim/errors.hpp"
#include "selfsim/shooting.hpp"

namespace selfsim {

double profile_radius(double b, double eta) {
  if (b == 0) throw DomainError("profile radius is infinite at b = 0");
  return 2.0 / std::abs(b) * std::sqrt(1.0 - eta);
}

double profile_inner_radius(double b, double eta) {
  return std::sqrt(1.0 - eta) * profile_radius(b, eta);
}

GridSpec profile_grid(int N, double b, double eta, double h) {
  GridSpec s;
  s.dimension = N;
  s.h = h;
  s.r_max = (b == 0) ? 40.0 : std::max(40.0, 1.25 * profile_radius(b, eta));
  return s;
}

Cutoff build_cutoff(const RadialGrid& grid, double b, double eta) {
  if (!(eta > 0 && eta < 1)) throw DomainError("eta must lie in (0, 1)");
  const Eigen::Index M = grid.size();
  Cutoff c;
  c.phi = Vec::Ones(M);
  c.dphi = Vec::Zero(M);
  c.lap = Vec::Zero(M);
  if (b == 0) {
    c.inner = c.outer = std::numeric_limits<double>::infinity();
    return c;
  }
  c.outer = profile_radius(b, eta);
  c.inner = profile_inner_radius(b, eta);
  if (c.outer > grid.r_max()) throw ConfigurationError("grid does not reach R_b");
  const Eigen::Index nodes = grid.locate(c.outer) - grid.locate(c.inner);
  if (nodes < 16) throw ConfigurationError("cutoff transition resolved by fewer than 16 nodes");
  const double width = c.outer - c.inner;
  const int N = grid.dimension();
  for (Eigen::Index i = 0; i < M; ++i) {
    const double r = grid.r(i);
    if (r <= c.inner) continue;
    if (r >= c.outer) {
      c.phi[i] = 0.0;
      continue;
    }
    const double t = (r - c.inner) / width;
    const double s = t * t * t * (10 - 15 * t + 6 * t * t);
    const double ds = 30 * t * t * (1 - t) * (1 - t);
    const double d2s = 60 * t * (1 - t) * (1 - 2 * t);
    c.phi[i] = 1.0 - s;
    c.dphi[i] = -ds / width;
    c.lap[i] = -d2s / (width * width) + (N - 1) / r * c.dphi[i];
  }
  return c;
}

P0Solution solve_P0_samples(double b, const GroundState& gs, double eta, const GridPtr& grid) {
  if (grid->dimension() != gs.N) throw UsageError("grid dimension does not match ground state");
  P0Solution out;
  out.b = b;
  if (b == 0) {
    require_same_grid(*grid, *gs.grid);
    out.center = gs.center;
    out.radius = std::numeric_limits<double>::infinity();
    out.P = gs.Q;
    out.dP = gs.dQ;
    return out;
  }
  if (!(eta > 0 && eta < 1)) throw DomainError("eta must lie in (0, 1)");
  const double R = profile_radius(b, eta);
  if (R > grid->r_max()) throw ConfigurationError("grid does not reach R_b");
  RadialOde ode{gs.N, gs.p, b};
  MatchedSolution m;
  try {
    // The center is fixed to exponential accuracy by the shot classification well inside
    // the confining region; the two-sided polish then imposes P(R_b) = 0.
    const double guess = bisect_center(ode, std::min(0.75 * R, 30.0), 0.5 * gs.center, 1.5 * gs.center);
    m = match_two_sided(ode, *grid, guess, std::min(5.0, 0.5 * R), R, 0.0, -1.0);
  } catch (const SolverFailure& e) {
    throw SolverFailure(std::string("P0 shooting failed (b too large for this eta?): ") + e.what());
  }
  if (std::abs(m.center - gs.center) > 0.5 * gs.center)
    throw SolverFailure("no admissible P(0) near Q(0): b too large for this eta");
  for (Eigen::Index i = 0; i < grid->size() && grid->r(i) < R; ++i)
    if (!(m.P[i] > 0)) throw SolverFailure("P0 is not positive on [0, R_b)");
  out.center = m.center;
  out.radius = R;
  out.P = m.P;
  out.dP = m.dP;
  return out;
}

RealField solve_P0(double b, const GroundState& gs, double eta, const GridPtr& grid) {
  return RealField(grid, solve_P0_samples(b, gs, eta, grid).P);
}

namespace {

CVec chirp(const RadialGrid& g, double b) {
  CVec e(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) e[i] = std::polar(1.0, -0.25 * b * g.r(i) * g.r(i));
  return e;
}

Vec truncated(const P0Solution& s, const Cutoff& c) { return c.phi.cwiseProduct(s.P); }

Vec leading(double b, const GroundState& gs, const GridPtr& grid, double eta) {
  return truncated(solve_P0_samples(b, gs, eta, grid), build_cutoff(*grid, b, eta));
}

double wnorm(const RadialGrid& g, const Vec& f) { return std::sqrt(pairing(g, f, f)); }

}  // namespace

SelfSimilarProfile build_leading_profile(double b, const GroundState& gs, const GridPtr& grid,
                                         const ProfileOptions& opt) {
  SelfSimilarProfile prof;
  prof.b = b;
  prof.p = gs.p;
  prof.N = gs.N;
  prof.eta = opt.eta;
  prof.sigma = opt.sigma.value_or(sigma_c(gs.N, gs.p));
  prof.grid = grid;
  prof.P0 = solve_P0_samples(b, gs, opt.eta, grid);
  prof.cutoff = build_cutoff(*grid, b, opt.eta);
  prof.radius = prof.cutoff.outer;
  prof.inner_radius = prof.cutoff.inner;
  prof.Pt = truncated(prof.P0, prof.cutoff);
  if (b == 0) {
    prof.dPt_db = Vec::Zero(grid->size());
  } else {
    const double db = opt.db_relative * std::abs(b);
    prof.dPt_db = (leading(b + db, gs, grid, opt.eta) - leading(b - db, gs, grid, opt.eta)) / (2 * db);
  }
  prof.T = CVec::Zero(grid->size());
  prof.xi = Vec::Zero(grid->size());
  prof.Q = prof.Pt.cast<cplx>().cwiseProduct(chirp(*grid, b));
  return prof;
}

Vec error_psi0_real(const SelfSimilarProfile& prof) {
  const auto& c = prof.cutoff;
  const Vec& P = prof.P0.P;
  const Vec& dP = prof.P0.dP;
  Vec out = Vec::Zero(P.size());
  for (Eigen::Index i = 0; i < P.size(); ++i) {
    const double phi = c.phi[i];
    if (phi == 1.0 || phi == 0.0) continue;
    const double Pp = std::pow(std::max(P[i], 0.0), prof.p);
    out[i] = -(2 * c.dphi[i] * dP[i] + P[i] * c.lap[i] + (std::pow(phi, prof.p) - phi) * Pp);
  }
  return out;
}

RadialField error_psi0(const SelfSimilarProfile& prof) {
  return RadialField(prof.grid, error_psi0_real(prof).cast<cplx>().cwiseProduct(chirp(*prof.grid, prof.b)));
}

Correction solve_correction(const SelfSimilarProfile& prof, const GroundState& gs) {
  const auto& g = *prof.grid;
  const Vec& r = g.nodes();
  const double b = prof.b;
  Correction out;
  const Vec r2 = r.cwiseAbs2();
  const Vec Pp1 = prof.Pt.cwiseMax(0.0).array().pow(prof.p - 1.0).matrix();
  const Vec confine = 1.0 - 0.25 * b * b * prof.cutoff.phi.cwiseProduct(r2).array();
  LinearizedOperator lplus{OperatorKind::Lplus_b, prof.grid, confine - prof.p * Pp1, 0};
  LinearizedOperator lminus{OperatorKind::Lminus_b, prof.grid, confine - Pp1, 0};

  Eigen::SparseLU<SpMat> lu;
  if (b == 0) {
    require_same_grid(g, *gs.grid);
    const auto rho = solve_rho(gs);
    out.mu = gs.mass / (2 * pairing(g, rho.rho.values, gs.Q));
    out.lambda_b = 0;
    out.xi = gs.Q / wnorm(g, gs.Q);
    out.T = (out.mu * rho.rho.values).cast<cplx>();
    out.residual_re = rho.residual;
    out.residual_im = 0;
    return out;
  }

  const auto ep = lowest_eigenpair(lminus);
  out.lambda_b = ep.value;
  out.xi = ep.vector.values;
  const double denom = pairing(g, prof.dPt_db, out.xi);
  if (std::abs(denom) < 1e-12 * wnorm(g, prof.dPt_db))
    throw SolverFailure("degenerate profile: (dP/db, xi_b) vanishes");
  out.mu = b * pairing(g, prof.Pt, out.xi) / denom;

  const Eigen::Index last = g.size() - 1;
  // Re T: (L_+)_b Re T = (mu/4) r^2 P~.
  SpMat A = assemble(lplus, true);
  Vec rhs = 0.25 * out.mu * r2.cwiseProduct(prof.Pt);
  rhs[last] = 0;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw SolverFailure("(L_+)_b factorization failed");
  const Vec reT = lu.solve(rhs);
  out.residual_re = (A * reT - rhs).norm() / rhs.norm();

  // Im T: (L_-)_b Im T = mu dP~/db - b P~, bordered by xi_b to stay orthogonal to it.
  const Vec f = out.mu * prof.dPt_db - b * prof.Pt;
  const Vec wxi = g.weights().cwiseProduct(out.xi);
  const Vec fproj = f - (pairing(g, f, out.xi) / pairing(g, out.xi, out.xi)) * out.xi;
  SpMat B = assemble(lminus, true);
  const Eigen::Index n = g.size();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(B.nonZeros() + 2 * n);
  for (int k = 0; k < B.outerSize(); ++k)
    for (SpMat::InnerIterator it(B, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i != last) t.emplace_back(i, n, out.xi[i]);
    t.emplace_back(n, i, wxi[i]);
  }
  SpMat Bb(n + 1, n + 1);
  Bb.setFromTriplets(t.begin(), t.end());
  Vec rb = Vec::Zero(n + 1);
  rb.head(n) = fproj;
  rb[last] = 0;
  lu.compute(Bb);
  if (lu.info() != Eigen::Success) throw SolverFailure("bordered (L_-)_b factorization failed");
  const Vec sol = lu.solve(rb);
  const Vec imT = sol.head(n);
  out.residual_im = (Bb * sol - rb).norm() / rb.norm();

  out.T.resize(n);
  out.T.real() = reT;
  out.T.imag() = imT;
  return out;
}

SelfSimilarProfile build_profile(double b, const GroundState& gs, const GridPtr& grid,
                                 const ProfileOptions& opt) {
  auto prof = build_leading_profile(b, gs, grid, opt);
  const auto c = solve_correction(prof, gs);
  prof.T = c.T;
  prof.mu = c.mu;
  prof.lambda_b = c.lambda_b;
  prof.xi = c.xi;
  prof.residual_re = c.residual_re;
  prof.residual_im = c.residual_im;
  prof.Q = (prof.Pt.cast<cplx>() + prof.sigma * prof.T).cwiseProduct(chirp(*grid, b));
  return prof;
}

namespace {

CVec laplace(const RadialGrid& g, const CVec& f) {
  CVec out(f.size());
  out.real() = g.laplacian() * f.real();
  out.imag() = g.laplacian() * f.imag();
  return out;
}

CVec nonlinear(const CVec& f, double p) {
  CVec out(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) out[i] = f[i] * std::pow(std::abs(f[i]), p - 1.0);
  return out;
}

// -Lap Q + Q - i b Lambda Q - Q |Q|^{p-1}
CVec stationary_residual(const SelfSimilarProfile& prof) {
  const auto& g = *prof.grid;
  const CVec lq = lambda_op(g, prof.Q, prof.p);
  return -laplace(g, prof.Q) + prof.Q - cplx(0, prof.b) * lq - nonlinear(prof.Q, prof.p);
}

}  // namespace

CVec full_error(const SelfSimilarProfile& prof, const GroundState& gs, double db_relative) {
  ProfileOptions opt;
  opt.eta = prof.eta;
  opt.sigma = prof.sigma;
  CVec dQ = CVec::Zero(prof.Q.size());
  if (prof.b != 0) {
    const double db = db_relative * std::abs(prof.b);
    const auto hi = build_profile(prof.b + db, gs, prof.grid, opt);
    const auto lo = build_profile(prof.b - db, gs, prof.grid, opt);
    dQ = (hi.Q - lo.Q) / (2 * db);
  }
  return cplx(0, -prof.sigma * prof.mu) * dQ + stationary_residual(prof);
}

ProfileInvariants profile_invariants(const SelfSimilarProfile& prof, const GroundState& gs) {
  const auto& g = *prof.grid;
  const RadialField Q(prof.grid, prof.Q);
  ProfileInvariants inv;
  inv.momentum = momentum(Q);
  inv.virial = virial_moment(Q);
  inv.virial_reference = -0.5 * prof.b * gs.moment2;
  inv.mass = mass(Q);
  inv.mass_excess = pairing(g, prof.Pt, prof.Pt) - gs.mass;
  inv.energy = energy(Q, prof.p);
  // 2E(1 - sigma) = Re(Lambda Q_b, Psi_b + i sigma mu dQ_b/db) + sigma |Q_b|^2.
  const CVec lq = lambda_op(g, prof.Q, prof.p);
  const double proj = pairing(g, lq, stationary_residual(prof));
  inv.energy_pohozaev = (proj + prof.sigma * inv.mass) / (2 * (1 - prof.sigma));
  return inv;
}

MuLimits mu_limits(const GroundState& gs, double sigma) {
  const auto rho = solve_rho(gs);
  MuLimits m;
  m.from_rho = gs.mass / (2 * pairing(*gs.grid, rho.rho.values, gs.Q));
  m.eight_over = 8 * gs.mass / ((1 + 2 * sigma) * gs.moment2);
  m.four_over = 4 * gs.mass / ((1 + sigma) * gs.moment2);
  return m;
}

}  // namespace selfsim
