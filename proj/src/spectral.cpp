#include "selfsim/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include "selfsim/errors.hpp"
#include "selfsim/fv.hpp"

namespace selfsim {

std::string to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::Lplus: return "Lplus";
    case OperatorKind::Lminus: return "Lminus";
    case OperatorKind::Lplus_b: return "Lplus_b";
    case OperatorKind::Lminus_b: return "Lminus_b";
    case OperatorKind::curlyL1: return "curlyL1";
    case OperatorKind::curlyL2: return "curlyL2";
    case OperatorKind::Hp_real: return "Hp_real";
    case OperatorKind::Hp_imag: return "Hp_imag";
  }
  return "unknown";
}

namespace {

Vec power(const Vec& q, double e) { return q.cwiseMax(0.0).array().pow(e).matrix(); }

// r Q' Q^{p-2}, written as r Q' / Q * Q^{p-1} so that p < 2 stays finite in the tail.
Vec virial_weight(const GroundState& gs) {
  const Vec& r = gs.grid->nodes();
  Vec out(gs.Q.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double q = gs.Q[i];
    out[i] = (q > 0) ? r[i] * gs.dQ[i] * std::pow(q, gs.p - 2.0) : 0.0;
  }
  return out;
}

// Q'' from the equation.
Vec second_derivative(const GroundState& gs) {
  const Vec& r = gs.grid->nodes();
  Vec out(gs.Q.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double q = gs.Q[i];
    const double rest = q - std::pow(std::max(q, 0.0), gs.p);
    out[i] = (i == 0) ? rest / gs.N : -(gs.N - 1) / r[i] * gs.dQ[i] + rest;
  }
  return out;
}

}  // namespace

LinearizedOperator make_Lplus(const GroundState& gs) {
  return {OperatorKind::Lplus, gs.grid, Vec(1.0 - gs.p * power(gs.Q, gs.p - 1.0).array()), 0};
}

LinearizedOperator make_Lminus(const GroundState& gs) {
  return {OperatorKind::Lminus, gs.grid, Vec(1.0 - power(gs.Q, gs.p - 1.0).array()), 0};
}

LinearizedOperator make_curlyL1(const GroundState& gs) {
  const double c = 0.5 * gs.p * (gs.p - 1.0);
  return {OperatorKind::curlyL1, gs.grid, Vec(c * virial_weight(gs)), 0};
}

LinearizedOperator make_curlyL2(const GroundState& gs) {
  const double c = 0.5 * (gs.p - 1.0);
  return {OperatorKind::curlyL2, gs.grid, Vec(c * virial_weight(gs)), 0};
}

SpMat assemble(const LinearizedOperator& op, bool dirichlet) {
  if (op.sector != 0) throw UsageError("fourth-order assembly supports sector 0 only");
  const auto& g = *op.grid;
  if (op.potential.size() != g.size()) throw UsageError("potential length mismatch");
  SpMat A = -g.laplacian();
  A += SpMat(op.potential.asDiagonal());
  if (dirichlet) {
    const Eigen::Index last = g.size() - 1;
    A.prune([last](Eigen::Index row, Eigen::Index, double) { return row != last; });
    A.coeffRef(last, last) = 1.0;
  }
  A.makeCompressed();
  return A;
}

Vec apply(const LinearizedOperator& op, const Vec& f) {
  if (op.sector != 0) throw UsageError("fourth-order apply supports sector 0 only");
  return -(op.grid->laplacian() * f) + op.potential.cwiseProduct(f);
}

Eigenpair lowest_eigenpair(const LinearizedOperator& op) {
  const auto& g = *op.grid;
  SpMat A = assemble(op, false);
  const Eigen::Index last = g.size() - 1;
  // Dirichlet row pushed far up the spectrum.
  A.prune([last](Eigen::Index row, Eigen::Index, double) { return row != last; });
  A.coeffRef(last, last) = 1e8;
  A.makeCompressed();
  SpMat I(g.size(), g.size());
  I.setIdentity();

  auto wnorm = [&](const Vec& x) { return std::sqrt(pairing(g, x, x)); };
  Eigenpair out;
  Vec x = (-g.nodes().array()).exp().matrix();
  x /= wnorm(x);
  double shift = op.potential.minCoeff() - 1.0;
  double lambda = shift;
  Eigen::SparseLU<SpMat> lu;
  auto factor = [&](double s) {
    lu.compute(A - s * I);
    if (lu.info() != Eigen::Success) throw SolverFailure("eigen-solve factorization failed");
  };
  factor(shift);
  auto residual = [&](const Vec& v, double l) {
    Vec res = A * v - l * v;
    res[last] = 0;
    return wnorm(res);
  };
  double res = 1.0;
  for (int it = 0; it < 400; ++it) {
    x = lu.solve(x);
    x /= wnorm(x);
    lambda = pairing(g, x, Vec(A * x)) / pairing(g, x, x);
    res = residual(x, lambda);
    out.history.push_back(lambda);
    if (res < 1e-4) break;
  }
  for (int it = 0; it < 8 && res > 1e-10; ++it) {
    factor(lambda);
    x = lu.solve(x);
    x /= wnorm(x);
    lambda = pairing(g, x, Vec(A * x)) / pairing(g, x, x);
    res = residual(x, lambda);
    out.history.push_back(lambda);
  }
  if (!(res <= 1e-8))
    throw SolverFailure("lowest eigenpair did not converge (residual " + std::to_string(res) + ")");
  if (x[0] < 0) x = -x;
  out.value = lambda;
  out.vector = RealField(op.grid, x);
  out.residual = res;
  return out;
}

namespace {

struct SectorProblem {
  Eigen::MatrixXd A, B;
};

// Dense finite-volume matrices of (-Delta + V) and (-Delta + e^{-r}) in sector ell.
SectorProblem sector_forms(const RadialGrid& g, const Vec& V, int ell) {
  const auto fv = finite_volume(g);
  const Eigen::Index M = g.size();
  const Eigen::Index first = (ell >= 1) ? 1 : 0;
  const Eigen::Index n = M - first;
  const double cl = centrifugal_coefficient(g.dimension(), ell);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < M; ++i) {
    const double k = fv.conductance[i];
    const Eigen::Index a = i - first, b = i + 1 - first;
    if (a >= 0) K(a, a) += k;
    K(b, b) += k;
    if (a >= 0) {
      K(a, b) -= k;
      K(b, a) -= k;
    }
  }
  for (Eigen::Index i = first; i < M; ++i)
    if (i > 0) K(i - first, i - first) += fv.volume[i] * cl / (g.r(i) * g.r(i));
  SectorProblem sp{K, K};
  for (Eigen::Index i = first; i < M; ++i) {
    sp.A(i - first, i - first) += fv.volume[i] * V[i];
    sp.B(i - first, i - first) += fv.volume[i] * std::exp(-g.r(i));
  }
  return sp;
}

struct Constrained {
  Eigen::MatrixXd Z;
  double gram_condition = 1;
};

Constrained null_space(const RadialGrid& g, const std::vector<Vec>& constraints, int ell) {
  const auto fv = finite_volume(g);
  const Eigen::Index first = (ell >= 1) ? 1 : 0;
  const Eigen::Index n = g.size() - first;
  const Eigen::Index m = static_cast<Eigen::Index>(constraints.size());
  Constrained out;
  if (m == 0) {
    out.Z = Eigen::MatrixXd::Identity(n, n);
    return out;
  }
  Eigen::MatrixXd C(n, m);
  for (Eigen::Index j = 0; j < m; ++j)
    C.col(j) = fv.volume.tail(n).cwiseProduct(constraints[j].tail(n));
  Eigen::MatrixXd gram(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b)
      gram(a, b) = (fv.volume.tail(n).cwiseProduct(constraints[a].tail(n))).dot(constraints[b].tail(n));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ge(gram, Eigen::EigenvaluesOnly);
  out.gram_condition = ge.eigenvalues().maxCoeff() / ge.eigenvalues().minCoeff();
  if (!(out.gram_condition < 1e12)) throw SolverFailure("constraint Gram matrix ill-conditioned");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(C);
  Eigen::MatrixXd Qfull = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  out.Z = Qfull.rightCols(n - m);
  return out;
}

double constrained_minimum(const SectorProblem& sp, const Eigen::MatrixXd& Z) {
  const Eigen::MatrixXd A = Z.transpose() * sp.A * Z;
  const Eigen::MatrixXd B = Z.transpose() * sp.B * Z;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (A + A.transpose()), 0.5 * (B + B.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw SolverFailure("generalized eigen-solve failed");
  return es.eigenvalues().minCoeff();
}

struct CriticalProfiles {
  GroundState gs;
  Vec lq, l2q, rq, r2q, dq, d2q;
};

CriticalProfiles critical_profiles(int N, const SpectralGrid& spec) {
  GridSpec s;
  s.dimension = N;
  s.r_max = spec.r_max;
  s.h = spec.h;
  s.stretch = spec.stretch;
  CriticalProfiles c{solve_ground_state(critical_exponent(N), N, make_grid(s)), {}, {}, {}, {}, {}, {}};
  const auto& gs = c.gs;
  const Vec& r = gs.grid->nodes();
  const double alpha = 2.0 / (gs.p - 1.0);
  const Vec q2 = second_derivative(gs);
  c.lq = alpha * gs.Q + r.cwiseProduct(gs.dQ);
  const Vec dlq = (alpha + 1.0) * gs.dQ + r.cwiseProduct(q2);
  c.l2q = alpha * c.lq + r.cwiseProduct(dlq);
  c.rq = r.cwiseProduct(gs.Q);
  c.r2q = r.cwiseAbs2().cwiseProduct(gs.Q);
  // At the critical exponent D = Lambda.
  c.dq = c.lq;
  c.d2q = c.l2q;
  return c;
}

}  // namespace

SpectralReport verify_spectral_property(int N, const SpectralGrid& spec, ConstraintVariant set) {
  if (N < 1 || N > 5) throw DomainError("spectral property is checked for N in 1..5");
  const auto c = critical_profiles(N, spec);
  const auto& g = *c.gs.grid;
  const Vec V1 = make_curlyL1(c.gs).potential;
  const Vec V2 = make_curlyL2(c.gs).potential;
  SpectralReport rep;
  rep.N = N;
  rep.variant = set;
  rep.delta1 = std::numeric_limits<double>::infinity();
  const int max_sector = (N == 1) ? 1 : 3;
  for (int ell = 0; ell <= max_sector; ++ell) {
    for (int part = 1; part <= 2; ++part) {
      std::vector<Vec> cons;
      if (ell == 0 && part == 1)
        cons = {c.gs.Q, set == ConstraintVariant::printed ? c.lq : c.r2q};
      if (ell == 0 && part == 2) cons = {c.lq, c.l2q};
      if (ell == 1 && part == 1) cons = {c.rq};
      if (ell == 1 && part == 2) cons = {c.gs.dQ};
      const auto sp = sector_forms(g, part == 1 ? V1 : V2, ell);
      const auto ns = null_space(g, cons, ell);
      SectorMinimum sm;
      sm.sector = ell;
      sm.part = part;
      sm.minimum = constrained_minimum(sp, ns.Z);
      sm.gram_condition = ns.gram_condition;
      sm.constraints = static_cast<int>(cons.size());
      rep.delta1 = std::min(rep.delta1, sm.minimum);
      rep.sectors.push_back(sm);
    }
  }
  for (const auto& a : rep.sectors)
    for (const auto& b : rep.sectors)
      if (a.part == b.part && a.sector >= 2 && b.sector == a.sector + 1 && b.minimum < a.minimum)
        rep.monotone_in_sector = false;
  return rep;
}

double unconstrained_sector0_minimum(int N, const SpectralGrid& spec) {
  const auto c = critical_profiles(N, spec);
  const auto sp = sector_forms(*c.gs.grid, make_curlyL2(c.gs).potential, 0);
  return constrained_minimum(sp, Eigen::MatrixXd::Identity(sp.A.rows(), sp.A.cols()));
}

CoercivityReport coercivity_transfer(int N, const SpectralGrid& spec, int samples, unsigned seed) {
  const auto c = critical_profiles(N, spec);
  const auto& g = *c.gs.grid;
  const auto fv = finite_volume(g);
  auto sp1 = sector_forms(g, make_curlyL1(c.gs).potential, 0);
  const auto sp2 = sector_forms(g, make_curlyL2(c.gs).potential, 0);

  // Rank-one term -(eps1, L_+ D^2 Q)(eps1, D Q) / |D Q|^2, symmetrized.
  const auto lp = sector_forms(g, make_Lplus(c.gs).potential, 0);
  const Vec u = lp.A * c.d2q;
  const Vec v = fv.volume.cwiseProduct(c.dq);
  const double dq2 = v.dot(c.dq);
  sp1.A -= (u * v.transpose() + v * u.transpose()) / (2.0 * dq2);

  const auto z1 = null_space(g, {c.gs.Q, c.r2q}, 0);
  const auto z2 = null_space(g, {c.lq, c.l2q}, 0);
  CoercivityReport rep;
  rep.minimum = std::min(constrained_minimum(sp1, z1.Z), constrained_minimum(sp2, z2.Z));

  std::mt19937 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> width(0.3, 4.0);
  const Eigen::Index n = g.size();
  rep.sampled_minimum = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    Vec e1 = Vec::Zero(n), e2 = Vec::Zero(n);
    for (int k = 0; k < 6; ++k) {
      const double w1 = width(rng), w2 = width(rng), a1 = normal(rng), a2 = normal(rng);
      for (Eigen::Index i = 0; i < n; ++i) {
        e1[i] += a1 * std::exp(-g.r(i) * g.r(i) / (w1 * w1));
        e2[i] += a2 * std::exp(-g.r(i) * g.r(i) / (w2 * w2));
      }
    }
    // Orthogonal projection (in the Euclidean metric of Z) onto the constraint complement.
    e1 = z1.Z * (z1.Z.transpose() * e1);
    e2 = z2.Z * (z2.Z.transpose() * e2);
    const double num = e1.dot(sp1.A * e1) + e2.dot(sp2.A * e2);
    const double den = e1.dot(sp1.B * e1) + e2.dot(sp2.B * e2);
    rep.sampled_minimum = std::min(rep.sampled_minimum, num / den);
  }
  rep.samples = samples;
  return rep;
}

double virial_form_Hp(const RadialField& eps, const GroundState& gs) {
  validate(eps);
  require_same_grid(*eps.grid, *gs.grid);
  const auto& g = *gs.grid;
  const Vec w = virial_weight(gs);
  const Vec e1 = eps.values.real(), e2 = eps.values.imag();
  const double grad = gradient_norm2(eps);
  const double a = 0.5 * gs.p * (gs.p - 1.0), b = 0.5 * (gs.p - 1.0);
  return grad + a * pairing(g, w, Vec(e1.cwiseAbs2())) + b * pairing(g, w, Vec(e2.cwiseAbs2()));
}

}  // namespace selfsim
