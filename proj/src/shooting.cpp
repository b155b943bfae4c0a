#include "selfsim/shooting.hpp"

#include <array>
#include <cmath>

#include <boost/numeric/odeint.hpp>

#include "selfsim/errors.hpp"

namespace selfsim {

namespace odeint = boost::numeric::odeint;
using State = std::array<double, 2>;

namespace {

constexpr double kTol = 1e-13;
constexpr double kStart = 1e-5;

double second_derivative(const RadialOde& ode, double r, double P, double dP) {
  const double nonlinear = std::pow(std::abs(P), ode.p - 1.0) * P;
  const double confine = 1.0 - 0.25 * ode.b * ode.b * r * r;
  return -(ode.N - 1) / r * dP + confine * P - nonlinear;
}

State series_start(const RadialOde& ode, double center) {
  const double curv = (center - std::pow(std::abs(center), ode.p - 1.0) * center) / ode.N;
  return {center + 0.5 * curv * kStart * kStart, curv * kStart};
}

auto stepper(double abs_tol = kTol) {
  return odeint::make_dense_output(abs_tol, kTol, odeint::runge_kutta_dopri5<State>());
}

// Steps land exactly on the sample radii (no dense-output interpolation error).
auto sampler(double abs_tol = kTol) {
  return odeint::make_controlled(abs_tol, kTol, odeint::runge_kutta_dopri5<State>());
}

}  // namespace

Shot classify_shot(const RadialOde& ode, double center, double r_end) {
  auto sys = [&](const State& x, State& dx, double r) {
    dx[0] = x[1];
    dx[1] = second_derivative(ode, r, x[0], x[1]);
  };
  auto st = stepper();
  st.initialize(series_start(ode, center), kStart, 1e-3);
  while (st.current_time() < r_end) {
    st.do_step(sys);
    const State& x = st.current_state();
    const double r = st.current_time();
    if (x[0] < 0) return {ShotOutcome::crossing, r};
    if (x[1] > 0) return {ShotOutcome::turning, r};
    const double linear = 1.0 - std::pow(x[0], ode.p - 1.0);
    if (x[0] < 1e-9 * center && linear > 0.5) return {ShotOutcome::decaying, r};
  }
  return {ShotOutcome::undecided, r_end};
}

Trace shoot_outward(const RadialOde& ode, double center, const std::vector<double>& radii) {
  Trace out;
  out.P.reserve(radii.size());
  out.dP.reserve(radii.size());
  std::vector<double> times;
  std::size_t head = 0;
  for (; head < radii.size() && radii[head] <= kStart; ++head) {
    const double curv = (center - std::pow(std::abs(center), ode.p - 1.0) * center) / ode.N;
    out.P.push_back(center + 0.5 * curv * radii[head] * radii[head]);
    out.dP.push_back(curv * radii[head]);
  }
  if (head == radii.size()) return out;
  times.push_back(kStart);
  times.insert(times.end(), radii.begin() + static_cast<long>(head), radii.end());
  auto sys = [&](const State& x, State& dx, double r) {
    dx[0] = x[1];
    dx[1] = second_derivative(ode, r, x[0], x[1]);
  };
  State x = series_start(ode, center);
  bool first = true;
  odeint::integrate_times(sampler(), sys, x, times.begin(), times.end(), 1e-3,
                          [&](const State& s, double) {
                            if (first) {
                              first = false;
                              return;
                            }
                            out.P.push_back(s[0]);
                            out.dP.push_back(s[1]);
                          });
  return out;
}

Trace shoot_inward(const RadialOde& ode, double start, double P, double dP,
                   const std::vector<double>& radii) {
  Trace out;
  std::vector<double> times;
  for (double r : radii) times.push_back(start - r);
  bool prepend = times.empty() || times.front() > 0;
  if (prepend) times.insert(times.begin(), 0.0);
  auto sys = [&](const State& x, State& dx, double s) {
    const double r = start - s;
    dx[0] = -x[1];
    dx[1] = -second_derivative(ode, r, x[0], x[1]);
  };
  State x{P, dP};
  bool skip = prepend;
  // Inward shots start from exponentially small tails: control error relative to them.
  const double abs_tol = kTol * std::max(std::abs(P) + std::abs(dP), 1e-280);
  odeint::integrate_times(sampler(abs_tol), sys, x, times.begin(), times.end(), 1e-3,
                          [&](const State& s, double) {
                            if (skip) {
                              skip = false;
                              return;
                            }
                            out.P.push_back(s[0]);
                            out.dP.push_back(s[1]);
                          });
  return out;
}

double bisect_center(const RadialOde& ode, double r_end, double lo, double hi, bool widen) {
  auto outcome = [&](double c) { return classify_shot(ode, c, r_end).outcome; };
  int tries = 0;
  while (outcome(hi) != ShotOutcome::crossing) {
    if (!widen || ++tries > 20)
      throw SolverFailure("no crossing trajectory found for the center up to " + std::to_string(hi));
    hi *= 2.0;
  }
  if (outcome(lo) == ShotOutcome::crossing)
    throw SolverFailure("center bracket lower end already crosses zero");
  for (int it = 0; it < 200 && (hi - lo) > 1e-11 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const auto o = outcome(mid);
    if (o == ShotOutcome::crossing)
      hi = mid;
    else if (o == ShotOutcome::turning)
      lo = mid;
    else
      return mid;
  }
  return 0.5 * (lo + hi);
}

MatchedSolution match_two_sided(const RadialOde& ode, const RadialGrid& grid, double center_guess,
                                double r_match, double r_right, double u, double du) {
  // The residual is evaluated on exactly the sample sequences used for the output, so the
  // stitched profile has no kink beyond the Newton tolerance.
  const Eigen::Index M = grid.size();
  const Eigen::Index im = std::max<Eigen::Index>(1, grid.locate(r_match));
  r_match = grid.r(im);
  std::vector<double> inner, rev;
  std::vector<Eigen::Index> rev_idx;
  for (Eigen::Index i = 0; i <= im; ++i) inner.push_back(grid.r(i));
  for (Eigen::Index i = M - 1; i > im; --i) {
    if (grid.r(i) > r_right) continue;
    rev.push_back(grid.r(i));
    rev_idx.push_back(i);
  }
  rev.push_back(r_match);

  auto shots = [&](double center, double A) {
    return std::make_pair(shoot_outward(ode, center, inner),
                          shoot_inward(ode, r_right, A * u, A * du, rev));
  };
  double norm = 1.0;
  auto residual = [&](double center, double log_scale) {
    const auto [o, i] = shots(center, std::exp(log_scale));
    const double P = o.P.back(), dP = o.dP.back();
    return Eigen::Vector2d((P - i.P.back()) / norm, (dP - i.dP.back()) / norm);
  };

  double center = center_guess;
  double log_scale;
  {
    // A tiny probe amplitude keeps the inward shot in the linear regime; tails that
    // grow by many decades on the way in need a smaller probe.
    const auto o = shoot_outward(ode, center, {r_match});
    // Fixed normalization: a per-call one saturates once the outward shot runs away.
    norm = std::abs(o.P[0]) + std::abs(o.dP[0]) + 1e-300;
    double probe = 1e-30;
    Trace i = shoot_inward(ode, r_right, probe * u, probe * du, {r_match});
    for (int k = 0; k < 6 && !(std::abs(i.P[0]) < 1e-6); ++k) {
      probe *= 1e-40;
      i = shoot_inward(ode, r_right, probe * u, probe * du, {r_match});
    }
    const double ratio = std::abs(o.P[0]) > 0 && std::abs(i.P[0]) > 0 ? o.P[0] / i.P[0] : 1.0;
    log_scale = std::log(probe) + std::log(std::abs(ratio));
  }

  Eigen::Vector2d F = residual(center, log_scale);
  int it = 0;
  for (; it < 40 && F.norm() > 1e-14; ++it) {
    Eigen::Matrix2d J;
    const double hc = 1e-7 * std::max(1.0, std::abs(center));
    const double hs = 1e-7;
    J.col(0) = (residual(center + hc, log_scale) - residual(center - hc, log_scale)) / (2 * hc);
    J.col(1) = (residual(center, log_scale + hs) - residual(center, log_scale - hs)) / (2 * hs);
    Eigen::Vector2d step = J.fullPivLu().solve(-F);
    double damp = 1.0;
    const double cap = 0.2 * std::abs(center);
    if (std::abs(step[0]) > cap) damp = cap / std::abs(step[0]);
    if (std::abs(step[1]) * damp > 2.0) damp = 2.0 / std::abs(step[1]);
    Eigen::Vector2d trial = F;
    bool improved = false;
    for (int k = 0; k < 20; ++k) {
      trial = residual(center + damp * step[0], log_scale + damp * step[1]);
      if (trial.allFinite() && trial.norm() < F.norm()) {
        improved = true;
        break;
      }
      damp *= 0.5;
    }
    if (!improved) break;
    center += damp * step[0];
    log_scale += damp * step[1];
    F = trial;
  }
  if (!(F.norm() < 1e-9))
    throw SolverFailure("two-sided shooting did not converge (mismatch " +
                        std::to_string(F.norm()) + ")");

  MatchedSolution sol;
  sol.center = center;
  sol.scale = std::exp(log_scale);
  sol.mismatch = F.norm();
  sol.iterations = it;
  sol.P = Vec::Zero(M);
  sol.dP = Vec::Zero(M);
  const auto [o, in] = shots(center, sol.scale);
  for (Eigen::Index i = 0; i <= im; ++i) {
    sol.P[i] = o.P[static_cast<std::size_t>(i)];
    sol.dP[i] = o.dP[static_cast<std::size_t>(i)];
  }
  for (std::size_t k = 0; k < rev_idx.size(); ++k) {
    sol.P[rev_idx[k]] = in.P[k];
    sol.dP[rev_idx[k]] = in.dP[k];
  }
  return sol;
}

}  // namespace selfsim
