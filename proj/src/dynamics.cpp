#include "selfsim/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include "selfsim/errors.hpp"
#include "selfsim/grid.hpp"
#include "selfsim/numerics.hpp"
#include "selfsim/radiation.hpp"

namespace selfsim {

double GammaTable::log_at(double bb) const {
  if (b.size() < 4) throw UsageError("Gamma table needs at least 4 entries");
  if (bb < b.front() || bb > b.back()) throw RangeError("b outside the Gamma table");
  return interpolate_cubic(b, log_gamma, bb);
}

double GammaTable::operator()(double bb) const { return std::exp(log_at(bb)); }

GammaTable build_gamma_table(int N, double p, const std::vector<double>& bs, double eta, int workers) {
  GammaTable t;
  t.N = N;
  t.p = p;
  t.eta = eta;
  std::vector<double> sorted = bs;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& row : gamma_sweep(N, p, sorted, eta, workers)) {
    t.b.push_back(row.b);
    t.log_gamma.push_back(std::log(row.estimate.gamma));
  }
  return t;
}

double analytic_gamma(double b) { return b > 0 ? std::exp(-M_PI / b) : 0.0; }

double bstar_closed_form(double sigma) {
  if (!(sigma > 0 && sigma < 1)) throw DomainError("sigma_c must lie in (0, 1)");
  return M_PI / std::log(1 / sigma);
}

double bstar_from_table(double sigma, const GammaTable& table) {
  if (!(sigma > 0 && sigma < 1)) throw DomainError("sigma_c must lie in (0, 1)");
  const double target = std::log(sigma);
  auto f = [&](double b) { return table.log_at(b) - target; };
  const double lo = table.b.front(), hi = table.b.back();
  if (f(lo) * f(hi) > 0) throw RangeError("Gamma table does not bracket sigma_c");
  auto tol = [](double a, double c) { return std::abs(c - a) < 1e-10; };
  const auto r = boost::math::tools::bisect(f, lo, hi, tol);
  return 0.5 * (r.first + r.second);
}

double bstar(double p, int N, BstarMode mode, const GammaTable* table) {
  const double sigma = sigma_c(N, p);
  if (!(sigma > 0 && sigma < 1)) throw DomainError("sigma_c(N, p) must lie in (0, 1)");
  if (mode == BstarMode::closed_form) return bstar_closed_form(sigma);
  if (table) return bstar_from_table(sigma, *table);
  std::vector<double> bs;
  for (double b = 0.15; b <= 0.8 + 1e-12; b += 0.05) bs.push_back(b);
  const auto built = build_gamma_table(N, p, bs);
  return bstar_from_table(sigma, built);
}

double ReducedPoint::lambda() const { return std::exp(log_lambda); }

std::string to_string(ReducedExit e) {
  switch (e) {
    case ReducedExit::lambda_floor: return "lambda_floor";
    case ReducedExit::horizon: return "horizon";
    case ReducedExit::below: return "exit_below";
    case ReducedExit::above: return "exit_above";
  }
  return "?";
}

namespace {

double gamma_of(const ReducedParams& par, double b) {
  if (par.source == GammaSource::table) {
    if (!par.table) throw UsageError("table Gamma source without a table");
    return (*par.table)(b);
  }
  return analytic_gamma(b);
}

using State = std::array<double, 3>;  // b, log lambda, t

ReducedTrajectory run(const std::function<double(double)>& rate, double b0, double lambda0,
                      double b_max, double floor, double s_max, double tol) {
  using namespace boost::numeric::odeint;
  auto sys = [&](const State& x, State& dx, double) {
    dx[0] = rate(x[0]);
    dx[1] = -x[0];
    dx[2] = std::exp(2 * x[1]);
  };
  auto stepper = make_dense_output(tol, tol, runge_kutta_dopri5<State>());
  State x{b0, std::log(lambda0), 0.0};
  stepper.initialize(x, 0.0, 1e-3);
  ReducedTrajectory tr;
  tr.points.push_back({0.0, x[0], x[1], x[2], 0.0});
  const double log_floor = std::log(floor);
  tr.exit = ReducedExit::horizon;
  while (stepper.current_time() < s_max) {
    stepper.do_step(sys);
    const State& y = stepper.current_state();
    tr.points.push_back({stepper.current_time(), y[0], y[1], y[2], 0.0});
    if (!(y[0] > 0)) {
      tr.exit = ReducedExit::below;
      break;
    }
    if (y[0] >= b_max) {
      tr.exit = ReducedExit::above;
      break;
    }
    if (y[1] <= log_floor) {
      tr.exit = ReducedExit::lambda_floor;
      break;
    }
  }
  // T - t: tail lambda^2 / (2b) past the end, then exact integrals of an exponential per step.
  auto& pts = tr.points;
  pts.back().remaining = pts.back().b > 0 ? std::exp(2 * pts.back().log_lambda) / (2 * pts.back().b) : 0.0;
  for (std::size_t k = pts.size() - 1; k-- > 0;) {
    const double ds = pts[k + 1].s - pts[k].s;
    const double rate_l = (pts[k].log_lambda - pts[k + 1].log_lambda) / ds;
    const double l2 = std::exp(2 * pts[k].log_lambda);
    const double piece = std::abs(rate_l) * ds > 1e-8 ? l2 * -std::expm1(-2 * rate_l * ds) / (2 * rate_l) : l2 * ds;
    pts[k].remaining = pts[k + 1].remaining + piece;
  }
  tr.T = pts.back().t + pts.back().remaining;
  // linear fit of lambda^2 against t over the last two decades of lambda that t still
  // resolves in double precision (lambda >= 1e-4)
  std::vector<double> ts, l2s;
  const double lo = std::max(pts.back().log_lambda, std::log(1e-4));
  const double cut = lo + 2 * std::log(10.0);
  for (const auto& q : pts)
    if (q.log_lambda <= cut && q.log_lambda >= lo) {
      ts.push_back(q.t);
      l2s.push_back(std::exp(2 * q.log_lambda));
    }
  if (ts.size() >= 3) {
    const auto fit = linear_fit(ts, l2s);
    tr.T_fit = -fit.intercept / fit.slope;
  }
  return tr;
}

}  // namespace

double reduced_rate(const ReducedParams& par, double b) {
  return par.c_virial * par.sigma - par.c_flux * gamma_of(par, b);
}

bool in_trapping_window(const ReducedParams& par, double b) {
  const double lg = std::log(gamma_of(par, b));
  const double ls = std::log(par.sigma);
  return (1 + par.window) * lg <= ls && ls <= (1 - par.window) * lg;
}

ReducedTrajectory integrate_reduced(const ReducedParams& par, double b0, double lambda0) {
  if (!(par.sigma > 0 && par.sigma < 1)) throw DomainError("sigma_c must lie in (0, 1)");
  if (!(b0 > 0 && b0 < par.b_max)) throw DomainError("b(0) must lie in (0, b_max)");
  if (!in_trapping_window(par, b0)) throw DomainError("b(0) outside the initial trapping window");
  auto tr = run([&](double b) { return reduced_rate(par, b); }, b0, lambda0, par.b_max, par.lambda_floor,
                par.s_max, par.tolerance);
  if (par.source == GammaSource::analytic && par.c_virial == par.c_flux)
    tr.bstar = bstar_closed_form(par.sigma);
  else {
    auto f = [&](double b) { return reduced_rate(par, b); };
    double lo = par.source == GammaSource::table ? par.table->b.front() : 1e-3;
    double hi = par.source == GammaSource::table ? par.table->b.back() : par.b_max;
    tr.bstar = find_root(f, lo, hi, 1e-12);
  }
  return tr;
}

ReducedTrajectory loglog_limit(double b0, double lambda_floor, double s_max, double c_flux) {
  if (!(b0 > 0)) throw DomainError("b(0) must be positive");
  return run([&](double b) { return -c_flux * analytic_gamma(b); }, b0, 1.0, 1e300, lambda_floor, s_max, 1e-11);
}

std::vector<double> self_similar_ratio(const ReducedTrajectory& tr, double b) {
  std::vector<double> out;
  out.reserve(tr.points.size());
  for (const auto& q : tr.points) out.push_back(q.lambda() / std::sqrt(2 * b * q.remaining));
  return out;
}

}  // namespace selfsim
