#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "flagship.hpp"
#include "selfsim/dynamics.hpp"
#include "selfsim/groundstate.hpp"
#include "selfsim/nlse.hpp"
#include "selfsim/numerics.hpp"
#include "selfsim/profiles.hpp"
#include "selfsim/radiation.hpp"
#include "selfsim/spectral.hpp"

using namespace selfsim;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

Outcome ground_state_oracle() {
  Clock c;
  const auto gs = solve_ground_state(3.0, 1);
  const double secs = c.seconds();
  const double center = std::abs(gs.center - std::sqrt(2.0));
  double shape = 0;
  for (Eigen::Index i = 0; i < gs.grid->size(); ++i)
    shape = std::max(shape, std::abs(gs.Q[i] - std::sqrt(2.0) / std::cosh(gs.grid->r(i))));
  return {center <= 1e-8 && shape <= 1e-6 && secs < 1,
          fmt("|Q(0)-sqrt2| = %.2e (<= 1e-8), max|Q - sqrt2 sech| = %.2e (<= 1e-6), %.2fs (< 1s)",
              center, shape, secs)};
}

Outcome kernel_identities() {
  Clock c;
  double lm = 0, lp = 0;
  for (auto [N, p] : {std::pair{1, 3.0}, std::pair{2, 3.0}, std::pair{3, 7.0 / 3}}) {
    const auto rep = kernel_checks(solve_ground_state(p, N));
    lm = std::max(lm, rep.lminus);
    lp = std::max(lp, rep.lplus_lambda);
  }
  const double secs = c.seconds();
  return {lm <= 1e-8 && lp <= 1e-6 && secs < 5,
          fmt("max |L_-Q|/|Q| = %.2e (<= 1e-8), max |L_+ LQ + 2Q|/|Q| = %.2e (<= 1e-6), %.2fs (< 5s)",
              lm, lp, secs)};
}

Outcome rho_identity() {
  double worst = 0;
  for (auto [N, p] : {std::pair{1, 3.0}, std::pair{2, 3.0}, std::pair{1, exponent_for_sigma(1, 0.01)}}) {
    const auto gs = solve_ground_state(p, N);
    const auto rho = solve_rho(gs);
    const double lhs = 2 * pairing(*gs.grid, rho.rho.values, gs.Q);
    const double rhs = 0.25 * (1 + sigma_c(N, p)) * gs.moment2;
    worst = std::max(worst, std::abs(lhs / rhs - 1));
  }
  return {worst <= 1e-5, fmt("max relative gap = %.2e over three (N, p) (<= 1e-5)", worst)};
}

Outcome theta_closed_form() {
  const double at2 = std::abs(theta(2.0) - M_PI / 2);
  boost::math::quadrature::tanh_sinh<double> q;
  double worst = 0;
  for (int k = 1; k <= 40; ++k) {
    const double w = 0.05 * k;
    const double ref =
        q.integrate([](double z) { return std::sqrt(std::max(0.0, 1 - 0.25 * z * z)); }, 0.0, w);
    worst = std::max(worst, std::abs(theta(w) - ref));
  }
  return {at2 <= 4.5e-16 && worst <= 1e-10,
          fmt("|theta(2) - pi/2| = %.1e (rounding), max quadrature gap on [0,2] = %.2e (<= 1e-10)",
              at2, worst)};
}

Outcome gamma_law() {
  Clock c;
  const std::vector<double> bs{0.30, 0.25, 0.20, 0.15};
  const auto rows = gamma_sweep(2, critical_exponent(2), bs, 0.1, 4);
  const double secs = c.seconds();
  std::vector<double> x, y;
  double flat = 0;
  for (const auto& r : rows) {
    x.push_back(-2 * theta(2) / r.b);
    y.push_back(std::log(r.estimate.gamma));
    flat = std::max(flat, r.estimate.flatness);
  }
  const double slope = linear_fit(x, y).slope;
  bool improving = true;
  double prev = 1e300;
  std::string locals;
  for (std::size_t k = 1; k < x.size(); ++k) {
    const double local = (y[k] - y[k - 1]) / (x[k] - x[k - 1]);
    improving = improving && std::abs(local - 1) < prev;
    prev = std::abs(local - 1);
    locals += fmt("%s%.3f", k > 1 ? ", " : "", local);
  }
  return {flat <= 1.25 && slope >= 0.8 && slope <= 1.2 && improving && secs < 120,
          fmt("flatness max %.3f (<= 1.25), slope %.3f (in [0.8, 1.2]), local slopes %s "
              "(monotone toward 1: %s), %.1fs (< 120s)",
              flat, slope, locals.c_str(), improving ? "yes" : "no", secs)};
}

Outcome spectral_property() {
  Clock c;
  bool ok = true;
  std::string det;
  for (int N = 1; N <= 5; ++N) {
    const auto base = verify_spectral_property(N, {30, 0.05, 4});
    const auto fine = verify_spectral_property(N, {30, 0.025, 4});
    const double drift = std::abs(fine.delta1 / base.delta1 - 1);
    const bool good = base.delta1 > 0 && fine.delta1 > 0 && drift <= 0.1;
    ok = ok && good;
    det += fmt("N=%d delta1 %.4f (doubled %.4f)%s; ", N, base.delta1, fine.delta1, good ? "" : " FAILS");
  }
  const auto moment = verify_spectral_property(5, {30, 0.05, 4}, ConstraintVariant::moment);
  const double secs = c.seconds();
  ok = ok && secs < 300;
  det += fmt("N=5 with (eps1, |y|^2 Q) in place of (eps1, LQ): delta1 %.4f; %.1fs (< 300s)",
             moment.delta1, secs);
  return {ok, det};
}

Outcome profile_invariants_check() {
  const double b = 0.1, sigma = 1e-4;
  const int N = 1;
  const double p = exponent_for_sigma(N, sigma);
  const auto grid = make_grid(profile_grid(N, b, 0.1));
  const auto gs = solve_ground_state(p, N, grid);
  const auto prof = build_profile(b, gs, grid);
  const auto inv = profile_invariants(prof, gs);
  const double virial = std::abs(inv.virial / inv.virial_reference - 1);

  // M(b) on five b values at sigma = 0.01
  std::vector<double> bs, ms;
  const double p2 = exponent_for_sigma(1, 0.01);
  double c_rho = 0;
  for (double bb : {0.02, 0.04, 0.06, 0.08, 0.1}) {
    const auto g2 = make_grid(profile_grid(1, bb, 0.1));
    const auto gs2 = solve_ground_state(p2, 1, g2);
    bs.push_back(bb);
    ms.push_back(profile_invariants(build_profile(bb, gs2, g2), gs2).mass_excess);
    c_rho = 4 * pairing(*g2, solve_rho(gs2).rho.values, gs2.Q);
  }
  // M is even in b: fit 2M/b^2 against b^2, the intercept is c0
  std::vector<double> b2, ratio;
  for (std::size_t k = 0; k < bs.size(); ++k) {
    b2.push_back(bs[k] * bs[k]);
    ratio.push_back(2 * ms[k] / b2.back());
  }
  const double c0 = linear_fit(b2, ratio).intercept;
  const auto [rmin, rmax] = std::minmax_element(ratio.begin(), ratio.end());
  const double spread = *rmax / *rmin - 1;

  const double gamma = extract_Gamma(radiation_for(N, p, b)).gamma;
  const double e = std::abs(inv.energy);
  const bool ok = inv.momentum == 0.0 && virial <= 0.1 && c0 > 0 && spread <= 0.05 &&
                  e < b * b * b && e < 10 * (gamma + sigma);
  return {ok, fmt("momentum %.1e; virial/(-(b/2)|yQ|^2) - 1 = %.3f (<= 0.1); c0 from 2M/b^2 = "
                  "%.4f (> 0; 4(rho,Q) = %.4f), 2M/b^2 spread over b in [0.02, 0.1] %.3f (<= 0.05); |E(Q_b)| = %.2e "
                  "(< b^3 = %.0e and < 10(Gamma_b + sigma) = %.2e)",
                  inv.momentum, virial, c0, c_rho, spread, e, b * b * b,
                  10 * (gamma + sigma))};
}

Outcome reduced_trapping() {
  Clock c;
  ReducedParams par;
  par.sigma = 0.01;
  const double bs = bstar_closed_form(par.sigma);
  bool ok = true;
  std::string det;
  for (double f : {0.8, 1.2}) {
    const auto tr = integrate_reduced(par, f * bs);
    const double gap = std::abs(tr.points.back().b / bs - 1);
    const auto ratio = self_similar_ratio(tr, bs);
    const double cut = tr.points.back().log_lambda + 2 * std::log(10.0);
    double lo = 1e300, hi = -1e300;
    for (std::size_t k = 0; k < ratio.size(); ++k)
      if (tr.points[k].log_lambda <= cut) {
        lo = std::min(lo, ratio[k]);
        hi = std::max(hi, ratio[k]);
      }
    const bool good = gap <= 0.02 && lo >= 0.98 && hi <= 1.02;
    ok = ok && good;
    det += fmt("b0 = %.1f b*: |b/b* - 1| = %.1e, speed ratio in [%.5f, %.5f]; ", f, gap, lo, hi);
  }
  const double secs = c.seconds();
  ok = ok && secs < 10;
  det += fmt("%.2fs (< 10s)", secs);
  return {ok, det};
}

struct Flagship {
  bool ran = false;
  double secs = 0;
  SimConfig cfg;
  nlohmann::json report;
  std::string error;
};

Flagship& flagship() {
  static Flagship f = [] {
    Flagship out;
    Clock c;
    try {
      out.cfg = parse_sim_config("schema_version = 1\nsigma = 0.01\nframe = rescaled\n");
      out.report = run_simulation(out.cfg).report.to_json();
      out.ran = true;
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    out.secs = c.seconds();
    return out;
  }();
  return f;
}

Outcome flagship_run() {
  auto& f = flagship();
  if (!f.ran) return {false, "flagship run failed: " + f.error};
  bool ok = f.secs < 1800 && f.report.value("exit", "") == "blowup";
  std::string det = fmt("sigma_c = %.3g, exit %s; ", f.cfg.sigma(), f.report.value("exit", "").c_str());
  for (const auto& c : cli::flagship_checks(f.report)) {
    if (c.name == "concentration_flatness") continue;
    ok = ok && c.pass;
    det += fmt("%s %.4g (%s)%s; ", c.name.c_str(), c.value, c.bound.c_str(), c.pass ? "" : " FAILS");
  }
  det += fmt("%.0fs (< 1800s)", f.secs);
  return {ok, det};
}

Outcome concentration_plateau() {
  auto& f = flagship();
  if (!f.ran) return {false, "flagship run failed: " + f.error};
  const auto& c = f.report["concentration"];
  for (const auto& ch : cli::flagship_checks(f.report))
    if (ch.name == "concentration_flatness") {
      const auto& R = c["R"];
      return {ch.pass, fmt("max/min of R^{-2 sigma} int_{|x|<=R} |u*|^2 over R in [%.3g, %.3g] "
                           "(floor %.3g) = %.3f (<= 1.5)",
                           R.front().get<double>(), R.back().get<double>(),
                           c["floor"].get<double>(), ch.value)};
    }
  return {false, "no concentration check"};
}

Outcome conservation() {
  auto cfg = [](double dt) {
    return parse_sim_config(
        "p = 3\nN = 1\nframe = lab\ninitial = gaussian\nperturbation = none\nr_max = 40\n"
        "cadence = 50\nt_max = 1\ndt_max = " + std::to_string(dt) + "\n");
  };
  const auto coarse = run_simulation(cfg(2e-3)).report;
  const auto fine = run_simulation(cfg(1e-3)).report;
  const double order = std::log2(coarse.energy_drift / fine.energy_drift);
  // Crank-Nicolson conserves the discrete mass exactly: only rounding remains
  const bool mass_exact = coarse.mass_drift <= 1e-12 && fine.mass_drift <= 1e-12;
  const bool ok = fine.exit == ExitKind::completed && fine.mass_drift <= 1e-8 &&
                  fine.energy_drift <= 1e-6 && std::abs(order - 2) <= 0.2 && mass_exact;
  return {ok, fmt("mass drift %.1e -> %.1e per unit time (<= 1e-8; exact conservation, at rounding "
                  "<= 1e-12 so no order is observable), energy drift %.2e -> %.2e (<= 1e-6), "
                  "observed order %.2f (2 +- 0.2)",
                  coarse.mass_drift, fine.mass_drift, coarse.energy_drift, fine.energy_drift, order)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria: one PASS/FAIL line each"};
  std::vector<int> only, expect_fail;
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  app.add_option("--expect-fail", expect_fail,
                 "criteria known to fail; exit status 0 iff exactly these fail")
      ->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"ground-state oracle", ground_state_oracle},
      {"kernel identities", kernel_identities},
      {"rho identity", rho_identity},
      {"theta closed form", theta_closed_form},
      {"Gamma_b law", gamma_law},
      {"spectral property N = 1..5", spectral_property},
      {"profile invariants", profile_invariants_check},
      {"reduced-dynamics trapping", reduced_trapping},
      {"flagship PDE run", flagship_run},
      {"concentration plateau", concentration_plateau},
      {"conservation regression", conservation},
  };
  const std::set<int> run(only.begin(), only.end());
  const std::set<int> expected(expect_fail.begin(), expect_fail.end());
  int failed = 0, surprises = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!run.empty() && !run.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("%-4s criterion %2d  %-28s %s\n", o.pass ? "PASS" : "FAIL", id,
                criteria[k].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
    if (o.pass == static_cast<bool>(expected.count(id))) ++surprises;
  }
  std::printf("%d failed\n", failed);
  return surprises == 0 ? 0 : 1;
}
