#pragma once

#include <functional>
#include <string>
#include <vector>

namespace selfsim {

// Gamma_b tabulated from the radiation module; log Gamma interpolated in b.
struct GammaTable {
  int N = 1;
  double p = 0;
  double eta = 0.1;
  std::vector<double> b;  // ascending
  std::vector<double> log_gamma;

  double operator()(double bb) const;
  double log_at(double bb) const;
};

GammaTable build_gamma_table(int N, double p, const std::vector<double>& bs, double eta = 0.1,
                             int workers = 1);

enum class GammaSource { analytic, table };
enum class BstarMode { closed_form, gamma_table };

// Gamma_b = exp(-pi/b).
double analytic_gamma(double b);

// b* = pi / log(1/sigma_c).
double bstar_closed_form(double sigma);
// Root of Gamma_b = sigma_c on the table range (bisection to 1e-10 in b).
double bstar_from_table(double sigma, const GammaTable& table);
// sigma_c from (N, p) then either mode; the table is built on demand if absent.
double bstar(double p, int N, BstarMode mode, const GammaTable* table = nullptr);

struct ReducedParams {
  double sigma = 0.01;
  double c_virial = 1.0;
  double c_flux = 1.0;
  GammaSource source = GammaSource::analytic;
  const GammaTable* table = nullptr;
  double b_max = 2.0;
  double lambda_floor = 1e-20;
  double s_max = 1e6;
  // Half-width nu of the initial trapping window Gamma^{1+nu} <= sigma <= Gamma^{1-nu}.
  double window = 0.25;
  double tolerance = 1e-11;
};

struct ReducedPoint {
  double s = 0;
  double b = 0;
  double log_lambda = 0;
  double t = 0;
  // T - t, accumulated backward from the end of the run.
  double remaining = 0;
  double lambda() const;
};

enum class ReducedExit { lambda_floor, horizon, below, above };
std::string to_string(ReducedExit e);

struct ReducedTrajectory {
  std::vector<ReducedPoint> points;
  ReducedExit exit = ReducedExit::horizon;
  // Blow-up time from a linear fit of lambda^2 against t over the last two decades of lambda
  // above 1e-4.
  double T_fit = 0;
  // t at the end plus the remaining time.
  double T = 0;
  double bstar = 0;
};

double reduced_rate(const ReducedParams& par, double b);

bool in_trapping_window(const ReducedParams& par, double b);

ReducedTrajectory integrate_reduced(const ReducedParams& par, double b0, double lambda0 = 1.0);

// sigma_c = 0: b_s = -c_flux Gamma_b; stops at the lambda floor or horizon.
ReducedTrajectory loglog_limit(double b0, double lambda_floor = 1e-140, double s_max = 1e7,
                               double c_flux = 1.0);

// lambda / sqrt(2 b* (T - t)) at every point.
std::vector<double> self_similar_ratio(const ReducedTrajectory& tr, double bstar);

}  // namespace selfsim
