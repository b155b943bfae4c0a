#pragma once

#include <vector>

#include "selfsim/grid.hpp"
#include "selfsim/groundstate.hpp"

namespace selfsim {

// WKB phase: closed form on [0, 2], linear (pi/4) w beyond.
double theta(double w);

// Slow root of mu^2 + ((N-1)/r + i b r) mu + (i b N/2 - 1) = 0, the branch with
// |zeta| ~ r^{-N/2} and finite Dirichlet energy.
cplx far_field_root(int N, double b, double r);

struct RadiationSolution {
  double b = 0;
  GridPtr grid;
  CVec zeta;
  // Outermost radius where the source is nonzero.
  double source_radius = 0;
  double gradient_norm2 = 0;
  double residual = 0;

  RadialField field() const { return RadialField(grid, zeta); }
};

// Solves Lap zeta - zeta + i b D zeta = psi0 with even regularity at the origin and the
// outgoing Robin closure zeta' = mu zeta at r_max.
RadiationSolution solve_radiation(double b, const RadialField& psi0);

struct GammaEstimate {
  double gamma = 0;
  double r_lo = 0;
  double r_hi = 0;
  // max/min of r^N |zeta|^2 over the window.
  double flatness = 0;
};

// Median of r^N |zeta|^2 over [2 R^2, 4 R^2] with R the source radius.
GammaEstimate extract_Gamma(const RadiationSolution& sol, double max_flatness = 1.25);

// Smallest C with exp(-2(1+C eta) theta(2)/b) <= Gamma <= exp(-2(1-C eta) theta(2)/b).
double exponent_constant(double b, double gamma, double eta);

// Grid reaching 5 R_b^2, so the extraction window sits inside it.
GridSpec radiation_grid(int N, double b, double eta, double h = 0.01);

struct GammaRow {
  double b = 0;
  GammaEstimate estimate;
  // -b log Gamma / pi
  double normalized_exponent = 0;
  double gradient_norm2 = 0;
};

// Leading-profile radiation for each b, independent solves run on `workers` threads.
std::vector<GammaRow> gamma_sweep(int N, double p, const std::vector<double>& bs, double eta = 0.1,
                                  int workers = 1, double h = 0.01);

// One-shot: leading profile at b on a radiation grid, its error, the radiation solve.
RadiationSolution radiation_for(int N, double p, double b, double eta = 0.1, double h = 0.01,
                                double r_max_factor = 5.0);

}  // namespace selfsim
