#pragma once

#include <optional>

#include "selfsim/grid.hpp"
#include "selfsim/groundstate.hpp"
#include "selfsim/spectral.hpp"

namespace selfsim {

// R_b = (2/|b|) sqrt(1 - eta).
double profile_radius(double b, double eta);
// R_b^- = sqrt(1 - eta) R_b.
double profile_inner_radius(double b, double eta);

struct Cutoff {
  double inner = 0;
  double outer = 0;
  Vec phi, dphi, lap;
};

// 1 on [0, R_b^-], quintic smoothstep down to 0 on [R_b^-, R_b], 0 beyond.
Cutoff build_cutoff(const RadialGrid& grid, double b, double eta);

struct P0Solution {
  double b = 0;
  double center = 0;
  double radius = 0;
  // Samples on [0, R_b]; zero beyond.
  Vec P, dP;
};

P0Solution solve_P0_samples(double b, const GroundState& gs, double eta, const GridPtr& grid);
RealField solve_P0(double b, const GroundState& gs, double eta, const GridPtr& grid);

struct ProfileOptions {
  double eta = 0.1;
  // Supercriticality used in Q_b = (P~ + sigma T) e^{-i b r^2/4}; by default sigma_c(N, p).
  std::optional<double> sigma;
  // Relative step of the centered b-difference for dP~/db.
  double db_relative = 1e-3;
};

struct SelfSimilarProfile {
  double b = 0;
  double p = 0;
  int N = 1;
  double eta = 0.1;
  double sigma = 0;
  GridPtr grid;
  double radius = 0;
  double inner_radius = 0;
  P0Solution P0;
  Cutoff cutoff;
  // phi_b P0 and its b-derivative.
  Vec Pt, dPt_db;
  // Lowest eigenpair of (L_-)_b.
  double lambda_b = 0;
  Vec xi;
  double mu = 0;
  CVec T;
  double residual_re = 0;
  double residual_im = 0;
  CVec Q;

  RadialField profile() const { return RadialField(grid, Q); }
};

// P0, cutoff and P~ only (no correction); T = 0, mu = 0.
SelfSimilarProfile build_leading_profile(double b, const GroundState& gs, const GridPtr& grid,
                                         const ProfileOptions& opt = {});
// Full construction including (T_b, mu_b).
SelfSimilarProfile build_profile(double b, const GroundState& gs, const GridPtr& grid,
                                 const ProfileOptions& opt = {});

// Psi_b^(0) = Psi~ e^{-i b r^2/4}, Psi~ = -[2 phi' P0' + P0 Lap(phi) + (phi^p - phi) P0^p].
RadialField error_psi0(const SelfSimilarProfile& prof);
Vec error_psi0_real(const SelfSimilarProfile& prof);

struct Correction {
  CVec T;
  double mu = 0;
  double lambda_b = 0;
  Vec xi;
  double residual_re = 0;
  double residual_im = 0;
};
Correction solve_correction(const SelfSimilarProfile& prof, const GroundState& gs);

// Psi_b = -i sigma mu dQ_b/db - Lap Q_b + Q_b - i b Lambda Q_b - Q_b |Q_b|^{p-1}, with the
// b-derivative from a centered difference of full profiles at relative step `db_relative`.
CVec full_error(const SelfSimilarProfile& prof, const GroundState& gs, double db_relative = 1e-3);

struct ProfileInvariants {
  double momentum = 0;
  double virial = 0;
  // -(b/2) |y Q_p|^2
  double virial_reference = 0;
  double mass_excess = 0;
  double energy = 0;
  double energy_pohozaev = 0;
  double mass = 0;
};
ProfileInvariants profile_invariants(const SelfSimilarProfile& prof, const GroundState& gs);

// b -> 0 limits of mu_b: |Q|^2 / (2 (rho, Q)) from the defining ratio, and the two
// candidate closed forms.
struct MuLimits {
  double from_rho = 0;
  double eight_over = 0;
  double four_over = 0;
};
MuLimits mu_limits(const GroundState& gs, double sigma);

// Default grid for profiles at parameter b: reaches past R_b.
GridSpec profile_grid(int N, double b, double eta, double h = 0.01);

}  // namespace selfsim
