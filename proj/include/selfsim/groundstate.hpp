#pragma once

#include "selfsim/grid.hpp"

namespace selfsim {

struct GroundState {
  int N = 1;
  double p = 3.0;
  GridPtr grid;
  Vec Q;
  // Q' from the shooting ODE (more accurate than differencing the samples).
  Vec dQ;
  double center = 0;
  double mass = 0;
  // integral |y|^2 Q^2
  double moment2 = 0;
  double energy = 0;

  RealField field() const { return RealField(grid, Q); }
};

GridSpec ground_state_grid(int N, double r_max = 40.0, double h = 0.01);

// Shooting on Q(0): bisection between turning and crossing trajectories, then a
// two-sided Newton polish of the decaying branch.
GroundState solve_ground_state(double p, int N, GridPtr grid = nullptr);

// Solution of L_+ rho = r^2 Q / 4.
struct Rho {
  RealField rho;
  double residual = 0;
};
Rho solve_rho(const GroundState& gs);

struct KernelReport {
  // |L_- Q| / |Q|
  double lminus = 0;
  // |L_+ Lambda Q + 2 Q| / |Q|
  double lplus_lambda = 0;
  // Lowest eigenvalue of L_+ in the ell = 1 sector (N >= 2; NaN otherwise).
  double sector1_eigenvalue = 0;
};
KernelReport kernel_checks(const GroundState& gs);

// Relative residuals of the two integral identities obtained by pairing the equation
// with Q and with Lambda Q.
struct PohozaevReport {
  double with_q = 0;
  double with_lambda_q = 0;
};
PohozaevReport pohozaev_checks(const GroundState& gs);

}  // namespace selfsim
