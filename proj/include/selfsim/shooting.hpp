#pragma once

#include <vector>

#include "selfsim/grid.hpp"

namespace selfsim {

// P'' + (N-1)/r P' - (1 - b^2 r^2/4) P + |P|^{p-1} P = 0.
struct RadialOde {
  int N = 1;
  double p = 3.0;
  double b = 0.0;
};

enum class ShotOutcome { crossing, turning, decaying, undecided };

struct Shot {
  ShotOutcome outcome = ShotOutcome::undecided;
  double r_event = 0;
};

// Integrates outward from the origin with P(0) = center and classifies the trajectory.
Shot classify_shot(const RadialOde& ode, double center, double r_end);

// Bisection between a turning shot (lo) and a crossing shot (hi); hi is doubled when
// `widen` is set and it does not cross yet.
double bisect_center(const RadialOde& ode, double r_end, double lo, double hi, bool widen = false);

struct Trace {
  std::vector<double> P, dP;
};

// Values at increasing radii from an outward shot with P(0) = center.
Trace shoot_outward(const RadialOde& ode, double center, const std::vector<double>& radii);

// Values at decreasing radii from (P, P') prescribed at `start`.
Trace shoot_inward(const RadialOde& ode, double start, double P, double dP,
                   const std::vector<double>& radii);

struct MatchedSolution {
  double center = 0;
  double scale = 0;
  // Samples on the grid nodes r_i <= r_right; zero beyond.
  Vec P, dP;
  double mismatch = 0;
  int iterations = 0;
};

// Two-sided shooting: outward from P(0) = center, inward from r_right with
// (P, P') = scale * (u, du); Newton on (center, log scale) matches at r_match.
MatchedSolution match_two_sided(const RadialOde& ode, const RadialGrid& grid, double center_guess,
                                double r_match, double r_right, double u, double du);

}  // namespace selfsim
