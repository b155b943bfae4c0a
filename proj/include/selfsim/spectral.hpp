#pragma once

#include <string>
#include <vector>

#include "selfsim/grid.hpp"
#include "selfsim/groundstate.hpp"

namespace selfsim {

enum class OperatorKind { Lplus, Lminus, Lplus_b, Lminus_b, curlyL1, curlyL2, Hp_real, Hp_imag };

std::string to_string(OperatorKind k);

// -Laplacian + potential (+ centrifugal term for sector >= 1) on a radial grid.
struct LinearizedOperator {
  OperatorKind kind = OperatorKind::Lplus;
  GridPtr grid;
  Vec potential;
  int sector = 0;
};

LinearizedOperator make_Lplus(const GroundState& gs);
LinearizedOperator make_Lminus(const GroundState& gs);
// Potentials of the virial forms built on Q_p (pass the critical-exponent ground state
// for the curly-L operators).
LinearizedOperator make_curlyL1(const GroundState& gs);
LinearizedOperator make_curlyL2(const GroundState& gs);

// Fourth-order sparse matrix of the sector-0 operator. With `dirichlet` the last row
// enforces f(r_max) = 0.
SpMat assemble(const LinearizedOperator& op, bool dirichlet = true);
Vec apply(const LinearizedOperator& op, const Vec& f);

struct Eigenpair {
  double value = 0;
  RealField vector;
  double residual = 0;
  std::vector<double> history;
};

// Lowest eigenpair of a sector-0 operator by shifted inverse iteration followed by
// Rayleigh-quotient refinement. The vector is normalized in L^2 with vector(0) > 0.
Eigenpair lowest_eigenpair(const LinearizedOperator& op);

struct SectorMinimum {
  int sector = 0;
  // 1 for the real part (curly L1), 2 for the imaginary part (curly L2).
  int part = 1;
  double minimum = 0;
  double gram_condition = 0;
  int constraints = 0;
};

// Radial-sector constraints on eps_1: (Q, Lambda Q) as printed in the property
// statement, or (Q, |y|^2 Q) as in the orthogonality conditions of the decomposition.
enum class ConstraintVariant { printed, moment };

struct SpectralReport {
  int N = 1;
  ConstraintVariant variant = ConstraintVariant::printed;
  double delta1 = 0;
  std::vector<SectorMinimum> sectors;
  // Unconstrained sectors (ell >= 2) must have minima increasing in ell.
  bool monotone_in_sector = true;
  bool property_holds() const { return delta1 > 0; }
};

struct SpectralGrid {
  double r_max = 30.0;
  double h = 0.05;
  double stretch = 4.0;
};

// Constrained Rayleigh minima of (curly L eps, eps) / (|grad eps|^2 + |eps e^{-r/2}|^2) in
// sectors 0..3 at the critical exponent.
SpectralReport verify_spectral_property(int N, const SpectralGrid& spec = {},
                                        ConstraintVariant set = ConstraintVariant::printed);

// Minimum of the same quotient for curly L2 in sector 0 with no constraints.
double unconstrained_sector0_minimum(int N, const SpectralGrid& spec = {});

// The rank-one corrected form H~ on the radial sector, restricted by the orthogonality
// conditions used by the decomposition at b = 0 together with (eps_1, Q) = 0: the exact
// constrained minimum of H~ / (|grad eps|^2 + |eps e^{-r/2}|^2) and the smallest value
// seen on random constrained samples.
struct CoercivityReport {
  double minimum = 0;
  double sampled_minimum = 0;
  int samples = 0;
};
CoercivityReport coercivity_transfer(int N, const SpectralGrid& spec = {}, int samples = 64,
                                     unsigned seed = 7);

// H_p(eps, eps) with the potentials of the virial quadratic form.
double virial_form_Hp(const RadialField& eps, const GroundState& gs);

}  // namespace selfsim
