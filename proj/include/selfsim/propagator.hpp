#pragma once

#include "selfsim/fv.hpp"
#include "selfsim/grid.hpp"

namespace selfsim {

// Strang-split radial NLS stepper on the finite-volume discretization:
//   v_s = i Lap v - i shift v + i |v|^{p-1} v - a Lambda v - kappa v.
// The nonlinear and shift terms are exact phase rotations; the rest is one Crank-Nicolson
// step (tridiagonal). With a = 0 and kappa = 0 the linear step is unitary in the FV mass.
class Propagator {
 public:
  Propagator(GridPtr grid, double p);

  const GridPtr& grid() const { return grid_; }
  const FiniteVolume& fv() const { return fv_; }
  double p() const { return p_; }

  // Absorbing layer: kappa ramps as strength * q^2 over the last `fraction` of the computational
  // coordinate (q in [0, 1]).
  void set_absorber(double fraction, double strength);
  const Vec& absorber() const { return kappa_; }
  void set_shift(double shift) { shift_ = shift; }
  void set_nonlinear(bool on) { nonlinear_ = on; }

  // One step; returns false (leaving v untouched) if the result is not finite.
  bool step(CVec& v, double ds, double a) const;

  // Cell-averaged Lambda v = (2/(p-1)) v + r v'.
  CVec lambda(const CVec& v) const;

  double mass(const CVec& v) const;
  double gradient_energy(const CVec& v) const;
  double energy(const CVec& v) const;
  // Outward L2 current 2 Im(conj(v) v') at radius r (interpolated on the face grid).
  double current(const CVec& v, double r) const;

 private:
  void linear(CVec& v, double ds, double a) const;

  GridPtr grid_;
  double p_;
  double alpha_;
  FiniteVolume fv_;
  Vec kappa_;
  // three-point derivative weights per node: lower, diagonal, upper
  Vec dl_, dd_, du_;
  double shift_ = 0;
  bool nonlinear_ = true;
};

}  // namespace selfsim
