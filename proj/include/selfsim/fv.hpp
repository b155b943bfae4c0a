#pragma once

#include "selfsim/grid.hpp"

namespace selfsim {

// Second-order finite-volume (box) discretization on the grid nodes: cell volumes around
// each node and face conductances omega_N r_{i+1/2}^{N-1} / (r_{i+1} - r_i). The
// quadratic form sum_faces kappa (f_{i+1} - f_i)^2 approximates integral |f'|^2.
struct FiniteVolume {
  Vec volume;
  Vec conductance;
  // Cell-averaged Laplacian is -W^{-1} K.
  SpMat stiffness() const;
};

FiniteVolume finite_volume(const RadialGrid& grid);

// Eigenvalues (ascending) of the symmetric pencil (K + diag(W V), diag(W)) in the
// angular sector ell, where V already excludes the centrifugal term. Sectors ell >= 1
// impose f(0) = 0.
Vec sector_spectrum(const RadialGrid& grid, const Vec& potential, int ell, Eigen::Index count);

double centrifugal_coefficient(int N, int ell);

}  // namespace selfsim
