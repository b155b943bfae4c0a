#include "selfsim/fv.hpp"

#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "selfsim/errors.hpp"

namespace selfsim {

double centrifugal_coefficient(int N, int ell) { return ell * (ell + N - 2.0); }

FiniteVolume finite_volume(const RadialGrid& grid) {
  const Eigen::Index M = grid.size();
  const int N = grid.dimension();
  const double omega = unit_sphere_area(N);
  const Vec& r = grid.nodes();
  FiniteVolume fv;
  fv.volume.resize(M);
  fv.conductance.resize(M - 1);
  auto shell = [&](double a, double b) { return omega * (std::pow(b, N) - std::pow(a, N)) / N; };
  for (Eigen::Index i = 0; i < M; ++i) {
    const double lo = (i == 0) ? 0.0 : 0.5 * (r[i - 1] + r[i]);
    const double hi = (i == M - 1) ? r[i] : 0.5 * (r[i] + r[i + 1]);
    fv.volume[i] = shell(lo, hi);
  }
  for (Eigen::Index i = 0; i + 1 < M; ++i) {
    const double mid = 0.5 * (r[i] + r[i + 1]);
    fv.conductance[i] = omega * std::pow(mid, N - 1) / (r[i + 1] - r[i]);
  }
  return fv;
}

SpMat FiniteVolume::stiffness() const {
  const Eigen::Index M = volume.size();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(3 * M);
  for (Eigen::Index i = 0; i + 1 < M; ++i) {
    const double k = conductance[i];
    t.emplace_back(i, i, k);
    t.emplace_back(i + 1, i + 1, k);
    t.emplace_back(i, i + 1, -k);
    t.emplace_back(i + 1, i, -k);
  }
  SpMat K(M, M);
  K.setFromTriplets(t.begin(), t.end());
  return K;
}

Vec sector_spectrum(const RadialGrid& grid, const Vec& potential, int ell, Eigen::Index count) {
  const auto fv = finite_volume(grid);
  const Eigen::Index M = grid.size();
  const Eigen::Index first = (ell >= 1) ? 1 : 0;
  const Eigen::Index n = M - first;
  const double cl = centrifugal_coefficient(grid.dimension(), ell);
  // Symmetric scaling W^{-1/2} A W^{-1/2} keeps the matrix tridiagonal.
  Vec diag(n), sub(n - 1);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index i = k + first;
    double a = fv.volume[i] * potential[i];
    if (i > 0) a += fv.conductance[i - 1] + fv.volume[i] * cl / (grid.r(i) * grid.r(i));
    if (i + 1 < M) a += fv.conductance[i];
    diag[k] = a / fv.volume[i];
    if (k + 1 < n)
      sub[k] = -fv.conductance[i] / std::sqrt(fv.volume[i] * fv.volume[i + 1]);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw SolverFailure("tridiagonal eigen-solve failed");
  return es.eigenvalues().head(std::min(count, n));
}

}  // namespace selfsim
