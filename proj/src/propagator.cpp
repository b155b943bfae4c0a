#include "selfsim/propagator.hpp"

#include <cmath>

#include "selfsim/errors.hpp"
#include "selfsim/numerics.hpp"

namespace selfsim {

Propagator::Propagator(GridPtr grid, double p)
    : grid_(std::move(grid)), p_(p), alpha_(2.0 / (p - 1.0)), fv_(finite_volume(*grid_)) {
  if (!(p > 1)) throw DomainError("p must exceed 1");
  const Eigen::Index n = grid_->size();
  kappa_ = Vec::Zero(n);
  dl_ = Vec::Zero(n);
  dd_ = Vec::Zero(n);
  du_ = Vec::Zero(n);
  const Vec& r = grid_->nodes();
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    const auto w = fd_weights(r[i], {r[i - 1], r[i], r[i + 1]}, 1);
    dl_[i] = w[1][0];
    dd_[i] = w[1][1];
    du_[i] = w[1][2];
  }
  // outflow end: backward difference
  const double h = r[n - 1] - r[n - 2];
  dl_[n - 1] = -1 / h;
  dd_[n - 1] = 1 / h;
}

void Propagator::set_absorber(double fraction, double strength) {
  const Eigen::Index n = grid_->size();
  kappa_ = Vec::Zero(n);
  if (fraction <= 0 || strength <= 0) return;
  const double x_max = grid_->inverse_map(grid_->r_max());
  const double x0 = (1 - fraction) * x_max;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = grid_->inverse_map(grid_->r(i));
    if (x > x0) {
      const double q = (x - x0) / (x_max - x0);
      kappa_[i] = strength * q * q;
    }
  }
}

CVec Propagator::lambda(const CVec& v) const {
  const Eigen::Index n = v.size();
  CVec out(n);
  const Vec& r = grid_->nodes();
  out[0] = alpha_ * v[0];
  for (Eigen::Index i = 1; i < n; ++i) {
    cplx d = dl_[i] * v[i - 1] + dd_[i] * v[i];
    if (i + 1 < n) d += du_[i] * v[i + 1];
    out[i] = alpha_ * v[i] + r[i] * d;
  }
  return out;
}

void Propagator::linear(CVec& v, double ds, double a) const {
  // (W + ds/2 B) v+ = (W - ds/2 B) v with B = i K + a W Lambda + W kappa
  const Eigen::Index n = v.size();
  const Vec& W = fv_.volume;
  const Vec& k = fv_.conductance;
  const Vec& r = grid_->nodes();
  const cplx I(0, 1);
  std::vector<cplx> lo(n), di(n), up(n), rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double kl = i > 0 ? k[i - 1] : 0.0;
    const double ku = i + 1 < n ? k[i] : 0.0;
    cplx bl = i > 0 ? -I * kl : cplx(0);
    cplx bu = i + 1 < n ? -I * ku : cplx(0);
    cplx bd = I * (kl + ku) + W[i] * (a * alpha_ + kappa_[i]);
    if (i > 0) {
      bl += a * W[i] * r[i] * dl_[i];
      bd += a * W[i] * r[i] * dd_[i];
      bu += a * W[i] * r[i] * du_[i];
    }
    lo[i] = 0.5 * ds * bl;
    up[i] = 0.5 * ds * bu;
    di[i] = W[i] + 0.5 * ds * bd;
    cplx s = (W[i] - 0.5 * ds * bd) * v[i];
    if (i > 0) s -= 0.5 * ds * bl * v[i - 1];
    if (i + 1 < n) s -= 0.5 * ds * bu * v[i + 1];
    rhs[i] = s;
  }
  // Thomas
  for (Eigen::Index i = 1; i < n; ++i) {
    const cplx m = lo[i] / di[i - 1];
    di[i] -= m * up[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  v[n - 1] = rhs[n - 1] / di[n - 1];
  for (Eigen::Index i = n - 1; i-- > 0;) v[i] = (rhs[i] - up[i] * v[i + 1]) / di[i];
}

bool Propagator::step(CVec& v, double ds, double a) const {
  CVec w = v;
  auto rotate = [&](double h) {
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      double phase = -shift_;
      if (nonlinear_) phase += std::pow(std::abs(w[i]), p_ - 1);
      w[i] *= std::polar(1.0, h * phase);
    }
  };
  rotate(0.5 * ds);
  linear(w, ds, a);
  rotate(0.5 * ds);
  if (!w.allFinite()) return false;
  v = std::move(w);
  return true;
}

double Propagator::mass(const CVec& v) const { return fv_.volume.dot(v.cwiseAbs2()); }

double Propagator::gradient_energy(const CVec& v) const {
  double s = 0;
  for (Eigen::Index i = 0; i + 1 < v.size(); ++i) s += fv_.conductance[i] * std::norm(v[i + 1] - v[i]);
  return s;
}

double Propagator::energy(const CVec& v) const {
  double pot = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) pot += fv_.volume[i] * std::pow(std::abs(v[i]), p_ + 1);
  return 0.5 * gradient_energy(v) - pot / (p_ + 1);
}

double Propagator::current(const CVec& v, double r) const {
  const auto& g = *grid_;
  const Eigen::Index n = g.size();
  if (r > g.r(n - 2)) throw RangeError("flux radius beyond the grid");
  auto face = [&](Eigen::Index i) {
    const cplx mid = 0.5 * (v[i] + v[i + 1]);
    const cplx d = (v[i + 1] - v[i]) / (g.r(i + 1) - g.r(i));
    return std::pair{0.5 * (g.r(i) + g.r(i + 1)), 2 * std::imag(std::conj(mid) * d)};
  };
  // linear interpolation between the two face values around r
  Eigen::Index i = g.locate(r);
  if (i > 0 && r < 0.5 * (g.r(i) + g.r(i + 1))) --i;
  if (i + 2 >= n) i = n - 3;
  const auto [x0, j0] = face(i);
  const auto [x1, j1] = face(i + 1);
  const double q = (r - x0) / (x1 - x0);
  return (1 - q) * j0 + q * j1;
}

}  // namespace selfsim
