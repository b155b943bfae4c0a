#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace selfsim {

// Finite-difference weights (Fornberg) for derivatives 0..m at z from nodes x.
std::vector<std::vector<double>> fd_weights(double z, const std::vector<double>& x, int m);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double correlation = 0;
};
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> v);

// Root of f on [a, b] (f(a) f(b) <= 0 required) to absolute tolerance tol in x.
double find_root(const std::function<double(double)>& f, double a, double b, double tol);

// Piecewise-cubic (Catmull-Rom style, local) interpolation on a monotone table.
double interpolate_cubic(const std::vector<double>& x, const std::vector<double>& y, double t);

// Lagrange weights of the four table nodes nearest t (lo is the first node used).
struct CubicStencil {
  std::size_t lo = 0;
  std::array<double, 4> w{};
};
CubicStencil cubic_stencil(const std::vector<double>& x, double t);

// Quadratic least squares y ~ c0 + c1 x + c2 x^2.
Eigen::Vector3d quadratic_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace selfsim
