#include "selfsim/numerics.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/tools/roots.hpp>

#include "selfsim/errors.hpp"

namespace selfsim {

std::vector<std::vector<double>> fd_weights(double z, const std::vector<double>& x, int m) {
  const int n = static_cast<int>(x.size());
  std::vector<std::vector<double>> c(m + 1, std::vector<double>(n, 0.0));
  double c1 = 1.0, c4 = x[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw UsageError("linear fit needs two or more matched points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.correlation = (syy > 0) ? sxy / std::sqrt(sxx * syy) : 1.0;
  return f;
}

double median(std::vector<double> v) {
  if (v.empty()) throw UsageError("median of empty set");
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  const double hi = v[n / 2];
  if (n % 2) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + n / 2));
}

double find_root(const std::function<double(double)>& f, double a, double b, double tol) {
  double fa = f(a), fb = f(b);
  if (fa == 0) return a;
  if (fb == 0) return b;
  if (fa * fb > 0) throw RangeError("root not bracketed");
  std::uintmax_t iters = 200;
  auto stop = [tol](double lo, double hi) { return std::abs(hi - lo) <= tol; };
  const auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, stop, iters);
  return 0.5 * (r.first + r.second);
}

CubicStencil cubic_stencil(const std::vector<double>& x, double t) {
  const std::size_t n = x.size();
  if (n < 4) throw UsageError("interpolation table too small");
  if (t < x.front() || t > x.back()) throw RangeError("interpolation point outside table");
  std::size_t i = std::upper_bound(x.begin(), x.end(), t) - x.begin();
  i = std::clamp<std::size_t>(i, 1, n - 1) - 1;
  CubicStencil s;
  s.lo = std::min((i == 0) ? 0 : i - 1, n - 4);
  for (std::size_t a = 0; a < 4; ++a) {
    double l = 1;
    for (std::size_t b = 0; b < 4; ++b)
      if (b != a) l *= (t - x[s.lo + b]) / (x[s.lo + a] - x[s.lo + b]);
    s.w[a] = l;
  }
  return s;
}

double interpolate_cubic(const std::vector<double>& x, const std::vector<double>& y, double t) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw UsageError("interpolation table too small");
  if (t < x.front() || t > x.back()) throw RangeError("interpolation point outside table");
  if (n < 4) {
    std::size_t i = std::upper_bound(x.begin(), x.end(), t) - x.begin();
    i = std::clamp<std::size_t>(i, 1, n - 1) - 1;
    const double s = (t - x[i]) / (x[i + 1] - x[i]);
    return (1 - s) * y[i] + s * y[i + 1];
  }
  const auto s = cubic_stencil(x, t);
  double out = 0;
  for (std::size_t a = 0; a < 4; ++a) out += s.w[a] * y[s.lo + a];
  return out;
}

Eigen::Vector3d quadratic_fit(const std::vector<double>& x, const std::vector<double>& y) {
  Eigen::MatrixXd A(x.size(), 3);
  Eigen::VectorXd rhs(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    A(i, 0) = 1;
    A(i, 1) = x[i];
    A(i, 2) = x[i] * x[i];
    rhs[i] = y[i];
  }
  return A.colPivHouseholderQr().solve(rhs);
}

}  // namespace selfsim
