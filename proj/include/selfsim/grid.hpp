#pragma once

#include <complex>
#include <memory>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <json.hpp>

namespace selfsim {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using SpMat = Eigen::SparseMatrix<double>;

enum class Mapping { uniform, geometric_stretch };

struct GridSpec {
  int dimension = 1;
  double r_max = 40.0;
  // Node spacing at the origin (in the computational coordinate).
  double h = 0.01;
  Mapping mapping = Mapping::geometric_stretch;
  // Radius where the sinh map switches from uniform to geometric spacing.
  double stretch = 10.0;
};

double unit_sphere_area(int N);

// Radial mesh r_i = g(i k) with g(x) = a sinh(x / a) (or the identity), sixth-order
// finite-difference operators for even fields and Gregory-corrected quadrature.
class RadialGrid {
 public:
  explicit RadialGrid(const GridSpec& spec);

  const GridSpec& spec() const { return spec_; }
  int dimension() const { return spec_.dimension; }
  Eigen::Index size() const { return r_.size(); }
  double r(Eigen::Index i) const { return r_[i]; }
  const Vec& nodes() const { return r_; }
  const Vec& weights() const { return w_; }
  double r_max() const { return r_[r_.size() - 1]; }
  double step() const { return k_; }
  // dr/dx at the nodes.
  const Vec& jacobian() const { return dr_; }

  double map(double x) const;
  double inverse_map(double r) const;
  // Largest node index with r_i <= r.
  Eigen::Index locate(double r) const;

  // d/dr of an even field (result is odd; row 0 is exactly zero).
  const SpMat& d1() const { return d1_; }
  const SpMat& d2() const { return d2_; }
  // f'' + (N-1)/r f', with N f''(0) at the origin.
  const SpMat& laplacian() const { return lap_; }
  // Row vector applying a one-sided d/dr at r_max.
  const Eigen::RowVectorXd& boundary_derivative() const { return dend_; }

  nlohmann::json metadata() const;

 private:
  GridSpec spec_;
  double k_ = 0;
  Vec r_, dr_, d2r_, w_;
  SpMat d1_, d2_, lap_;
  Eigen::RowVectorXd dend_;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

GridPtr make_grid(const GridSpec& spec);

enum class Parity { even, odd };

template <class Scalar>
struct BasicField {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  GridPtr grid;
  Vector values;
  Parity parity = Parity::even;

  BasicField() = default;
  BasicField(GridPtr g, Vector v, Parity par = Parity::even)
      : grid(std::move(g)), values(std::move(v)), parity(par) {}
  explicit BasicField(GridPtr g)
      : grid(std::move(g)), values(Vector::Zero(grid->size())) {}

  Eigen::Index size() const { return values.size(); }
  Scalar operator[](Eigen::Index i) const { return values[i]; }
};

using RadialField = BasicField<cplx>;
using RealField = BasicField<double>;

RadialField complexify(const RealField& f);
RealField real_part(const RadialField& f);
RealField imag_part(const RadialField& f);

// Throws UsageError on length mismatch, non-finite samples or grid mismatch.
void validate(const RadialField& f);
void validate(const RealField& f);
void require_same_grid(const RadialGrid& a, const RadialGrid& b);

RealField laplacian(const RealField& f);
RadialField laplacian(const RadialField& f);
RealField radial_derivative(const RealField& f);
RadialField radial_derivative(const RadialField& f);

// Lambda f = (2/(p-1)) f + r f',  D f = (N/2) f + r f'.
struct ScaleGenerators {
  RadialField lambda;
  RadialField dilation;
};
ScaleGenerators scale_generators(const RadialField& f, double p);
Vec lambda_op(const RadialGrid& g, const Vec& f, double p);
CVec lambda_op(const RadialGrid& g, const CVec& f, double p);
CVec dilation_op(const RadialGrid& g, const CVec& f);

double critical_exponent(int N);
double sigma_c(int N, double p);
// Inverse of sigma_c(N, p) for p.
double exponent_for_sigma(int N, double sigma);

// Quadrature helpers on raw samples.
double integrate(const RadialGrid& g, const Vec& f);
double pairing(const RadialGrid& g, const Vec& f, const Vec& h);
double pairing(const RadialGrid& g, const CVec& f, const CVec& h);

double mass(const RadialField& f);
double gradient_norm2(const RadialField& f);
double energy(const RadialField& f, double p);
// Re integral of f conj(g).
double pairing(const RadialField& f, const RadialField& g);
double pairing(const RealField& f, const RealField& g);
double weighted_norm2(const RadialField& f);
// Im integral of (y . grad f) conj(f).
double virial_moment(const RadialField& f);
// Im integral of grad f conj(f) along a fixed axis.
double momentum(const RadialField& f);

void write_csv(const RadialField& f, const std::string& path);
nlohmann::json to_json(const RadialField& f);

}  // namespace selfsim
