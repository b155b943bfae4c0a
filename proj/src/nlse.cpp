#include "selfsim/nlse.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <sstream>
#include <thread>

#include "selfsim/dynamics.hpp"
#include "selfsim/errors.hpp"
#include "selfsim/numerics.hpp"
#include "selfsim/profiles.hpp"
#include "selfsim/radiation.hpp"
#include "selfsim/spectral.hpp"

namespace selfsim {

namespace {

double smoothstep5(double q) {
  q = std::clamp(q, 0.0, 1.0);
  return q * q * q * (10 - 15 * q + 6 * q * q);
}

double max_abs(const Eigen::Vector3d& f) { return f.cwiseAbs().maxCoeff(); }

int resolve_workers(int w) {
  if (w > 0) return w;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

CVec ProfileFamily::at(const std::vector<CVec>& table, double bb) const {
  if (bb < b_min() || bb > b_max()) throw RangeError("b outside the profile family");
  const std::vector<double> nodes(b.begin() + 1, b.end());
  const auto s = cubic_stencil(nodes, bb);
  CVec out = s.w[0] * table[s.lo + 1];
  for (std::size_t k = 1; k < 4; ++k) out += s.w[k] * table[s.lo + 1 + k];
  return out;
}

double ProfileFamily::scalar(const std::vector<double>& table, double bb) const {
  return interpolate_cubic(b, table, bb);
}

ProfileFamily build_profile_family(double p, int N, const FamilyOptions& opt) {
  if (!(opt.db > 0) || !(opt.b_first > 0) || opt.b_last < opt.b_first + 3 * opt.db)
    throw ConfigurationError("profile family needs at least four nonzero b nodes");
  ProfileFamily fam;
  fam.N = N;
  fam.p = p;
  fam.eta = opt.eta;
  fam.sigma = sigma_c(N, p);
  fam.gs = solve_ground_state(p, N, make_grid(ground_state_grid(N, 40.0, opt.h)));
  fam.b.push_back(0.0);
  const int count = static_cast<int>(std::floor((opt.b_last - opt.b_first) / opt.db + 1e-9)) + 1;
  for (int k = 0; k < count; ++k) fam.b.push_back(opt.b_first + k * opt.db);

  const std::size_t n = fam.b.size();
  fam.Q.resize(n);
  std::vector<double> ratio(n, 0.0);
  const auto& gs = fam.gs;
  auto build = [&](std::size_t k) {
    if (fam.b[k] == 0.0) {
      fam.Q[k] = gs.Q.cast<cplx>();
      return;
    }
    ProfileOptions po;
    po.eta = opt.eta;
    const auto prof = build_profile(fam.b[k], gs, gs.grid, po);
    fam.Q[k] = prof.Q;
    ratio[k] = prof.sigma * std::sqrt(pairing(*gs.grid, prof.T, prof.T) / pairing(*gs.grid, prof.Pt, prof.Pt));
  };
  const int workers = std::min<int>(resolve_workers(opt.workers), static_cast<int>(n));
  std::vector<std::future<void>> jobs;
  for (int w = 0; w < workers; ++w)
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t k = w; k < n; k += workers) build(k);
    }));
  for (auto& j : jobs) j.get();

  // cut the table below the first node where the correction resonates
  std::size_t keep = n;
  for (std::size_t k = 1; k < n; ++k)
    if (!(ratio[k] <= opt.max_correction)) {
      keep = k;
      fam.resonance = fam.b[k];
      break;
    }
  if (keep < 5) throw ConfigurationError("profile correction resonates below the fourth family node");
  fam.b.resize(keep);
  fam.Q.resize(keep);
  fam.correction_ratio.assign(ratio.begin(), ratio.begin() + keep);
  const std::size_t m = keep;

  const auto& g = *gs.grid;
  const Vec r2 = g.nodes().cwiseAbs2();
  for (std::size_t k = 0; k < m; ++k) {
    const CVec& Q = fam.Q[k];
    fam.LQ.push_back(lambda_op(g, Q, p));
    fam.L2Q.push_back(lambda_op(g, fam.LQ.back(), p));
    fam.y2Q.push_back(r2.cast<cplx>().cwiseProduct(Q));
    fam.mass.push_back(pairing(g, Q, Q));
    const RadialField f(gs.grid, Q);
    const Vec sig = Q.real(), th = Q.imag();
    const double cross = pairing(g, th, Vec(fam.LQ.back().real())) - pairing(g, sig, Vec(fam.LQ.back().imag()));
    fam.ftilde.push_back(0.5 * virial_moment(f) + cross);
  }
  fam.ftilde_integral.assign(m, 0.0);
  for (std::size_t k = 1; k < m; ++k)
    fam.ftilde_integral[k] = fam.ftilde_integral[k - 1] +
                             0.5 * (fam.b[k] - fam.b[k - 1]) * (fam.ftilde[k] + fam.ftilde[k - 1]);
  return fam;
}

CVec resample(const RadialGrid& grid, const CVec& v, double scale, const Vec& y) {
  const Vec& r = grid.nodes();
  const Eigen::Index n = grid.size();
  CVec out(y.size());
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    const double x = scale * y[j];
    if (x > r[n - 1]) {
      out[j] = 0;
      continue;
    }
    const Eigen::Index i = grid.locate(x);
    std::array<double, 4> xs;
    std::array<cplx, 4> vs;
    if (i == 0) {
      xs = {-r[1], 0.0, r[1], r[2]};
      vs = {v[1], v[0], v[1], v[2]};
    } else {
      const Eigen::Index lo = std::min(i - 1, n - 4);
      for (int k = 0; k < 4; ++k) {
        xs[k] = r[lo + k];
        vs[k] = v[lo + k];
      }
    }
    cplx s = 0;
    for (int a = 0; a < 4; ++a) {
      double l = 1;
      for (int b = 0; b < 4; ++b)
        if (b != a) l *= (x - xs[b]) / (xs[a] - xs[b]);
      s += l * vs[a];
    }
    out[j] = s;
  }
  return out;
}

namespace {

struct Trial {
  CVec eps;
  Eigen::Vector3d F;
};

Trial evaluate(const ProfileFamily& fam, const RadialGrid& grid, const CVec& v, const Eigen::Vector3d& x) {
  const auto& g = *fam.grid();
  const double alpha = 2 / (fam.p - 1);
  const double lam = std::exp(x[0]);
  const CVec Q = fam.at(fam.Q, x[1]);
  const CVec LQ = fam.at(fam.LQ, x[1]);
  const CVec L2Q = fam.at(fam.L2Q, x[1]);
  const CVec y2Q = fam.at(fam.y2Q, x[1]);
  const cplx rot = std::polar(std::pow(lam, alpha), -x[2]);
  Trial out;
  out.eps = rot * resample(grid, v, lam, g.nodes()) - Q;
  const Vec& w = g.weights();
  auto inner = [&](const CVec& f) { return w.cwiseProduct(f.cwiseAbs2()).sum(); };
  auto herm = [&](const CVec& a, const CVec& c) {
    cplx s = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) s += w[i] * a[i] * std::conj(c[i]);
    return s;
  };
  const double q = std::sqrt(inner(Q));
  out.F[0] = herm(out.eps, y2Q).real() / (q * std::sqrt(inner(y2Q)));
  out.F[1] = herm(out.eps, L2Q).imag() / (q * std::sqrt(inner(L2Q)));
  out.F[2] = herm(out.eps, LQ).imag() / (q * std::sqrt(inner(LQ)));
  return out;
}

}  // namespace

Eigen::Vector3d orthogonality(const ProfileFamily& fam, const RadialGrid& grid, const CVec& v,
                              const Eigen::Vector3d& params) {
  return evaluate(fam, grid, v, params).F;
}

Decomposition decompose(const ProfileFamily& fam, const RadialGrid& grid, const CVec& v,
                        const ModulationState& seed, double tol) {
  Eigen::Vector3d x(seed.log_lambda, seed.b, seed.gamma);
  auto in_range = [&](const Eigen::Vector3d& z) {
    return std::isfinite(z.sum()) && z[1] >= fam.b_min() && z[1] <= fam.b_max();
  };
  if (!in_range(x)) throw SolverFailure("decomposition seed outside the profile family");
  Trial cur = evaluate(fam, grid, v, x);
  int it = 0;
  for (; it < 40 && max_abs(cur.F) > tol; ++it) {
    Eigen::Matrix3d J;
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
      Eigen::Vector3d xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      if (k == 1) {
        xp[1] = std::min(xp[1], fam.b_max());
        xm[1] = std::max(xm[1], fam.b_min());
      }
      J.col(k) = (evaluate(fam, grid, v, xp).F - evaluate(fam, grid, v, xm).F) / (xp[k] - xm[k]);
    }
    Eigen::FullPivLU<Eigen::Matrix3d> lu(J);
    if (!lu.isInvertible()) throw SolverFailure("singular decomposition Jacobian");
    const Eigen::Vector3d dx = -lu.solve(cur.F);
    double step = 1;
    bool accepted = false;
    while (step > 1e-4) {
      const Eigen::Vector3d xn = x + step * dx;
      if (in_range(xn)) {
        Trial t = evaluate(fam, grid, v, xn);
        if (max_abs(t.F) < max_abs(cur.F)) {
          x = xn;
          cur = std::move(t);
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  if (!(max_abs(cur.F) <= tol)) {
    std::ostringstream os;
    os << "decomposition did not converge (residual " << max_abs(cur.F) << ", b " << x[1] << ")";
    throw SolverFailure(os.str());
  }
  Decomposition d;
  d.state.log_lambda = x[0];
  d.state.b = x[1];
  d.state.gamma = x[2];
  d.state.residual = max_abs(cur.F);
  d.state.iterations = it;
  d.eps = std::move(cur.eps);
  return d;
}

CVec reconstruct(const ProfileFamily& fam, const RadialGrid& grid, const ModulationState& st,
                 const CVec& eps_on_family) {
  const double alpha = 2 / (fam.p - 1);
  const double lam = std::exp(st.log_lambda);
  CVec w = fam.at(fam.Q, st.b);
  if (eps_on_family.size() == w.size()) w += eps_on_family;
  return std::polar(std::pow(lam, -alpha), st.gamma) * resample(*fam.grid(), w, 1 / lam, grid.nodes());
}

double flux_radius(double b, double a) {
  if (!(b > 0)) throw DomainError("flux radius needs b > 0");
  return std::exp(2 * a * theta(2.0) / b);
}

double flux_diagnostic(const Propagator& prop, const CVec& v, double radius, double a) {
  const auto& g = *prop.grid();
  const int N = g.dimension();
  const Eigen::Index i = g.locate(radius);
  if (i + 1 >= g.size()) throw RangeError("flux radius beyond the grid");
  const double q = (radius - g.r(i)) / (g.r(i + 1) - g.r(i));
  const double dens = std::norm((1 - q) * v[i] + q * v[i + 1]);
  return unit_sphere_area(N) * std::pow(radius, N - 1) * (prop.current(v, radius) + a * radius * dens);
}

double lyapunov_J(const ProfileFamily& fam, double b, const CVec& eps, double A, double c23) {
  const auto& g = *fam.grid();
  double J = fam.scalar(fam.mass, b) - fam.mass[0];
  J -= c23 * (b * fam.scalar(fam.ftilde, b) - fam.scalar(fam.ftilde_integral, b));
  if (eps.size() == g.size() && eps.cwiseAbs().maxCoeff() > 0) {
    const CVec Q = fam.at(fam.Q, b);
    J += 2 * pairing(g, eps, Q);
    const Vec& r = g.nodes();
    Vec tail(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) tail[i] = smoothstep5((r[i] - A) / A) * std::norm(eps[i]);
    J += integrate(g, tail);
  }
  return J;
}

double SimConfig::sigma() const { return sigma_c(N, p); }

nlohmann::json SimConfig::to_json() const {
  auto frame_name = frame == Frame::rescaled ? "rescaled" : "lab";
  const char* init_names[] = {"profile", "gaussian", "soliton"};
  const char* pert_names[] = {"none", "energy", "fixed"};
  return {{"schema_version", 1},
          {"p", p},
          {"N", N},
          {"sigma", sigma()},
          {"frame", frame_name},
          {"r_max", grid.r_max},
          {"h", grid.h},
          {"stretch", grid.stretch},
          {"mapping", grid.mapping == Mapping::uniform ? "uniform" : "stretch"},
          {"absorber_fraction", absorber_fraction},
          {"absorber_strength", absorber_strength},
          {"ds", ds},
          {"dt_max", dt_max},
          {"dt_safety", dt_safety},
          {"initial", init_names[static_cast<int>(initial)]},
          {"b0", b0},
          {"lambda0", lambda0},
          {"gamma0", gamma0},
          {"perturbation", pert_names[static_cast<int>(perturbation)]},
          {"perturbation_amplitude", perturbation_amplitude},
          {"bump_center", bump_center},
          {"bump_width", bump_width},
          {"gaussian_amplitude", gaussian_amplitude},
          {"gaussian_width", gaussian_width},
          {"lambda_floor", lambda_floor},
          {"t_max", t_max},
          {"s_max", s_max},
          {"cadence", cadence},
          {"decompose", decompose},
          {"nonlinear", nonlinear},
          {"eta", eta},
          {"family_b_last", family_b_last},
          {"family_db", family_db},
          {"feedback_tau", feedback_tau},
          {"flux_a", flux_a},
          {"c23", c23},
          {"concentration_A0", concentration_A0},
          {"concentration_offset", concentration_offset},
          {"trap_band", trap_band},
          {"eps_ceiling", eps_ceiling},
          {"snapshot_decades", snapshot_decades},
          {"workers", workers}};
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct Reader {
  const std::map<std::string, std::string>& kv;
  const std::map<std::string, int>& lines;

  int line(const std::string& k) const {
    auto it = lines.find(k);
    return it == lines.end() ? 0 : it->second;
  }
  [[noreturn]] void fail(const std::string& k, const std::string& msg) const {
    std::ostringstream os;
    if (line(k) > 0) os << "line " << line(k) << ": ";
    os << "field '" << k << "': " << msg;
    throw SchemaError(k, line(k), os.str());
  }
  bool has(const std::string& k) const { return kv.count(k) > 0; }
  double real(const std::string& k, double def) const {
    if (!has(k)) return def;
    const std::string& s = kv.at(k);
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size() || !std::isfinite(v)) fail(k, "not a finite number: '" + s + "'");
      return v;
    } catch (const std::logic_error&) {
      fail(k, "not a number: '" + s + "'");
    }
  }
  int integer(const std::string& k, int def) const {
    const double v = real(k, def);
    if (v != std::floor(v) || std::abs(v) > 1e9) fail(k, "not an integer");
    return static_cast<int>(v);
  }
  bool boolean(const std::string& k, bool def) const {
    if (!has(k)) return def;
    const std::string& s = kv.at(k);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    fail(k, "expected true or false");
  }
  std::string choice(const std::string& k, const std::string& def, std::initializer_list<const char*> allowed) const {
    if (!has(k)) return def;
    const std::string& s = kv.at(k);
    for (const char* a : allowed)
      if (s == a) return s;
    std::string msg = "expected one of";
    for (const char* a : allowed) msg += std::string(" ") + a;
    fail(k, msg);
  }
};

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "schema_version", "p", "sigma", "N", "frame", "r_max", "h", "stretch", "mapping",
      "absorber_fraction", "absorber_strength", "ds", "dt_max", "dt_safety", "initial", "b0",
      "lambda0", "gamma0", "perturbation", "perturbation_amplitude", "bump_center", "bump_width",
      "gaussian_amplitude", "gaussian_width", "lambda_floor", "t_max", "s_max", "cadence",
      "decompose", "nonlinear", "eta", "family_b_last", "family_db", "feedback_tau", "flux_a", "c23",
      "concentration_A0", "concentration_offset", "trap_band", "eps_ceiling", "snapshot_decades",
      "workers"};
  return keys;
}

SimConfig build_config(const std::map<std::string, std::string>& kv, const std::map<std::string, int>& lines) {
  Reader rd{kv, lines};
  for (const auto& [k, v] : kv)
    if (std::find(known_keys().begin(), known_keys().end(), k) == known_keys().end()) rd.fail(k, "unknown key");
  if (rd.has("schema_version") && rd.integer("schema_version", 1) != 1) rd.fail("schema_version", "unsupported version");

  SimConfig c;
  c.N = rd.integer("N", 1);
  if (c.N < 1 || c.N > 5) rd.fail("N", "dimension must be in 1..5");
  if (rd.has("p") == rd.has("sigma")) rd.fail(rd.has("p") ? "sigma" : "p", "give exactly one of p and sigma");
  if (rd.has("p")) {
    c.p = rd.real("p", 0);
    if (!(c.p > 1)) rd.fail("p", "must exceed 1");
  } else {
    const double s = rd.real("sigma", 0);
    if (!(s >= 0) || s >= 0.5) rd.fail("sigma", "must lie in [0, 0.5)");
    c.p = exponent_for_sigma(c.N, s);
  }
  c.frame = rd.choice("frame", "rescaled", {"rescaled", "lab"}) == "lab" ? Frame::lab : Frame::rescaled;
  c.grid.dimension = c.N;
  c.grid.r_max = rd.real("r_max", c.frame == Frame::lab ? 40.0 : 1e5);
  c.grid.h = rd.real("h", 0.005);
  c.grid.stretch = rd.real("stretch", 10.0);
  c.grid.mapping = rd.choice("mapping", "stretch", {"stretch", "uniform"}) == "uniform" ? Mapping::uniform
                                                                                        : Mapping::geometric_stretch;
  if (!(c.grid.r_max > 0)) rd.fail("r_max", "must be positive");
  if (!(c.grid.h > 0) || c.grid.h > 0.1) rd.fail("h", "must lie in (0, 0.1]");
  if (!(c.grid.stretch > 0)) rd.fail("stretch", "must be positive");
  c.absorber_fraction = rd.real("absorber_fraction", c.frame == Frame::lab ? 0.0 : 0.05);
  c.absorber_strength = rd.real("absorber_strength", 1.0);
  if (c.absorber_fraction < 0 || c.absorber_fraction >= 1) rd.fail("absorber_fraction", "must lie in [0, 1)");
  if (c.absorber_strength < 0) rd.fail("absorber_strength", "must be nonnegative");
  c.ds = rd.real("ds", 0.005);
  c.dt_max = rd.real("dt_max", 1e-3);
  c.dt_safety = rd.real("dt_safety", 0.05);
  if (!(c.ds > 0)) rd.fail("ds", "must be positive");
  if (!(c.dt_max > 0)) rd.fail("dt_max", "must be positive");
  if (!(c.dt_safety > 0)) rd.fail("dt_safety", "must be positive");
  const std::string init = rd.choice("initial", "profile", {"profile", "gaussian", "soliton"});
  c.initial = init == "gaussian" ? InitialKind::gaussian : init == "soliton" ? InitialKind::soliton : InitialKind::profile;
  c.b0 = rd.real("b0", 0.38);
  c.lambda0 = rd.real("lambda0", 1.0);
  if (!(c.lambda0 > 0)) rd.fail("lambda0", "must be positive");
  c.gamma0 = rd.real("gamma0", 0.0);
  const std::string pert = rd.choice("perturbation", "energy", {"none", "energy", "fixed"});
  c.perturbation = pert == "none" ? Perturbation::none : pert == "fixed" ? Perturbation::fixed : Perturbation::energy;
  c.perturbation_amplitude = rd.real("perturbation_amplitude", 0.0);
  c.bump_center = rd.real("bump_center", 3.0);
  c.bump_width = rd.real("bump_width", 2.0);
  if (!(c.bump_width > 0)) rd.fail("bump_width", "must be positive");
  c.gaussian_amplitude = rd.real("gaussian_amplitude", 1.0);
  c.gaussian_width = rd.real("gaussian_width", 1.0);
  if (!(c.gaussian_width > 0)) rd.fail("gaussian_width", "must be positive");
  c.lambda_floor = rd.real("lambda_floor", 1e-8);
  if (!(c.lambda_floor > 0)) rd.fail("lambda_floor", "must be positive");
  c.t_max = rd.real("t_max", 1e30);
  c.s_max = rd.real("s_max", 200);
  if (!(c.t_max > 0)) rd.fail("t_max", "must be positive");
  if (!(c.s_max > 0)) rd.fail("s_max", "must be positive");
  c.cadence = rd.integer("cadence", 20);
  if (c.cadence < 1) rd.fail("cadence", "must be at least 1");
  c.decompose = rd.boolean("decompose", c.initial == InitialKind::profile);
  c.nonlinear = rd.boolean("nonlinear", true);
  c.eta = rd.real("eta", 0.1);
  if (!(c.eta > 0 && c.eta < 1)) rd.fail("eta", "must lie in (0, 1)");
  c.family_b_last = rd.real("family_b_last", 1.0);
  c.family_db = rd.real("family_db", 0.02);
  if (!(c.family_db > 0)) rd.fail("family_db", "must be positive");
  if (c.initial == InitialKind::profile && !(c.b0 > 0 && c.b0 < c.family_b_last))
    rd.fail("b0", "must lie inside the profile family range");
  c.feedback_tau = rd.real("feedback_tau", 0.5);
  if (!(c.feedback_tau > 0)) rd.fail("feedback_tau", "must be positive");
  c.flux_a = rd.real("flux_a", 0.5);
  c.c23 = rd.real("c23", 1.0);
  c.concentration_A0 = rd.real("concentration_A0", 10.0);
  c.concentration_offset = rd.real("concentration_offset", 2.0);
  if (!(c.concentration_A0 > 0)) rd.fail("concentration_A0", "must be positive");
  c.trap_band = rd.real("trap_band", 0.1);
  c.eps_ceiling = rd.real("eps_ceiling", 0.3);
  if (rd.has("snapshot_decades")) {
    std::stringstream ss(kv.at("snapshot_decades"));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      try {
        std::size_t pos = 0;
        c.snapshot_decades.push_back(std::stod(item, &pos));
        if (pos != item.size()) throw std::invalid_argument(item);
      } catch (const std::logic_error&) {
        rd.fail("snapshot_decades", "expected a comma-separated list of numbers");
      }
      if (!(c.snapshot_decades.back() >= 0))
        rd.fail("snapshot_decades", "decades below lambda0 must be nonnegative");
    }
  }
  c.workers = rd.integer("workers", 0);
  if (c.workers < 0) rd.fail("workers", "must be nonnegative");
  return c;
}

}  // namespace

SimConfig sim_config_from(const std::map<std::string, std::string>& kv) { return build_config(kv, {}); }

SimConfig parse_sim_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::map<std::string, int> lines;
  std::istringstream in(text);
  std::string raw;
  int ln = 0;
  while (std::getline(in, raw)) {
    ++ln;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SchemaError("", ln, "line " + std::to_string(ln) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw SchemaError("", ln, "line " + std::to_string(ln) + ": empty key");
    if (kv.count(key)) throw SchemaError(key, ln, "line " + std::to_string(ln) + ": field '" + key + "' repeated");
    kv[key] = val;
    lines[key] = ln;
  }
  return build_config(kv, lines);
}

std::vector<std::string> trace_header() {
  return {"t", "s", "lambda", "b", "gamma", "mass", "energy", "grad_eps", "weighted_eps",
          "modulation_residual", "Hp", "flux", "J", "frame_rate", "decomposition_residual", "dt"};
}

std::vector<double> trace_row(const TraceRecord& r) {
  return {r.t, r.s, r.lambda, r.b, r.gamma, r.mass, r.energy, r.grad_eps, r.weighted_eps,
          r.modulation_residual, r.Hp, r.flux, r.J, r.frame_rate, r.decomposition_residual, r.dt};
}

ConcentrationScan concentration_scan(const RadialGrid& grid, const CVec& w, double lambda, double weight,
                                     double y_lo, double y_hi, double floor, int samples) {
  ConcentrationScan out;
  out.floor = floor;
  const Vec& r = grid.nodes();
  const Vec& q = grid.weights();
  std::vector<Eigen::Index> idx;
  double cum = 0;
  std::vector<double> cumulative(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    cum += q[i] * std::norm(w[i]);
    cumulative[i] = cum;
    if (r[i] >= y_lo && r[i] <= y_hi) idx.push_back(i);
  }
  if (idx.empty()) return out;
  // thin to log-spaced samples
  std::vector<Eigen::Index> pick;
  const double l0 = std::log(r[idx.front()]), l1 = std::log(r[idx.back()]);
  for (int k = 0; k < samples; ++k) {
    const double target = std::exp(l0 + (l1 - l0) * k / std::max(1, samples - 1));
    auto it = std::lower_bound(idx.begin(), idx.end(), target, [&](Eigen::Index i, double t) { return r[i] < t; });
    if (it == idx.end()) --it;
    if (pick.empty() || pick.back() != *it) pick.push_back(*it);
  }
  for (Eigen::Index i : pick) {
    out.R.push_back(lambda * r[i]);
    out.value.push_back(std::pow(r[i], -2 * weight) * cumulative[i]);
  }
  out.sufficient = out.R.size() >= 8;
  const auto [mn, mx] = std::minmax_element(out.value.begin(), out.value.end());
  out.flatness = *mn > 0 ? *mx / *mn : std::numeric_limits<double>::infinity();
  out.increasing = std::is_sorted(out.value.begin(), out.value.end());
  return out;
}

int exit_code(ExitKind k) {
  switch (k) {
    case ExitKind::blowup:
    case ExitKind::completed:
      return 0;
    case ExitKind::exited_tube:
      return 2;
    case ExitKind::resolution_exhausted:
      return 3;
  }
  return 1;
}

std::string to_string(ExitKind k) {
  switch (k) {
    case ExitKind::blowup:
      return "blowup";
    case ExitKind::completed:
      return "completed";
    case ExitKind::exited_tube:
      return "exited_tube";
    case ExitKind::resolution_exhausted:
      return "resolution_exhausted";
  }
  return "unknown";
}

nlohmann::json BlowupReport::to_json() const {
  nlohmann::json conc = {{"R", concentration.R},
                         {"value", concentration.value},
                         {"floor", concentration.floor},
                         {"flatness", concentration.flatness},
                         {"sufficient", concentration.sufficient},
                         {"increasing", concentration.increasing}};
  return {{"exit", to_string(exit)},
          {"exit_code", exit_code(exit)},
          {"reason", reason},
          {"sigma", sigma},
          {"lambda_decades", lambda_decades},
          {"b_fit", b_fit},
          {"T", T},
          {"T_minus_t_end", T_minus_t_end},
          {"lambda2_correlation", lambda2_correlation},
          {"b_median", b_median},
          {"b_band", b_band},
          {"speed_ratio_min", speed_ratio_min},
          {"speed_ratio_max", speed_ratio_max},
          {"sigma_exponent_ratio", sigma_exponent_ratio},
          {"eps_ceiling", eps_ceiling},
          {"profile_norm", profile_norm},
          {"mass_drift", mass_drift},
          {"energy_drift", energy_drift},
          {"virial_correlation", virial_correlation},
          {"mean_flux", mean_flux},
          {"flux_clipped", flux_clipped},
          {"initial_energy", initial_energy},
          {"perturbation_amplitude", perturbation_amplitude},
          {"concentration", conc}};
}

InitialData initial_data(const SimConfig& cfg, const Propagator& prop, const ProfileFamily* fam) {
  const auto& g = *prop.grid();
  const double alpha = 2 / (cfg.p - 1);
  const bool lab = cfg.frame == Frame::lab;
  // the rescaled frame carries lambda0 and gamma0 itself
  const double lam = lab ? cfg.lambda0 : 1.0;
  const cplx phase = std::polar(std::pow(lam, -alpha), lab ? cfg.gamma0 : 0.0);
  const Vec& r = g.nodes();
  InitialData out;
  switch (cfg.initial) {
    case InitialKind::gaussian: {
      out.v = CVec(g.size());
      for (Eigen::Index i = 0; i < g.size(); ++i)
        out.v[i] = phase * cfg.gaussian_amplitude * std::exp(-std::pow(r[i] / (lam * cfg.gaussian_width), 2));
      break;
    }
    case InitialKind::soliton: {
      const auto gs = fam ? fam->gs : solve_ground_state(cfg.p, cfg.N, make_grid(ground_state_grid(cfg.N, 40.0, 0.01)));
      out.v = phase * resample(*gs.grid, gs.Q.cast<cplx>(), 1 / lam, r);
      break;
    }
    case InitialKind::profile: {
      if (!fam) throw UsageError("profile initial data needs a profile family");
      ModulationState st;
      st.log_lambda = std::log(lam);
      st.b = cfg.b0;
      st.gamma = lab ? cfg.gamma0 : 0.0;
      out.v = reconstruct(*fam, g, st);
      break;
    }
  }
  if (cfg.perturbation == Perturbation::none) {
    out.energy = prop.energy(out.v);
    return out;
  }
  CVec bump(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double z = (r[i] / lam - cfg.bump_center) / cfg.bump_width;
    bump[i] = std::abs(z) < 1 ? phase * std::pow(1 - z * z, 3) : cplx(0);
  }
  if (cfg.perturbation == Perturbation::fixed) {
    out.amplitude = cfg.perturbation_amplitude;
  } else {
    auto E = [&](double mu) { return prop.energy(CVec(out.v + mu * bump)); };
    const double e0 = E(0);
    const double M = 2 * out.v.cwiseAbs().maxCoeff() * std::pow(lam, alpha);
    double best = std::numeric_limits<double>::infinity();
    const int n = 400;
    for (int sgn : {1, -1}) {
      double prev = e0, xprev = 0;
      for (int k = 1; k <= n; ++k) {
        const double x = sgn * M * k / n;
        const double e = E(x);
        if ((prev <= 0) != (e <= 0)) {
          const double root = find_root(E, std::min(xprev, x), std::max(xprev, x), 1e-14 * M);
          if (std::abs(root) < std::abs(best)) best = root;
          break;
        }
        prev = e;
        xprev = x;
      }
    }
    if (e0 == 0) best = 0;
    if (!std::isfinite(best)) throw ConfigurationError("no bump amplitude cancels the energy");
    out.amplitude = best;
  }
  out.v += out.amplitude * bump;
  out.energy = prop.energy(out.v);
  return out;
}

namespace {

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 3) return 0;
  return linear_fit(x, y).correlation;
}

}  // namespace

SimResult run_simulation(const SimConfig& cfg, const ProfileFamily* fam_in) {
  if (!(cfg.p > 1)) throw DomainError("p must exceed 1");
  if (!(cfg.lambda0 > 0)) throw DomainError("lambda0 must be positive");
  const double p = cfg.p, alpha = 2 / (p - 1), sigma = cfg.sigma();
  const bool rescaled = cfg.frame == Frame::rescaled;
  GridSpec gspec = cfg.grid;
  gspec.dimension = cfg.N;
  auto grid = make_grid(gspec);
  const auto& g = *grid;
  Propagator prop(grid, p);
  prop.set_nonlinear(cfg.nonlinear);
  prop.set_absorber(cfg.absorber_fraction, cfg.absorber_strength);
  if (rescaled) prop.set_shift(1.0);

  ProfileFamily own;
  const ProfileFamily* fam = fam_in;
  const bool need_family = cfg.decompose || cfg.initial == InitialKind::profile;
  if (need_family && !fam) {
    FamilyOptions fo;
    fo.b_last = cfg.family_b_last;
    fo.db = cfg.family_db;
    fo.eta = cfg.eta;
    fo.workers = cfg.workers;
    own = build_profile_family(p, cfg.N, fo);
    fam = &own;
  }
  if (fam && (fam->N != cfg.N || std::abs(fam->p - p) > 1e-12)) throw UsageError("profile family does not match (N, p)");

  SimResult res;
  res.grid = grid;
  auto& rep = res.report;
  rep.sigma = sigma;
  const InitialData init = initial_data(cfg, prop, fam);
  rep.initial_energy = init.energy;
  rep.perturbation_amplitude = init.amplitude;
  CVec v = init.v;

  // frame state
  double log_lf = rescaled ? std::log(cfg.lambda0) : 0.0;
  double s = 0;
  double a = rescaled ? cfg.b0 : 0.0;
  const double c0 = std::abs(v[0]);
  double lm = std::log(std::abs(v[0]));
  double t = 0, t_comp = 0, dt_since = 0;

  ModulationState seed;
  seed.log_lambda = rescaled ? 0.0 : std::log(cfg.lambda0);
  seed.b = cfg.b0;
  seed.gamma = rescaled ? 0.0 : cfg.gamma0;
  const double resolution = 10 * g.r(1);
  const double absorber_start =
      cfg.absorber_fraction > 0 ? g.map((1 - cfg.absorber_fraction) * g.inverse_map(g.r_max())) : g.r_max();

  CVec last_eps_sim;
  double last_lambda = 0;
  double prev_log_lambda = std::numeric_limits<double>::quiet_NaN(), prev_s = 0;
  std::vector<double> pending_snapshots = cfg.snapshot_decades;
  std::sort(pending_snapshots.begin(), pending_snapshots.end());

  auto frame_lambda_rel = [&]() { return cfg.decompose ? std::exp(seed.log_lambda) : (rescaled ? 1.0 : cfg.lambda0); };

  auto sample = [&]() -> bool {
    TraceRecord rec;
    rec.t = t;
    rec.s = s;
    rec.dt = dt_since;
    dt_since = 0;
    rec.frame_rate = a;
    rec.mass = std::exp(2 * sigma * log_lf) * prop.mass(v);
    rec.energy = std::exp((2 * sigma - 2) * log_lf) * prop.energy(v);
    double lam_rel = frame_lambda_rel();
    double gamma_frame = rescaled ? cfg.gamma0 + s : 0.0;
    rec.b = seed.b;
    if (cfg.decompose) {
      Decomposition d;
      try {
        d = decompose(*fam, g, v, seed);
      } catch (const SolverFailure& e) {
        rep.exit = ExitKind::exited_tube;
        rep.reason = e.what();
        return false;
      }
      seed = d.state;
      lam_rel = std::exp(seed.log_lambda);
      rec.b = seed.b;
      rec.decomposition_residual = seed.residual;
      const cplx rot = std::polar(std::pow(lam_rel, alpha), -seed.gamma);
      CVec eps_sim = rot * resample(g, v, lam_rel, g.nodes()) - resample(*fam->grid(), fam->at(fam->Q, seed.b), 1.0, g.nodes());
      rec.grad_eps = prop.gradient_energy(eps_sim);
      rec.weighted_eps = prop.fv().volume.dot(eps_sim.cwiseAbs2().cwiseProduct(Vec((-g.nodes().array()).exp())));
      rec.Hp = virial_form_Hp(RadialField(fam->grid(), d.eps), fam->gs);
      const double A = flux_radius(seed.b, cfg.flux_a);
      double radius = A * lam_rel;
      if (radius >= absorber_start) {
        radius = 0.99 * absorber_start;
        rep.flux_clipped = true;
      }
      const double f = flux_diagnostic(prop, v, radius, a);
      // per unit renormalized time in renormalized mass
      rec.flux = rescaled ? f : f * lam_rel * lam_rel * std::pow(lam_rel, -2 * sigma);
      rec.J = lyapunov_J(*fam, seed.b, d.eps, A, cfg.c23);
      last_eps_sim = std::move(eps_sim);
    }
    rec.gamma = gamma_frame + seed.gamma;
    const double log_lambda = log_lf + std::log(lam_rel);
    rec.lambda = std::exp(log_lambda);
    if (std::isfinite(prev_log_lambda) && s > prev_s)
      rec.modulation_residual = lam_rel * lam_rel * (log_lambda - prev_log_lambda) / (s - prev_s) + rec.b;
    prev_log_lambda = log_lambda;
    prev_s = s;
    last_lambda = rec.lambda;
    while (!pending_snapshots.empty() && std::log10(rec.lambda) <= -pending_snapshots.front()) {
      res.snapshots.push_back({-pending_snapshots.front(), rec.lambda, v});
      pending_snapshots.erase(pending_snapshots.begin());
    }
    res.trace.push_back(rec);
    return true;
  };

  bool running = sample();
  long n = 0;
  while (running) {
    const double lam_rel = frame_lambda_rel();
    double step_ds, dt;
    if (rescaled) {
      step_ds = cfg.ds;
      dt = std::exp(2 * log_lf) * step_ds;
    } else {
      dt = std::min(cfg.dt_max, cfg.dt_safety * lam_rel * lam_rel);
      if (t + dt > cfg.t_max) dt = cfg.t_max - t;
      step_ds = dt;
    }
    if (!prop.step(v, step_ds, a)) {
      rep.exit = ExitKind::blowup;
      rep.reason = "non-finite field (blow-up signal)";
      break;
    }
    ++n;
    // Kahan-compensated lab time
    {
      const double y = dt - t_comp;
      const double tt = t + y;
      t_comp = (tt - t) - y;
      t = tt;
    }
    dt_since += dt;
    if (rescaled) {
      log_lf -= a * step_ds;
      s += step_ds;
      const double lm1 = std::log(std::abs(v[0]));
      const double growth = (lm1 - lm) / step_ds + alpha * a;
      a = (growth + (lm1 - std::log(c0)) / cfg.feedback_tau) / alpha;
      lm = lm1;
    } else {
      s += dt;
      // predict the modulation seed between samples
      seed.gamma += dt / (lam_rel * lam_rel);
      seed.log_lambda -= seed.b * dt / (lam_rel * lam_rel);
    }
    const double lam_now = std::exp(log_lf) * frame_lambda_rel();
    bool stop = false;
    if (lam_now < cfg.lambda_floor) {
      rep.exit = ExitKind::blowup;
      rep.reason = "lambda below floor";
      stop = true;
    } else if (!rescaled && t >= cfg.t_max) {
      rep.exit = ExitKind::completed;
      rep.reason = "t_max reached";
      stop = true;
    } else if (rescaled && s >= cfg.s_max) {
      rep.exit = ExitKind::resolution_exhausted;
      rep.reason = "s_max reached before the lambda floor";
      stop = true;
    } else if (!rescaled && cfg.decompose && lam_now < resolution) {
      rep.exit = ExitKind::resolution_exhausted;
      rep.reason = "lambda below the lab grid resolution";
      stop = true;
    }
    if (stop || n % cfg.cadence == 0) running = sample() && !stop;
  }
  res.final_field = v;
  res.final_log_lambda_frame = log_lf;

  // analysis
  const auto& tr = res.trace;
  const std::size_t m = tr.size();
  if (m >= 2) {
    const double span = tr.back().t - tr.front().t;
    // frame mass and energy are not conserved under the absorber and the dilation
    rep.mass_drift = rep.energy_drift = std::numeric_limits<double>::quiet_NaN();
    if (!rescaled && span > 0) {
      rep.mass_drift = std::abs(tr.back().mass / tr.front().mass - 1) / span;
      const double e0 = std::abs(tr.front().energy);
      rep.energy_drift = std::abs(tr.back().energy - tr.front().energy) / (e0 > 0 ? e0 : 1.0) / span;
    }
    rep.lambda_decades = std::log10(tr.front().lambda / tr.back().lambda);
  }
  if (cfg.decompose && m >= 8) {
    // remaining lab time measured from the last sample, summed backward
    std::vector<double> tau(m, 0.0);
    for (std::size_t k = m - 1; k-- > 0;) tau[k] = tau[k + 1] + tr[k + 1].dt;
    std::vector<double> x, y;
    for (std::size_t k = static_cast<std::size_t>(0.7 * m); k < m; ++k) {
      x.push_back(tau[k]);
      y.push_back(tr[k].lambda * tr[k].lambda);
    }
    const auto fit = linear_fit(x, y);
    rep.b_fit = 0.5 * fit.slope;
    rep.T_minus_t_end = fit.slope > 0 ? fit.intercept / fit.slope : 0.0;
    rep.T = tr.back().t + rep.T_minus_t_end;
    const double lam_end = tr.back().lambda;
    std::vector<double> xd, yd, bd;
    std::vector<std::size_t> decade;
    for (std::size_t k = 0; k < m; ++k)
      if (tr[k].lambda <= 10 * lam_end) decade.push_back(k);
    for (std::size_t k : decade) {
      xd.push_back(tau[k]);
      yd.push_back(tr[k].lambda * tr[k].lambda);
      bd.push_back(tr[k].b);
    }
    rep.lambda2_correlation = pearson(xd, yd);
    rep.b_median = median(bd);
    rep.b_band = 0;
    for (double bb : bd) rep.b_band = std::max(rep.b_band, std::abs(bb / rep.b_median - 1));
    rep.speed_ratio_min = std::numeric_limits<double>::infinity();
    rep.speed_ratio_max = 0;
    for (std::size_t k : decade) {
      const double rem = tau[k] + rep.T_minus_t_end;
      if (!(rem > 0) || !(rep.b_fit > 0)) continue;
      const double ratio = tr[k].lambda / std::sqrt(2 * rep.b_fit * rem);
      rep.speed_ratio_min = std::min(rep.speed_ratio_min, ratio);
      rep.speed_ratio_max = std::max(rep.speed_ratio_max, ratio);
    }
    if (!std::isfinite(rep.speed_ratio_min)) rep.speed_ratio_min = 0;
    if (sigma > 0 && rep.b_fit > 0) rep.sigma_exponent_ratio = std::log(sigma) / (-M_PI / rep.b_fit);
    {
      const CVec Q = fam->at(fam->Q, std::clamp(rep.b_median, fam->b_min(), fam->b_max()));
      const RadialField qf(fam->grid(), Q);
      rep.profile_norm = gradient_norm2(qf) + weighted_norm2(qf);
    }
    rep.eps_ceiling = 0;
    for (std::size_t k : decade)
      rep.eps_ceiling = std::max(rep.eps_ceiling, (tr[k].grad_eps + tr[k].weighted_eps) / rep.profile_norm);
    std::vector<double> drive, bs;
    for (std::size_t k = 1; k + 1 < m; ++k) {
      const double dsk = tr[k + 1].s - tr[k - 1].s;
      if (!(dsk > 0)) continue;
      bs.push_back((tr[k + 1].b - tr[k - 1].b) / dsk);
      drive.push_back(sigma + tr[k].grad_eps + tr[k].weighted_eps - analytic_gamma(tr[k].b));
    }
    rep.virial_correlation = pearson(drive, bs);
    double fsum = 0;
    int fcount = 0;
    for (std::size_t k = m / 2; k < m; ++k) {
      fsum += tr[k].flux;
      ++fcount;
    }
    rep.mean_flux = fcount ? fsum / fcount : 0.0;
    if (rescaled && last_eps_sim.size() == g.size()) {
      const double y_lo = cfg.concentration_A0 * std::pow(10.0, cfg.concentration_offset);
      const double y_hi = std::min(10 * y_lo, absorber_start);
      rep.concentration =
          concentration_scan(g, last_eps_sim, last_lambda, sigma, y_lo, y_hi, cfg.concentration_A0 * last_lambda);
      if (10 * y_lo > absorber_start) rep.concentration.sufficient = false;
    }
  }
  return res;
}

SimResult run_selfsimilar(SimConfig cfg, const ProfileFamily* fam) {
  cfg.frame = Frame::rescaled;
  return run_simulation(cfg, fam);
}

}  // namespace selfsim
