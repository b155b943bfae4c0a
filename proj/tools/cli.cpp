#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "flagship.hpp"
#include "selfsim/dynamics.hpp"
#include "selfsim/errors.hpp"
#include "selfsim/groundstate.hpp"
#include "selfsim/nlse.hpp"
#include "selfsim/profiles.hpp"
#include "selfsim/radiation.hpp"
#include "selfsim/spectral.hpp"

namespace selfsim::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string config_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

// shortest round-trip text of a double
std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class RunDir {
 public:
  RunDir(fs::path root, std::string command, std::string hash)
      : root_(std::move(root)), command_(std::move(command)), hash_(std::move(hash)) {}

  const fs::path& path() {
    if (dir_.empty()) {
      std::time_t now = std::time(nullptr);
      std::tm tm{};
      gmtime_r(&now, &tm);
      char stamp[32];
      std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
      const std::string base = std::string(stamp) + "-" + command_ + "-" + hash_;
      dir_ = root_ / base;
      for (int k = 1; fs::exists(dir_); ++k) dir_ = root_ / (base + "-" + std::to_string(k));
      fs::create_directories(dir_);
    }
    return dir_;
  }

  bool created() const { return !dir_.empty(); }

  void csv(const std::string& name, const std::vector<std::string>& header,
           const std::vector<std::vector<double>>& rows) {
    std::ofstream f(open(name));
    for (std::size_t j = 0; j < header.size(); ++j) f << (j ? "," : "") << header[j];
    f << '\n';
    for (const auto& row : rows) {
      for (std::size_t j = 0; j < row.size(); ++j) f << (j ? "," : "") << fmt(row[j]);
      f << '\n';
    }
    finish(f, name);
  }

  void field(const std::string& name, const RadialField& fld) {
    std::vector<std::vector<double>> rows;
    rows.reserve(fld.size());
    for (Eigen::Index i = 0; i < fld.size(); ++i)
      rows.push_back({fld.grid->r(i), fld.values[i].real(), fld.values[i].imag()});
    csv(name, {"r", "re", "im"}, rows);
  }

  void write_json(const std::string& name, const json& j) {
    std::ofstream f(open(name));
    f << j.dump(2) << '\n';
    finish(f, name);
  }

  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path open(const std::string& name) { return path() / name; }
  void finish(std::ofstream& f, const std::string& name) {
    f.flush();
    if (!f) throw std::ios_base::failure("cannot write " + (dir_ / name).string());
    files_.push_back(name);
  }

  fs::path root_;
  std::string command_, hash_;
  fs::path dir_;
  std::vector<std::string> files_;
};

// Runs jobs 0..n-1 on at most `workers` threads; the first exception is rethrown after all joins.
void parallel_for(int n, int workers, const std::function<void(int)>& job) {
  if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, std::max(n, 1));
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int k; (k = next++) < n;) {
        try {
          job(k);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<double> parse_list(const std::string& field, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (item.empty() || used != item.size() || !std::isfinite(v))
      throw SchemaError(field, 0, field + ": malformed list entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw SchemaError(field, 0, field + ": empty list");
  return out;
}

// name=value overrides restricted to the names a subcommand declares
std::map<std::string, double> parse_tolerances(const std::vector<std::string>& items,
                                               const std::map<std::string, double>& defaults) {
  std::map<std::string, double> out = defaults;
  for (const auto& it : items) {
    const auto eq = it.find('=');
    const std::string key = it.substr(0, eq);
    if (eq == std::string::npos || !defaults.count(key))
      throw SchemaError("--tol", 0, "--tol: unknown tolerance '" + key + "'");
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(it.substr(eq + 1), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != it.size() - eq - 1 || !(v > 0))
      throw SchemaError("--tol", 0, "--tol: " + key + " needs a positive number");
    out[key] = v;
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw SchemaError("--config", 0, "cannot read config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json sector_json(const SpectralReport& rep) {
  json rows = json::array();
  for (const auto& s : rep.sectors)
    rows.push_back({{"sector", s.sector},
                    {"part", s.part},
                    {"minimum", s.minimum},
                    {"constraints", s.constraints}});
  return {{"N", rep.N},
          {"constraints", rep.variant == ConstraintVariant::printed ? "printed" : "moment"},
          {"delta1", rep.delta1},
          {"property_holds", rep.property_holds()},
          {"monotone_in_sector", rep.monotone_in_sector},
          {"sectors", rows}};
}

struct Command {
  // canonical parameters (hashed)
  json params;
  // runs after validation; fills the summary and returns the exit code
  std::function<int(RunDir&, json&)> body;
};

Vec padded(const Vec& v, Eigen::Index n) {
  Vec out = Vec::Zero(n);
  out.head(std::min(n, v.size())) = v.head(std::min(n, v.size()));
  return out;
}

CVec padded(const CVec& v, Eigen::Index n) {
  CVec out = CVec::Zero(n);
  out.head(std::min(n, v.size())) = v.head(std::min(n, v.size()));
  return out;
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw SchemaError(field, 0, field + ": " + what);
}

int error_code(const std::exception& e) {
  if (dynamic_cast<const SchemaError*>(&e)) return kUsage;
  if (dynamic_cast<const DomainError*>(&e)) return kDomain;
  if (dynamic_cast<const ConfigurationError*>(&e)) return kConfiguration;
  if (dynamic_cast<const UsageError*>(&e)) return kConfiguration;
  if (dynamic_cast<const RangeError*>(&e)) return kRange;
  if (dynamic_cast<const SolverFailure*>(&e)) return kSolver;
  if (dynamic_cast<const std::ios_base::failure*>(&e)) return kIo;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kIo;
  return 1;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Numerical lab for self-similar blow-up of slightly supercritical NLS", "selfsim"};
  app.require_subcommand(1);
  std::string out_root;
  int workers = 0;
  std::vector<std::string> tol;
  app.set_help_flag("--help", "print this help and exit");
  // -h stays free for the node spacing
  auto subcommand = [&](const std::string& n, const std::string& desc) {
    auto* sc = app.add_subcommand(n, desc);
    sc->set_help_flag("--help", "print this help and exit");
    return sc;
  };
  auto common = [&](CLI::App* sc, bool sweep) {
    sc->add_option("--out", out_root, "output root (default: $SELFSIM_OUTPUT_ROOT, else ./runs)");
    if (sweep)
      sc->add_option("--workers", workers, "worker threads (0 = hardware concurrency)")
          ->check(CLI::NonNegativeNumber);
    sc->add_option("--tol", tol, "tolerance override name=value (repeatable)");
  };

  double p = 0, b = 0, eta = 0.1, h = 0.01, rmax = 40;
  int N = 1, nodes = 0;
  std::string b_list, variant = "printed", source = "analytic", mode = "closed-form";
  std::string config_path, run_path;

  auto* c_gs = subcommand("groundstate", "ground state Q_p: JSON report and CSV field");
  c_gs->add_option("--p", p, "nonlinearity exponent")->required();
  c_gs->add_option("--N", N, "dimension")->required()->check(CLI::Range(1, 5));
  c_gs->add_option("--rmax", rmax, "outer radius")->check(CLI::PositiveNumber);
  c_gs->add_option("--h", h, "node spacing at the origin")->check(CLI::PositiveNumber);
  c_gs->add_option("--nodes", nodes, "node count (sets the spacing)")->check(CLI::Range(16, 10000000));
  common(c_gs, false);

  auto* c_pr = subcommand("profile", "profile Q_b: JSON record and CSV of P0, T_b, Psi_b");
  c_pr->add_option("--p", p, "nonlinearity exponent")->required();
  c_pr->add_option("--N", N, "dimension")->check(CLI::Range(1, 5));
  c_pr->add_option("--b", b, "profile parameter b")->required()->check(CLI::PositiveNumber);
  c_pr->add_option("--eta", eta, "cutoff parameter")->check(CLI::Range(0.0, 1.0));
  c_pr->add_option("--h", h, "node spacing at the origin")->check(CLI::PositiveNumber);
  common(c_pr, false);

  auto* c_ps = subcommand("profile-sweep", "profile invariants over a list of b (CSV)");
  c_ps->add_option("--p", p, "nonlinearity exponent")->required();
  c_ps->add_option("--N", N, "dimension")->check(CLI::Range(1, 5));
  c_ps->add_option("--b-list", b_list, "comma-separated b values")->required();
  c_ps->add_option("--eta", eta, "cutoff parameter")->check(CLI::Range(0.0, 1.0));
  c_ps->add_option("--h", h, "node spacing at the origin")->check(CLI::PositiveNumber);
  common(c_ps, true);

  double rfactor = 5;
  auto* c_rad = subcommand("radiation", "outgoing radiation zeta_b: JSON and CSV field");
  c_rad->add_option("--p", p, "nonlinearity exponent")->required();
  c_rad->add_option("--N", N, "dimension")->check(CLI::Range(1, 5));
  c_rad->add_option("--b", b, "profile parameter b")->required()->check(CLI::PositiveNumber);
  c_rad->add_option("--eta", eta, "cutoff parameter")->check(CLI::Range(0.0, 1.0));
  c_rad->add_option("--h", h, "node spacing at the origin")->check(CLI::PositiveNumber);
  c_rad->add_option("--rmax-factor", rfactor, "outer radius in units of R_b^2")
      ->check(CLI::Range(4.0, 100.0));
  common(c_rad, false);

  auto* c_gam = subcommand("gamma-sweep", "radiation flux Gamma_b over a list of b (CSV)");
  c_gam->add_option("--p", p, "nonlinearity exponent (default: critical)");
  c_gam->add_option("--N", N, "dimension")->check(CLI::Range(1, 5));
  c_gam->add_option("--b-list", b_list, "comma-separated b values")->required();
  c_gam->add_option("--eta", eta, "cutoff parameter")->check(CLI::Range(0.0, 1.0));
  c_gam->add_option("--h", h, "node spacing at the origin")->check(CLI::PositiveNumber);
  common(c_gam, true);

  double sp_h = 0.05, sp_rmax = 30, sp_stretch = 4;
  auto* c_sp = subcommand("spectral", "constrained minima of the linearized operators");
  c_sp->add_option("--N", N, "dimension")->required()->check(CLI::Range(1, 5));
  c_sp->add_option("--p", p, "exponent (must be critical if given)");
  c_sp->add_option("--constraints", variant, "radial constraint set")
      ->check(CLI::IsMember({"printed", "moment", "both"}));
  c_sp->add_option("--rmax", sp_rmax, "outer radius")->check(CLI::PositiveNumber);
  c_sp->add_option("--h", sp_h, "node spacing at the origin")->check(CLI::PositiveNumber);
  c_sp->add_option("--stretch", sp_stretch, "radius where the map turns geometric")
      ->check(CLI::PositiveNumber);
  common(c_sp, true);

  double sigma = 0, b0 = 0, c_virial = 1, c_flux = 1, window = 0.25, lam_floor = 1e-20,
         s_max = 1e6;
  auto* c_red = subcommand("reduced", "reduced (b, lambda) dynamics: CSV trajectory");
  c_red->add_option("--sigma-c", sigma, "supercriticality sigma_c")->required();
  c_red->add_option("--b0", b0, "initial b")->required()->check(CLI::PositiveNumber);
  c_red->add_option("--gamma-source", source, "Gamma_b source")
      ->check(CLI::IsMember({"analytic", "table"}));
  c_red->add_option("--N", N, "dimension (table source)")->check(CLI::Range(1, 5));
  c_red->add_option("--b-list", b_list, "table nodes (table source)");
  c_red->add_option("--c-virial", c_virial, "virial constant")->check(CLI::PositiveNumber);
  c_red->add_option("--c-flux", c_flux, "flux constant")->check(CLI::PositiveNumber);
  c_red->add_option("--window", window, "trapping window half-width")->check(CLI::Range(0.0, 1.0));
  c_red->add_option("--lambda-floor", lam_floor, "stop below this lambda")->check(CLI::PositiveNumber);
  c_red->add_option("--s-max", s_max, "rescaled-time horizon")->check(CLI::PositiveNumber);
  common(c_red, true);

  auto* c_bs = subcommand("bstar", "sigma_c and the trapped value b*");
  c_bs->add_option("--p", p, "nonlinearity exponent")->required();
  c_bs->add_option("--N", N, "dimension")->check(CLI::Range(1, 5));
  c_bs->add_option("--mode", mode, "closed form or tabulated Gamma_b")
      ->check(CLI::IsMember({"closed-form", "table"}));
  common(c_bs, true);

  auto* c_sim = subcommand("simulate", "PDE run from a key = value config file");
  c_sim->add_option("--config", config_path, "config file")->required();
  common(c_sim, true);

  auto* c_rep = subcommand("report", "band checks on a finished simulate run");
  c_rep->add_option("--run", run_path, "simulate run directory")->required();
  common(c_rep, false);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kUsage;
  }

  CLI::App* sc = app.get_subcommands().front();
  const std::string name = sc->get_name();
  Command cmd;
  std::map<std::string, double> tols;
  try {
    if (sc == c_gs) {
      tols = parse_tolerances(tol, {});
      GridSpec spec = ground_state_grid(N, rmax, h);
      if (nodes > 0) spec.h = spec.stretch * std::asinh(rmax / spec.stretch) / (nodes - 1);
      cmd.params = {{"p", p}, {"N", N}, {"r_max", spec.r_max}, {"h", spec.h}};
      cmd.body = [spec, p, N](RunDir& run, json& summary) {
        const auto gs = solve_ground_state(p, N, make_grid(spec));
        const auto kc = kernel_checks(gs);
        const auto pc = pohozaev_checks(gs);
        summary = {{"N", N},
                   {"p", p},
                   {"sigma_c", sigma_c(N, p)},
                   {"Q0", gs.Q[0]},
                   {"mass", gs.mass},
                   {"moment2", gs.moment2},
                   {"energy", gs.energy},
                   {"nodes", gs.grid->size()},
                   {"kernel", {{"lminus", kc.lminus},
                               {"lplus_lambda", kc.lplus_lambda},
                               {"sector1_eigenvalue", kc.sector1_eigenvalue}}},
                   {"pohozaev", {{"with_q", pc.with_q}, {"with_lambda_q", pc.with_lambda_q}}},
                   {"grid", gs.grid->metadata()}};
        std::vector<std::vector<double>> rows;
        for (Eigen::Index i = 0; i < gs.grid->size(); ++i)
          rows.push_back({gs.grid->r(i), gs.Q[i], gs.dQ[i]});
        run.csv("groundstate.csv", {"r", "Q", "dQ"}, rows);
        run.write_json("groundstate.json", summary);
        return 0;
      };
    } else if (sc == c_pr) {
      tols = parse_tolerances(tol, {{"db_relative", 1e-3}});
      cmd.params = {{"p", p}, {"N", N}, {"b", b}, {"eta", eta}, {"h", h}};
      const double dbr = tols["db_relative"];
      cmd.body = [=](RunDir& run, json& summary) {
        const auto gs = solve_ground_state(p, N);
        const auto grid = make_grid(profile_grid(N, b, eta, h));
        ProfileOptions opt;
        opt.eta = eta;
        opt.db_relative = dbr;
        const auto prof = build_profile(b, gs, grid, opt);
        const auto inv = profile_invariants(prof, gs);
        const CVec psi = full_error(prof, gs, dbr);
        const auto n = grid->size();
        const Vec P0 = padded(prof.P0.P, n), Pt = padded(prof.Pt, n);
        const CVec T = padded(prof.T, n);
        std::vector<std::vector<double>> rows;
        for (Eigen::Index i = 0; i < n; ++i)
          rows.push_back({grid->r(i), P0[i], Pt[i], T[i].real(), T[i].imag(), psi[i].real(),
                          psi[i].imag(), prof.Q[i].real(), prof.Q[i].imag()});
        run.csv("profile.csv",
                {"r", "P0", "P_cut", "T_re", "T_im", "Psi_re", "Psi_im", "Q_re", "Q_im"}, rows);
        summary = {{"N", N},
                   {"p", p},
                   {"b", b},
                   {"eta", eta},
                   {"sigma_c", prof.sigma},
                   {"radius", prof.radius},
                   {"inner_radius", prof.inner_radius},
                   {"mu", prof.mu},
                   {"lambda_b", prof.lambda_b},
                   {"correction_residual", {prof.residual_re, prof.residual_im}},
                   {"momentum", inv.momentum},
                   {"virial", inv.virial},
                   {"virial_reference", inv.virial_reference},
                   {"mass", inv.mass},
                   {"mass_excess", inv.mass_excess},
                   {"energy", inv.energy},
                   {"energy_pohozaev", inv.energy_pohozaev}};
        run.write_json("profile.json", summary);
        return 0;
      };
    } else if (sc == c_ps) {
      tols = parse_tolerances(tol, {{"db_relative", 1e-3}});
      const auto bs = parse_list("--b-list", b_list);
      for (double x : bs) require(x > 0, "--b-list", "b must be positive");
      cmd.params = {{"p", p}, {"N", N}, {"b", bs}, {"eta", eta}, {"h", h}};
      const double dbr = tols["db_relative"];
      const int w = workers;
      cmd.body = [=](RunDir& run, json& summary) {
        const auto gs = solve_ground_state(p, N);
        std::vector<std::vector<double>> rows(bs.size());
        parallel_for(static_cast<int>(bs.size()), w, [&](int k) {
          const auto grid = make_grid(profile_grid(N, bs[k], eta, h));
          ProfileOptions opt;
          opt.eta = eta;
          opt.db_relative = dbr;
          const auto prof = build_profile(bs[k], gs, grid, opt);
          const auto inv = profile_invariants(prof, gs);
          rows[k] = {bs[k], prof.mu, inv.mass, inv.mass_excess, inv.energy, inv.virial,
                     inv.virial_reference, inv.momentum};
        });
        run.csv("profile_sweep.csv",
                {"b", "mu", "mass", "mass_excess", "energy", "virial", "virial_reference",
                 "momentum"},
                rows);
        summary = {{"N", N}, {"p", p}, {"rows", rows.size()}};
        return 0;
      };
    } else if (sc == c_rad) {
      tols = parse_tolerances(tol, {{"max_flatness", 1.25}});
      cmd.params = {{"p", p}, {"N", N}, {"b", b}, {"eta", eta}, {"h", h}, {"rmax_factor", rfactor}};
      const double flat = tols["max_flatness"];
      cmd.body = [=](RunDir& run, json& summary) {
        const auto sol = radiation_for(N, p, b, eta, h, rfactor);
        run.field("zeta.csv", sol.field());
        summary = {{"N", N},
                   {"p", p},
                   {"b", b},
                   {"eta", eta},
                   {"source_radius", sol.source_radius},
                   {"gradient_norm2", sol.gradient_norm2},
                   {"residual", sol.residual}};
        const auto est = extract_Gamma(sol, flat);
        summary["Gamma"] = est.gamma;
        summary["flatness"] = est.flatness;
        summary["window"] = {est.r_lo, est.r_hi};
        summary["normalized_exponent"] = -b * std::log(est.gamma) / M_PI;
        summary["exponent_constant"] = exponent_constant(b, est.gamma, eta);
        run.write_json("radiation.json", summary);
        return 0;
      };
    } else if (sc == c_gam) {
      tols = parse_tolerances(tol, {});
      const auto bs = parse_list("--b-list", b_list);
      for (double x : bs) require(x > 0, "--b-list", "b must be positive");
      const double pp = c_gam->count("--p") ? p : critical_exponent(N);
      cmd.params = {{"p", pp}, {"N", N}, {"b", bs}, {"eta", eta}, {"h", h}};
      const int w = workers;
      cmd.body = [=](RunDir& run, json& summary) {
        const auto sweep = gamma_sweep(N, pp, bs, eta, w, h);
        std::vector<std::vector<double>> rows;
        for (const auto& r : sweep)
          rows.push_back({r.b, r.estimate.gamma, r.normalized_exponent, r.estimate.flatness,
                          r.gradient_norm2});
        run.csv("gamma_sweep.csv",
                {"b", "Gamma", "normalized_exponent", "flatness", "gradient_norm2"}, rows);
        summary = {{"N", N}, {"p", pp}, {"rows", rows.size()}};
        return 0;
      };
    } else if (sc == c_sp) {
      tols = parse_tolerances(tol, {});
      if (c_sp->count("--p") && std::abs(p - critical_exponent(N)) > 1e-12)
        throw SchemaError("--p", 0, "--p: the spectral check runs at the critical exponent 1 + 4/N");
      const SpectralGrid spec{sp_rmax, sp_h, sp_stretch};
      cmd.params = {{"N", N}, {"constraints", variant}, {"r_max", sp_rmax}, {"h", sp_h},
                    {"stretch", sp_stretch}};
      const std::string var = variant;
      const int w = workers;
      cmd.body = [=](RunDir& run, json& summary) {
        std::vector<ConstraintVariant> sets;
        if (var != "moment") sets.push_back(ConstraintVariant::printed);
        if (var != "printed") sets.push_back(ConstraintVariant::moment);
        std::vector<SpectralReport> reps(sets.size());
        parallel_for(static_cast<int>(sets.size()), w,
                     [&](int k) { reps[k] = verify_spectral_property(N, spec, sets[k]); });
        summary = {{"N", N}, {"p", critical_exponent(N)}, {"reports", json::array()}};
        for (const auto& r : reps) summary["reports"].push_back(sector_json(r));
        summary["delta1"] = reps.front().delta1;
        run.write_json("spectral.json", summary);
        return 0;
      };
    } else if (sc == c_red) {
      tols = parse_tolerances(tol, {{"tolerance", 1e-11}});
      std::vector<double> bs;
      if (source == "table") {
        if (b_list.empty())
          for (double x = 0.15; x <= 0.8 + 1e-12; x += 0.05) bs.push_back(x);
        else
          bs = parse_list("--b-list", b_list);
      } else {
        require(b_list.empty(), "--b-list", "only used with --gamma-source table");
      }
      cmd.params = {{"sigma_c", sigma}, {"b0", b0}, {"gamma_source", source}, {"c_virial", c_virial},
                    {"c_flux", c_flux}, {"window", window}, {"lambda_floor", lam_floor},
                    {"s_max", s_max}};
      if (source == "table") {
        cmd.params["N"] = N;
        cmd.params["b_table"] = bs;
      }
      ReducedParams par;
      par.sigma = sigma;
      par.c_virial = c_virial;
      par.c_flux = c_flux;
      par.window = window;
      par.lambda_floor = lam_floor;
      par.s_max = s_max;
      par.tolerance = tols["tolerance"];
      const int w = workers;
      cmd.body = [=](RunDir& run, json& summary) mutable {
        GammaTable table;
        if (!bs.empty()) {
          table = build_gamma_table(N, exponent_for_sigma(N, sigma), bs, 0.1, w);
          par.source = GammaSource::table;
          par.table = &table;
          run.csv("gamma_table.csv", {"b", "log_Gamma"}, [&] {
            std::vector<std::vector<double>> rows;
            for (std::size_t k = 0; k < table.b.size(); ++k) rows.push_back({table.b[k], table.log_gamma[k]});
            return rows;
          }());
        }
        const auto tr = integrate_reduced(par, b0);
        const auto ratio = self_similar_ratio(tr, tr.bstar);
        std::vector<std::vector<double>> rows;
        for (std::size_t k = 0; k < tr.points.size(); ++k) {
          const auto& q = tr.points[k];
          rows.push_back({q.s, q.t, q.b, q.lambda(), q.log_lambda, q.remaining, ratio[k]});
        }
        run.csv("trajectory.csv",
                {"s", "t", "b", "lambda", "log_lambda", "T_minus_t", "speed_ratio"}, rows);
        summary = {{"sigma_c", sigma},
                   {"b0", b0},
                   {"bstar", tr.bstar},
                   {"exit", to_string(tr.exit)},
                   {"T", tr.T},
                   {"T_fit", tr.T_fit},
                   {"points", tr.points.size()},
                   {"b_final", tr.points.empty() ? std::nan("") : tr.points.back().b}};
        run.write_json("reduced.json", summary);
        return 0;
      };
    } else if (sc == c_bs) {
      tols = parse_tolerances(tol, {});
      cmd.params = {{"p", p}, {"N", N}, {"mode", mode}};
      const bool table = mode == "table";
      const int w = workers;
      cmd.body = [=](RunDir& run, json& summary) {
        const double s = sigma_c(N, p);
        double bst = 0;
        if (table) {
          std::vector<double> bs;
          for (double x = 0.15; x <= 0.8 + 1e-12; x += 0.05) bs.push_back(x);
          const auto t = build_gamma_table(N, p, bs, 0.1, w);
          bst = bstar(p, N, BstarMode::gamma_table, &t);
        } else {
          bst = bstar(p, N, BstarMode::closed_form);
        }
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.10g", s);
        const std::string s10 = buf;
        std::snprintf(buf, sizeof buf, "%.10g", bst);
        summary = {{"N", N}, {"p", p}, {"mode", mode}, {"sigma_c", s}, {"bstar", bst},
                   {"sigma_c_10", s10}, {"bstar_10", std::string(buf)}};
        run.write_json("bstar.json", summary);
        return 0;
      };
    } else if (sc == c_sim) {
      SimConfig cfg = parse_sim_config(read_file(config_path));
      tols = parse_tolerances(tol, {{"trap_band", cfg.trap_band}, {"eps_ceiling", cfg.eps_ceiling}});
      cfg.trap_band = tols["trap_band"];
      cfg.eps_ceiling = tols["eps_ceiling"];
      if (c_sim->count("--workers")) cfg.workers = workers;
      cmd.params = cfg.to_json();
      cmd.body = [cfg](RunDir& run, json& summary) {
        run.write_json("config.json", cfg.to_json());
        const auto res = run_simulation(cfg);
        std::vector<std::vector<double>> rows;
        for (const auto& r : res.trace) rows.push_back(trace_row(r));
        run.csv("trace.csv", trace_header(), rows);
        for (const auto& snap : res.snapshots) {
          char buf[64];
          std::snprintf(buf, sizeof buf, "snapshot_lambda_1e-%d.csv",
                        static_cast<int>(std::lround(-snap.log10_lambda)));
          run.field(buf, RadialField(res.grid, snap.field));
        }
        summary = res.report.to_json();
        run.write_json("report.json", summary);
        return exit_code(res.report.exit);
      };
    } else if (sc == c_rep) {
      tols = parse_tolerances(tol, {});
      const fs::path dir = fs::absolute(run_path).lexically_normal();
      cmd.params = {{"run", dir.string()}};
      cmd.body = [dir](RunDir& run, json& summary) {
        std::ifstream f(dir / "report.json");
        if (!f) throw std::ios_base::failure("no report.json in " + dir.string());
        const json rep = json::parse(f);
        const auto checks = flagship_checks(rep);
        bool all = true;
        json rows = json::array();
        for (const auto& c : checks) {
          rows.push_back({{"check", c.name}, {"value", c.value}, {"bound", c.bound}, {"pass", c.pass}});
          all = all && c.pass;
        }
        summary = {{"run", dir.string()}, {"exit", rep.value("exit", "")}, {"checks", rows},
                   {"all_pass", all}};
        run.write_json("summary.json", summary);
        return all ? 0 : 1;
      };
    }
  } catch (const SchemaError& e) {
    err << "selfsim " << name << ": " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "selfsim " << name << ": " << e.what() << '\n';
    return error_code(e);
  }

  json canonical = {{"command", name}, {"parameters", cmd.params}, {"tolerances", tols}};
  const std::string hash = config_hash(canonical.dump());
  fs::path root = out_root;
  if (root.empty()) {
    const char* env = std::getenv("SELFSIM_OUTPUT_ROOT");
    root = env && *env ? fs::path(env) : fs::path("runs");
  }
  RunDir run(root, name, hash);
  json summary;
  int code = 0;
  std::string error;
  try {
    code = cmd.body(run, summary);
  } catch (const std::exception& e) {
    error = e.what();
    code = error_code(e);
    err << "selfsim " << name << ": " << e.what() << '\n';
  }

  json manifest = canonical;
  manifest["config_hash"] = hash;
  manifest["exit_code"] = code;
  manifest["summary"] = summary;
  if (!error.empty()) manifest["error"] = error;
  try {
    manifest["run_dir"] = run.path().string();
    std::vector<std::string> files = run.files();
    files.push_back("manifest.json");
    manifest["files"] = files;
    std::ofstream f(run.path() / "manifest.json");
    f << manifest.dump(2) << '\n';
    if (!f) throw std::ios_base::failure("cannot write manifest");
  } catch (const std::exception& e) {
    err << "selfsim " << name << ": " << e.what() << '\n';
    return kIo;
  }
  out << manifest.dump(2) << '\n';
  return code;
}

}  // namespace selfsim::cli
