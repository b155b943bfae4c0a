#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "selfsim/groundstate.hpp"
#include "selfsim/propagator.hpp"

namespace selfsim {

// Tabulated profiles Q_b on a fixed short grid (the ground-state grid), interpolated in b
// by four-point Lagrange. The first node is b = 0, where the member is Q_p itself.
struct ProfileFamily {
  int N = 1;
  double p = 3;
  double eta = 0.1;
  double sigma = 0;
  GroundState gs;
  std::vector<double> b;
  std::vector<CVec> Q, LQ, L2Q, y2Q;
  // |Q_b|^2 and the flux-correction function (1/2) Im int y Q_b' conj(Q_b) + (Im Q, Lambda Re Q)
  // - (Re Q, Lambda Im Q), with its integral from 0.
  std::vector<double> mass, ftilde, ftilde_integral;
  // sigma |T| / |P~| per node, and the first b where it exceeded the cap (0 if none)
  std::vector<double> correction_ratio;
  double resonance = 0;

  const GridPtr& grid() const { return gs.grid; }
  double b_min() const { return b[1]; }
  double b_max() const { return b.back(); }
  // Field tables are usable on [b_min, b_max]; scalars on [0, b_max].
  CVec at(const std::vector<CVec>& table, double bb) const;
  double scalar(const std::vector<double>& table, double bb) const;
};

struct FamilyOptions {
  double b_first = 0.08;
  double b_last = 1.0;
  double db = 0.02;
  double eta = 0.1;
  // node spacing of the family grid; the cutoff band at b_last needs 16 nodes
  double h = 0.005;
  // the table stops before the first node with sigma |T| / |P~| above this
  double max_correction = 0.15;
  int workers = 0;
};

ProfileFamily build_profile_family(double p, int N, const FamilyOptions& opt = {});

// Samples of v(scale * y) at the points y (four-point Lagrange; zero past the grid end).
CVec resample(const RadialGrid& grid, const CVec& v, double scale, const Vec& y);

struct ModulationState {
  // log of lambda relative to the frame in which v is given
  double log_lambda = 0;
  double b = 0;
  double gamma = 0;
  double residual = 0;
  int iterations = 0;
};

struct Decomposition {
  ModulationState state;
  // eps on the family grid
  CVec eps;
};

// Orthogonality functionals for trial parameters (log lambda, b, gamma).
Eigen::Vector3d orthogonality(const ProfileFamily& fam, const RadialGrid& grid, const CVec& v,
                              const Eigen::Vector3d& params);

// Newton on (log lambda, b, gamma) from the seed; throws SolverFailure when the iteration
// diverges or b leaves the family range.
Decomposition decompose(const ProfileFamily& fam, const RadialGrid& grid, const CVec& v,
                        const ModulationState& seed, double tol = 1e-10);

// lambda^{-2/(p-1)} Q_b(r / lambda) e^{i gamma} sampled on grid.
CVec reconstruct(const ProfileFamily& fam, const RadialGrid& grid, const ModulationState& st,
                 const CVec& eps_on_family = CVec());

// Outward L2 flux |S^{N-1}| r^{N-1} (2 Im(conj(v) v_r) + a r |v|^2) through radius r in a frame
// contracting at rate a.
double flux_diagnostic(const Propagator& prop, const CVec& v, double radius, double a);

// A = exp(2 a theta(2) / b).
double flux_radius(double b, double a);

// Mass-type functional with eps on the family grid; the localized radiation is omitted.
double lyapunov_J(const ProfileFamily& fam, double b, const CVec& eps, double A, double c23);

enum class Frame { rescaled, lab };
enum class InitialKind { profile, gaussian, soliton };
enum class Perturbation { none, energy, fixed };

struct SimConfig {
  double p = 0;
  int N = 1;
  Frame frame = Frame::rescaled;
  GridSpec grid{1, 1e5, 0.005, Mapping::geometric_stretch, 10.0};
  double absorber_fraction = 0.05;
  double absorber_strength = 1.0;
  // rescaled frame: fixed step in s; lab frame: dt = min(dt_max, dt_safety lambda^2)
  double ds = 0.005;
  double dt_max = 1e-3;
  double dt_safety = 0.05;
  InitialKind initial = InitialKind::profile;
  double b0 = 0.38;
  double lambda0 = 1.0;
  double gamma0 = 0.0;
  Perturbation perturbation = Perturbation::energy;
  double perturbation_amplitude = 0.0;
  double bump_center = 3.0;
  double bump_width = 2.0;
  double gaussian_amplitude = 1.0;
  double gaussian_width = 1.0;
  double lambda_floor = 1e-8;
  double t_max = 1e30;
  double s_max = 200;
  int cadence = 20;
  bool decompose = true;
  bool nonlinear = true;
  double eta = 0.1;
  double family_b_last = 1.0;
  double family_db = 0.02;
  double feedback_tau = 0.5;
  double flux_a = 0.5;
  double c23 = 1.0;
  // u* scan: floor radius A0 lambda, window [A0 10^k, A0 10^{k+1}] lambda with k = offset
  double concentration_A0 = 10.0;
  double concentration_offset = 2.0;
  double trap_band = 0.1;
  double eps_ceiling = 0.3;
  // field snapshots when lambda first drops below 10^{-d}
  std::vector<double> snapshot_decades;
  int workers = 0;

  double sigma() const;
  nlohmann::json to_json() const;
};

// key = value lines; '#' starts a comment. Unknown keys and malformed values throw SchemaError.
SimConfig parse_sim_config(const std::string& text);
SimConfig sim_config_from(const std::map<std::string, std::string>& kv);

struct TraceRecord {
  double t = 0, s = 0, lambda = 0, b = 0, gamma = 0;
  double mass = 0, energy = 0;
  double grad_eps = 0, weighted_eps = 0;
  double modulation_residual = 0;
  double Hp = 0, flux = 0, J = 0;
  double frame_rate = 0;
  double decomposition_residual = 0;
  // lab time increment since the previous sample
  double dt = 0;
};

std::vector<std::string> trace_header();
std::vector<double> trace_row(const TraceRecord& r);

struct ConcentrationScan {
  std::vector<double> R, value;
  double floor = 0;
  double flatness = 0;
  bool sufficient = false;
  bool increasing = false;
};

// Scan of R^{-2 weight} int_{|x|<=R} |w|^2 with w given as a field of y = x / lambda on grid,
// over R / lambda in [y_lo, y_hi] (samples at the grid nodes, thinned to `samples`).
ConcentrationScan concentration_scan(const RadialGrid& grid, const CVec& w, double lambda,
                                     double weight, double y_lo, double y_hi, double floor,
                                     int samples = 32);

enum class ExitKind { blowup, completed, exited_tube, resolution_exhausted };
int exit_code(ExitKind k);
std::string to_string(ExitKind k);

struct BlowupReport {
  ExitKind exit = ExitKind::completed;
  std::string reason;
  double sigma = 0;
  double lambda_decades = 0;
  double b_fit = 0;
  double T = 0;
  double T_minus_t_end = 0;
  double lambda2_correlation = 0;
  double b_median = 0;
  double b_band = 0;
  double speed_ratio_min = 0, speed_ratio_max = 0;
  double sigma_exponent_ratio = 0;
  double eps_ceiling = 0;
  double profile_norm = 0;
  double mass_drift = 0, energy_drift = 0;
  double virial_correlation = 0;
  double mean_flux = 0;
  bool flux_clipped = false;
  double initial_energy = 0;
  double perturbation_amplitude = 0;
  ConcentrationScan concentration;

  nlohmann::json to_json() const;
};

struct Snapshot {
  double log10_lambda = 0;
  double lambda = 0;
  CVec field;
};

struct SimResult {
  std::vector<TraceRecord> trace;
  BlowupReport report;
  GridPtr grid;
  CVec final_field;
  double final_log_lambda_frame = 0;
  std::vector<Snapshot> snapshots;
};

// Initial data on the simulation grid (in frame variables, lambda_frame = lambda0 for the
// rescaled frame). For the energy perturbation the bump amplitude is the root of the
// discrete energy closest to zero.
struct InitialData {
  CVec v;
  double amplitude = 0;
  double energy = 0;
};
InitialData initial_data(const SimConfig& cfg, const Propagator& prop, const ProfileFamily* fam);

SimResult run_simulation(const SimConfig& cfg, const ProfileFamily* fam = nullptr);
// Same with the renormalized frame forced on.
SimResult run_selfsimilar(SimConfig cfg, const ProfileFamily* fam = nullptr);

}  // namespace selfsim
