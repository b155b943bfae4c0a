#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("selfsim_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Result run(std::vector<std::string> args, const fs::path& root) {
  args.push_back("--out");
  args.push_back(root.string());
  std::ostringstream out, err;
  const int code = selfsim::cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t entries(const fs::path& p) {
  if (!fs::exists(p)) return 0;
  return static_cast<std::size_t>(std::distance(fs::directory_iterator(p), fs::directory_iterator()));
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("bstar reports sigma_c and b* to ten digits") {
  const auto root = scratch("bstar");
  const auto r = run({"bstar", "--p", "1.81", "--N", "5"}, root);
  REQUIRE(r.code == 0);
  const auto m = json::parse(r.out);
  const double sigma = 5 * (1.81 - 1.8) / (2 * 0.81);
  CHECK(m["summary"]["sigma_c"].get<double>() == doctest::Approx(sigma).epsilon(1e-12));
  CHECK(m["summary"]["bstar"].get<double>() == doctest::Approx(M_PI / std::log(1 / sigma)).epsilon(1e-12));
  CHECK(m["summary"]["sigma_c_10"] == "0.03086419753");
  CHECK(m["summary"]["bstar_10"] == "0.9032344913");
}

TEST_CASE("subcritical bstar is a domain error with a manifest") {
  const auto root = scratch("bstar_domain");
  const auto r = run({"bstar", "--p", "1.81", "--N", "2"}, root);
  CHECK(r.code == selfsim::cli::kDomain);
  CHECK(json::parse(r.out)["error"].is_string());
}

TEST_CASE("unknown flag exits 64 and writes nothing") {
  const auto root = scratch("unknown");
  const auto r = run({"bstar", "--p", "2", "--N", "5", "--bogus", "1"}, root);
  CHECK(r.code == 64);
  CHECK(r.out.empty());
  CHECK(entries(root) == 0);
  CHECK(run({"nosuch"}, root).code == 64);
  CHECK(run({"bstar", "--p", "2", "--N", "5", "--tol", "nosuch=1"}, root).code == 64);
  CHECK(run({"profile-sweep", "--p", "5.08", "--b-list", "0.1,x"}, root).code == 64);
  CHECK(entries(root) == 0);
}

TEST_CASE("config schema violation exits 64 with line and field") {
  const auto root = scratch("schema");
  const auto cfg = root / "bad.cfg";
  std::ofstream(cfg) << "sigma = 0.01\nds = 0.005\nfrobnicate = 2\n";
  const fs::path out = root / "runs";
  const auto r = run({"simulate", "--config", cfg.string()}, out);
  CHECK(r.code == 64);
  CHECK(r.err.find("line 3") != std::string::npos);
  CHECK(r.err.find("frobnicate") != std::string::npos);
  CHECK(entries(out) == 0);
}

TEST_CASE("help exits 0") {
  const auto root = scratch("help");
  const auto r = run({"simulate", "--help"}, root);
  CHECK(r.code == 0);
  CHECK(r.out.find("--config") != std::string::npos);
}

TEST_CASE("manifest lists every file and outputs are deterministic") {
  const auto root = scratch("manifest");
  const auto a = run({"groundstate", "--p", "3", "--N", "1"}, root);
  const auto b = run({"groundstate", "--p", "3", "--N", "1"}, root);
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  const auto ma = json::parse(a.out), mb = json::parse(b.out);
  CHECK(ma["config_hash"] == mb["config_hash"]);
  CHECK(ma["run_dir"] != mb["run_dir"]);
  const fs::path dir = ma["run_dir"].get<std::string>();
  std::set<std::string> listed, present;
  for (const auto& f : ma["files"]) listed.insert(f.get<std::string>());
  for (const auto& e : fs::directory_iterator(dir)) present.insert(e.path().filename().string());
  CHECK(listed == present);
  const fs::path other = mb["run_dir"].get<std::string>();
  CHECK(slurp(dir / "groundstate.csv") == slurp(other / "groundstate.csv"));
  CHECK(slurp(dir / "groundstate.json") == slurp(other / "groundstate.json"));
  // the run directory name carries the hash
  CHECK(dir.filename().string().find(ma["config_hash"].get<std::string>()) != std::string::npos);
}

TEST_CASE("tolerance overrides change the config hash") {
  const auto root = scratch("hash");
  const auto a = run({"profile", "--p", "5.08", "--b", "0.2"}, root);
  const auto b = run({"profile", "--p", "5.08", "--b", "0.2", "--tol", "db_relative=2e-3"}, root);
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(json::parse(a.out)["config_hash"] != json::parse(b.out)["config_hash"]);
}

TEST_CASE("output root falls back to the environment variable") {
  const auto root = scratch("env");
  setenv("SELFSIM_OUTPUT_ROOT", root.string().c_str(), 1);
  std::ostringstream out, err;
  const int code = selfsim::cli::dispatch({"bstar", "--p", "1.81", "--N", "5"}, out, err);
  unsetenv("SELFSIM_OUTPUT_ROOT");
  CHECK(code == 0);
  CHECK(entries(root) == 1);
}

TEST_CASE("spectral subcommand reports delta1 > 0 in one dimension") {
  const auto root = scratch("spectral");
  const auto r = run({"spectral", "--N", "1"}, root);
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["summary"]["delta1"].get<double>() > 0);
  CHECK(run({"spectral", "--N", "1", "--p", "3"}, root).code == 64);
}

TEST_CASE("sweeps give the same rows for any worker count") {
  const auto root = scratch("sweep");
  const auto one = run({"profile-sweep", "--p", "5.08", "--b-list", "0.1,0.15,0.2", "--workers", "1"}, root);
  const auto three = run({"profile-sweep", "--p", "5.08", "--b-list", "0.1,0.15,0.2", "--workers", "3"}, root);
  REQUIRE(one.code == 0);
  REQUIRE(three.code == 0);
  const fs::path d1 = json::parse(one.out)["run_dir"].get<std::string>();
  const fs::path d3 = json::parse(three.out)["run_dir"].get<std::string>();
  CHECK(slurp(d1 / "profile_sweep.csv") == slurp(d3 / "profile_sweep.csv"));
}

TEST_CASE("reduced trajectory and report on a short simulate run") {
  const auto root = scratch("simulate");
  const auto red = run({"reduced", "--sigma-c", "0.01", "--b0", "0.55"}, root);
  CHECK(red.code == 0);
  const auto cfg = root / "short.cfg";
  std::ofstream(cfg) << "schema_version = 1\nsigma = 0.01\nr_max = 1000\ns_max = 1\n";
  const auto sim = run({"simulate", "--config", cfg.string()}, root / "runs");
  CHECK(sim.code == 3);
  const auto m = json::parse(sim.out);
  CHECK(m["summary"]["exit"] == "resolution_exhausted");
  const auto rep = run({"report", "--run", m["run_dir"].get<std::string>()}, root / "reports");
  // far too short for the band checks
  CHECK(rep.code == 1);
  CHECK(json::parse(rep.out)["summary"]["checks"].size() == 6);
}
