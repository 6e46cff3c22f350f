#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "sclab/cli.hpp"
#include "sclab/errors.hpp"

using namespace sclab;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
  fs::path dir;
};

fs::path scratch() {
  static const fs::path root = [] {
    const fs::path p = fs::temp_directory_path() / ("sclab_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

Run run(const std::string& command, const std::string& config, const std::string& tag,
        bool force = false, std::optional<std::uint64_t> seed = std::nullopt) {
  const fs::path cfg = scratch() / (tag + ".cfg");
  std::ofstream(cfg) << config;
  cli::Options o;
  o.command = command;
  o.config = cfg;
  o.out = scratch() / tag;
  o.force = force;
  o.seed = seed;
  std::ostringstream out, err;
  const int code = cli::run(o, out, err);
  Run r{code, out.str(), err.str(), {}};
  if (fs::exists(*o.out))
    for (const auto& e : fs::directory_iterator(*o.out)) r.dir = e.path();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// quantity (+ h_or_k) -> value from a results CSV.
std::map<std::string, double> results(const fs::path& p) {
  std::map<std::string, double> m;
  std::ifstream is(p);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    std::vector<std::string> f;
    std::string cur;
    bool quoted = false;
    for (char ch : line) {
      if (ch == '"') quoted = !quoted;
      else if (ch == ',' && !quoted) f.push_back(cur), cur.clear();
      else cur += ch;
    }
    f.push_back(cur);
    REQUIRE(f.size() == 8);
    std::string key = f[0];
    if (!f[5].empty()) key += "@" + f[5];
    if (f[3] != "0") key += "#T=" + f[3];
    m[key] = std::stod(f[6]);
  }
  return m;
}

}  // namespace

TEST_CASE("config parsing") {
  std::istringstream ok("# comment\nsurface.kind = bolza  # trailing\n\nspectrum.N=40\ntime.T = 0.5, 1,2\n");
  const auto c = cli::Config::parse(ok);
  CHECK(c.str("surface.kind") == "bolza");
  CHECK(c.integer("spectrum.N") == 40);
  CHECK(c.list("time.T") == std::vector<double>{0.5, 1.0, 2.0});
  CHECK(c.integer("surface.refine") == 4);

  const auto fails = [](const std::string& text, const std::string& key) {
    std::istringstream is(text);
    try {
      cli::Config::parse(is);
    } catch (const ConfigError& e) {
      return std::string(e.what()).find(key) != std::string::npos;
    }
    return false;
  };
  CHECK(fails("surface.kind = cube\n", "surface.kind"));
  CHECK(fails("surface.colour = red\n", "surface.colour"));
  CHECK(fails("spectrum.N = many\n", "spectrum.N"));
  CHECK(fails("time.T = 1,,2\n", "time.T"));
  CHECK(fails("spectrum.extrapolate = yes\n", "spectrum.extrapolate"));
  CHECK(fails("spectrum.N = 4\nspectrum.N = 5\n", "spectrum.N"));
  CHECK(fails("no equals sign\n", "expected key = value"));

  std::istringstream a("hum.seed = 3\n"), b("hum.seed = 3\noutput.directory = elsewhere\n"),
      d("hum.seed = 4\n");
  CHECK(cli::Config::parse(a).hash() == cli::Config::parse(b).hash());
  std::istringstream a2("hum.seed = 3\n");
  CHECK(cli::Config::parse(a2).hash() != cli::Config::parse(d).hash());
  CHECK(cli::sha1_hex("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
  CHECK(cli::Config::schema().size() > 20);
}

TEST_CASE("mesh command") {
  const auto t = run("mesh", "surface.n = 8\n", "mesh_torus");
  REQUIRE(t.code == 0);
  auto r = results(t.dir / "mesh_results.csv");
  CHECK(r["area"] == doctest::Approx(1.0));
  CHECK(r["euler_characteristic"] == 0.0);
  CHECK(r["quotient_vertices"] == 64.0);
  CHECK(r["triangles"] == 128.0);
  CHECK(t.out.find("chi=0") != std::string::npos);
  CHECK(fs::exists(t.dir / "mesh.txt"));

  const auto b3 = run("mesh", "surface.kind = bolza\nsurface.refine = 3\n", "mesh_b3");
  REQUIRE(b3.code == 0);
  CHECK(results(b3.dir / "mesh_results.csv")["euler_characteristic"] == -2.0);
  const auto b4 = run("mesh", "surface.kind = bolza\nsurface.refine = 4\n", "mesh_b4");
  REQUIRE(b4.code == 0);
  CHECK(std::abs(results(b4.dir / "mesh_results.csv")["area"] / (4.0 * std::numbers::pi) - 1.0) < 0.01);

  const auto bad = run("mesh", "surface.kind = sphere\n", "mesh_bad");
  CHECK(bad.code == cli::ConfigFailure);
  CHECK(bad.err.find("surface.kind") != std::string::npos);
  CHECK(run("mesh", "surface.n = 3\n", "mesh_small").code == cli::ConfigFailure);
}

TEST_CASE("spectrum command") {
  const auto t = run("spectrum", "spectrum.solver = fourier\n", "spec_torus");
  REQUIRE(t.code == 0);
  auto r = results(t.dir / "spectrum_results.csv");
  const double four_pi2 = 4.0 * std::numbers::pi * std::numbers::pi;
  CHECK(std::abs(r["lambda@j=0"]) < 1e-9);
  for (int j = 1; j <= 4; ++j)
    CHECK(r["lambda@j=" + std::to_string(j)] == doctest::Approx(four_pi2).epsilon(1e-2));
  CHECK(r.count("orthonormality_defect"));
  CHECK(r["orthonormality_defect"] < 1e-8);
  CHECK(fs::exists(t.dir / "basis.txt"));

  const auto b = run("spectrum",
                     "surface.kind = bolza\nsurface.refine = 4\nspectrum.N = 10\nspectrum.extrapolate = true\n",
                     "spec_bolza");
  REQUIRE(b.code == 0);
  auto rb = results(b.dir / "spectrum_results.csv");
  CHECK(rb["lambda_1_error"] > 0.0);
  CHECK(std::abs(rb["lambda_1_extrapolated"] - 3.8389) < 3.0 * rb["lambda_1_error"]);
}

TEST_CASE("gramian command") {
  const auto w = run("gramian",
                     "spectrum.solver = fourier\nregion.shape = whole\ntime.T = 0.5,2\n", "gram_whole");
  REQUIRE(w.code == 0);
  auto r = results(w.dir / "gramian_results.csv");
  CHECK(r["K#T=0.5"] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(r["K#T=2"] == doctest::Approx(0.5).epsilon(1e-8));

  const auto s = run("gramian", "spectrum.solver = fourier\ntime.T = 0.25,0.5,1,2\n", "gram_strip");
  REQUIRE(s.code == 0);
  auto rs = results(s.dir / "gramian_results.csv");
  CHECK(rs["K#T=0.25"] >= rs["K#T=0.5"]);
  CHECK(rs["K#T=0.5"] >= rs["K#T=1"]);
  CHECK(rs["K#T=1"] >= rs["K#T=2"]);
  CHECK(fs::exists(s.dir / "gramian_T1.csv"));
}

TEST_CASE("control command") {
  const auto w = run("control", "spectrum.solver = fourier\nregion.shape = whole\n", "ctl_whole");
  REQUIRE(w.code == 0);
  auto r = results(w.dir / "control_results.csv");
  CHECK(r["residual_T#T=1"] <= 1e-10);
  CHECK(w.out.find("bound=ok") != std::string::npos);

  const auto s = run("control", "spectrum.solver = fourier\nsurface.n = 24\nregion.band = 0\nhum.fine_N = 50\n",
                     "ctl_strip");
  REQUIRE(s.code == 0);
  auto rs = results(s.dir / "control_results.csv");
  CHECK(rs["residual_T#T=1"] <= 1e-6);
  CHECK(rs["optimality_bound#T=1"] == 1.0);
  CHECK(rs.count("spillover_residual#T=1"));
  CHECK(fs::exists(s.dir / "control.csv"));
  CHECK(slurp(s.dir / "control.json").find("\"spillover_residual\"") != std::string::npos);
}

TEST_CASE("sweep command") {
  CHECK(run("sweep", "spectrum.solver = fourier\n", "sweep_empty").code == cli::ConfigFailure);
  const auto s = run("sweep",
                     "spectrum.solver = fourier\nspectrum.N = 60\nsurface.n = 40\nwindows.k_min = 0\n"
                     "windows.k_max = 6\nwindows.h = 0.125\nwindows.C_horizon = 1,2\nwindows.tau = 1\n"
                     "windows.probes = 50\n",
                     "sweep_full");
  REQUIRE(s.code == 0);
  auto r = results(s.dir / "sweep_results.csv");
  CHECK(r.count("K_k@k=6#T=1"));
  bool wave = false;
  for (const auto& [key, value] : r) wave |= key.rfind("K_wave@h=0.125;C=2", 0) == 0 && value >= 1.0;
  CHECK(wave);
  CHECK(r.count("quasimode_R@h=0.125;tau=1"));
  // Spillover guard reaches the CLI as a numerical failure.
  CHECK(run("sweep", "spectrum.solver = fourier\nwindows.k_max = 12\n", "sweep_guard").code ==
        cli::NumericalFailure);
}

TEST_CASE("check command") {
  const auto ok = run("check", "spectrum.solver = fourier\nsurface.n = 16\nhum.probes = 5\n", "check_ok");
  CHECK(ok.code == 0);
  CHECK(ok.out.find("FAIL") == std::string::npos);
  CHECK(fs::exists(ok.dir / "check.csv"));

  // Corrupt one coefficient of the exported basis.
  const auto sp = run("spectrum", "spectrum.solver = fourier\nsurface.n = 16\n", "check_spec");
  REQUIRE(sp.code == 0);
  std::string text = slurp(sp.dir / "basis.txt");
  std::istringstream is(text);
  std::ostringstream corrupted;
  std::string line;
  int k = 0;
  while (std::getline(is, line)) corrupted << (++k == 40 ? "0.75" : line) << '\n';
  const fs::path bad = scratch() / "corrupted_basis.txt";
  std::ofstream(bad) << corrupted.str();
  const auto c = run("check",
                     "spectrum.solver = fourier\nsurface.n = 16\nhum.probes = 5\ncheck.basis_file = " +
                         bad.string() + "\n",
                     "check_bad");
  CHECK(c.code == cli::NumericalFailure);
  CHECK(c.out.find("FAIL basis.orthonormality") != std::string::npos);
}

TEST_CASE("outputs are deterministic and append-only") {
  const std::string cfg = "spectrum.solver = fourier\nsurface.n = 16\n";
  const auto a = run("control", cfg, "det_a");
  const auto b = run("control", cfg, "det_b");
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(a.dir.filename() == b.dir.filename());
  for (const char* f : {"control.csv", "control_results.csv", "control.json"})
    CHECK(slurp(a.dir / f) == slurp(b.dir / f));
  CHECK(slurp(a.dir / "control.meta.json").find("timestamp") != std::string::npos);

  const auto again = run("control", cfg, "det_a");
  CHECK(again.code == cli::IoFailure);
  CHECK(again.err.find("--force") != std::string::npos);
  CHECK(run("control", cfg, "det_a", true).code == 0);

  const auto seeded = run("control", cfg, "det_a", false, 99);
  CHECK(seeded.code == 0);
  int dirs = 0;
  for (const auto& e : fs::directory_iterator(scratch() / "det_a")) dirs += e.is_directory();
  CHECK(dirs == 2);

  // Output root that is a regular file.
  const fs::path blocker = scratch() / "blocker";
  std::ofstream(blocker) << "x";
  cli::Options o;
  o.command = "mesh";
  o.out = blocker;
  std::ostringstream out, err;
  CHECK(cli::run(o, out, err) == cli::IoFailure);

  o.command = "plot";
  CHECK(cli::run(o, out, err) == cli::ConfigFailure);
}
