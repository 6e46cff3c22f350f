#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "sclab/cli.hpp"
#include "sclab/errors.hpp"
#include "sclab/hum.hpp"
#include "sclab/observability.hpp"

namespace sclab::cli {

namespace fs = std::filesystem;
using cd = std::complex<double>;
using observability::ResultRow;
using spectral::EigenBasis;
using spectral::SpectralState;

surface::SurfaceMesh build_mesh(const Config& c) {
  if (c.str("surface.kind") == "torus") {
    const double L = c.num("surface.L");
    if (!(L > 0.0)) throw ConfigError("surface.L: must be positive");
    return surface::build_torus(c.integer("surface.n"), L);
  }
  return surface::build_bolza(c.integer("surface.refine"));
}

surface::ControlRegion build_region(const Config& c, const surface::SurfaceMesh& mesh) {
  using surface::RegionDescriptor;
  const double b = c.num("region.band");
  const std::optional<double> band = b < 0.0 ? std::nullopt : std::optional<double>(b);
  const std::string shape = c.str("region.shape");
  RegionDescriptor d;
  if (shape == "whole") {
    d = RegionDescriptor::whole();
  } else if (shape == "ball") {
    if (!(c.num("region.radius") > 0.0)) throw ConfigError("region.radius: must be positive");
    d = RegionDescriptor::ball({c.num("region.cx"), c.num("region.cy")}, c.num("region.radius"), band);
  } else {
    if (!(c.num("region.x1") > c.num("region.x0")))
      throw ConfigError("region.x1: must exceed region.x0");
    d = RegionDescriptor::strip(c.num("region.x0"), c.num("region.x1"), band);
  }
  return surface::rasterize_region(mesh, d);
}

namespace {

EigenBasis solve_basis(const Config& c, const surface::SurfaceMesh& mesh, int n) {
  const std::string solver = c.str("spectrum.solver");
  if (solver == "fourier") {
    if (mesh.kind != surface::SurfaceKind::Torus)
      throw ConfigError("spectrum.solver: fourier requires surface.kind = torus");
    return spectral::torus_fourier_basis(mesh, n).basis;
  }
  spectral::EigensolveOptions opt;
  opt.tolerance = c.num("spectrum.tol");
  opt.method = solver == "dense"          ? spectral::SolverMethod::Dense
               : solver == "shift-invert" ? spectral::SolverMethod::ShiftInvert
                                          : spectral::SolverMethod::Auto;
  return spectral::eigensolve(mesh, n, opt);
}

EigenBasis with_potential(const Config& c, const surface::SurfaceMesh& mesh, EigenBasis b) {
  const double eps = c.num("potential.epsilon");
  if (eps == 0.0) return b;
  const Eigen::VectorXd V =
      eps * surface::bump_field(mesh, {c.num("potential.x"), c.num("potential.y")},
                                c.num("potential.radius"));
  return spectral::perturb_basis(b, V);
}

}  // namespace

EigenBasis build_basis(const Config& c, const surface::SurfaceMesh& mesh) {
  const std::string file = c.str("check.basis_file");
  if (!file.empty()) {
    std::ifstream is(file);
    if (!is) throw IoError("cannot read basis file " + file);
    EigenBasis b = spectral::read_basis(is, spectral::assemble(mesh).mass);
    b.surface_kind = mesh.kind;
    b.mesh_level = mesh.level;
    b.area = mesh.area;
    return b;
  }
  return with_potential(c, mesh, solve_basis(c, mesh, c.integer("spectrum.N")));
}

namespace {

struct Context {
  const Options& options;
  Config config;
  fs::path dir;
  std::ostream& out;
  bool quiet;

  void say(const std::string& s) const {
    if (!quiet) out << s << '\n';
  }
  fs::path file(const std::string& name) const { return dir / name; }
  std::ofstream open(const std::string& name) const {
    std::ofstream os(file(name));
    if (!os) throw IoError("cannot write " + file(name).string());
    return os;
  }
  bool json() const { return config.str("output.formats").find("json") != std::string::npos; }
  bool csv() const { return config.str("output.formats").find("csv") != std::string::npos; }
};

class Results {
 public:
  Results(const Context& ctx, const surface::SurfaceMesh& mesh, std::string region)
      : ctx_(ctx), surface_(surface::to_string(mesh.kind) + "@" + std::to_string(mesh.level)),
        region_(std::move(region)) {}

  void add(const std::string& quantity, double T, int N, const std::string& h_or_k, double value,
           double certificate_norm = 0.0) {
    rows_.push_back({quantity, surface_, region_, T, N, h_or_k, value, certificate_norm});
  }

  void write(const std::string& stem) const {
    if (ctx_.csv()) {
      auto os = ctx_.open(stem + ".csv");
      observability::write_results_header(os);
      for (const auto& r : rows_) observability::write_result(os, r);
    }
    if (ctx_.json()) {
      nlohmann::json j;
      j["config_hash"] = ctx_.config.hash();
      j["seed"] = ctx_.config.u64("hum.seed");
      j["rows"] = nlohmann::json::array();
      for (const auto& r : rows_)
        j["rows"].push_back({{"quantity", r.quantity},
                             {"surface", r.surface},
                             {"region", r.region},
                             {"T", r.T},
                             {"N", r.N},
                             {"h_or_k", r.h_or_k},
                             {"value", r.value},
                             {"certificate_norm", r.certificate_norm}});
      auto os = ctx_.open(stem + ".json");
      os << j.dump(2) << '\n';
    }
  }

 private:
  const Context& ctx_;
  std::string surface_, region_;
  std::vector<ResultRow> rows_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

evolve::TimeGrid make_grid(const Config& c, const EigenBasis& b, double T) {
  const int panels = c.integer("time.n_steps");
  if (panels > 0) return evolve::TimeGrid::gauss_legendre(0.0, T, panels);
  return evolve::TimeGrid::for_rate(0.0, T, b.lambda_max(), evolve::TimeGrid::Rule::GaussLegendre);
}

std::vector<double> times(const Config& c) {
  auto T = c.list("time.T");
  if (T.empty()) throw ConfigError("time.T: at least one time is required");
  for (double t : T)
    if (!(t > 0.0)) throw ConfigError("time.T: times must be positive");
  return T;
}

SpectralState seeded_state(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::VectorXcd c(n);
  for (int j = 0; j < n; ++j) c(j) = {g(rng), g(rng)};
  return SpectralState(c / c.norm());
}

int cmd_mesh(const Context& ctx) {
  const auto mesh = build_mesh(ctx.config);
  {
    auto os = ctx.open("mesh.txt");
    surface::write_mesh(os, mesh);
  }
  Results r(ctx, mesh, "");
  r.add("area", 0, 0, "", mesh.area);
  r.add("euler_characteristic", 0, 0, "", mesh.euler_characteristic());
  r.add("vertices", 0, 0, "", mesh.num_vertices());
  r.add("quotient_vertices", 0, 0, "", mesh.num_dofs());
  r.add("triangles", 0, 0, "", mesh.num_triangles());
  r.write("mesh_results");
  ctx.say("surface=" + surface::to_string(mesh.kind) + " area=" + fmt(mesh.area) +
          " chi=" + std::to_string(mesh.euler_characteristic()) +
          " vertices=" + std::to_string(mesh.num_vertices()) +
          " triangles=" + std::to_string(mesh.num_triangles()));
  return Success;
}

// Richardson extrapolation on three successively refined values.
std::pair<double, double> richardson(double a, double b, double c) {
  const double d1 = b - a, d2 = c - b;
  if (d2 == 0.0 || d1 / d2 <= 1.0) return {c, std::abs(d2)};
  const double factor = d1 / d2;
  const double extrap = c + d2 / (factor - 1.0);
  return {extrap, std::abs(extrap - c)};
}

int cmd_spectrum(const Context& ctx) {
  const Config& c = ctx.config;
  const auto mesh = build_mesh(c);
  const EigenBasis b = build_basis(c, mesh);
  {
    auto os = ctx.open("basis.txt");
    spectral::write_basis(os, b);
  }
  Results r(ctx, mesh, "");
  for (int j = 0; j < b.size(); ++j) r.add("lambda", 0, b.size(), "j=" + std::to_string(j), b.lambdas(j));
  r.add("orthonormality_defect", 0, b.size(), "", b.orthonormality_defect());
  r.add("max_residual", 0, b.size(), "", b.residuals.maxCoeff());
  r.add("weyl_ratio", 0, b.size(), "", spectral::weyl_ratio(b));
  std::ostringstream msg;
  msg << "N=" << b.size() << " lambda_1=" << fmt(b.lambdas(1)) << " lambda_N=" << fmt(b.lambda_max())
      << " orthonormality_defect=" << b.orthonormality_defect()
      << " weyl_ratio=" << fmt(spectral::weyl_ratio(b));
  if (c.flag("spectrum.extrapolate")) {
    std::vector<double> l1;
    for (int step = 2; step >= 0; --step) {
      Config coarse = c;
      if (mesh.kind == surface::SurfaceKind::Torus)
        coarse.set("surface.n", std::to_string(c.integer("surface.n") >> step));
      else
        coarse.set("surface.refine", std::to_string(c.integer("surface.refine") - step));
      const auto m = build_mesh(coarse);
      l1.push_back(with_potential(coarse, m, solve_basis(coarse, m, 5)).lambdas(1));
    }
    const auto [value, err] = richardson(l1[0], l1[1], l1[2]);
    r.add("lambda_1_extrapolated", 0, 5, "", value);
    r.add("lambda_1_error", 0, 5, "", err);
    msg << " lambda_1_extrapolated=" << fmt(value) << " +- " << err;
  }
  r.write("spectrum_results");
  ctx.say(msg.str());
  return Success;
}

int cmd_gramian(const Context& ctx) {
  const Config& c = ctx.config;
  const auto mesh = build_mesh(c);
  const auto region = build_region(c, mesh);
  const EigenBasis b = build_basis(c, mesh);
  Results r(ctx, mesh, region.descriptor.describe());
  bool unobservable = false;
  for (double T : times(c)) {
    const auto G = observability::gramian(b, region, T);
    const auto k = observability::observability_constant(G);
    unobservable |= k.not_observable;
    r.add("K", T, b.size(), "", k.K, k.certificate.norm());
    r.add("lambda_min", T, b.size(), "", k.lambda_min, k.certificate.norm());
    r.add("lambda_max", T, b.size(), "", k.lambda_max);
    r.add("not_observable", T, b.size(), "", k.not_observable ? 1.0 : 0.0);
    if (ctx.csv()) {
      auto os = ctx.open("gramian_T" + fmt(T) + ".csv");
      os.precision(17);
      os << "j,k,re,im\n";
      for (int i = 0; i < G.size(); ++i)
        for (int j = 0; j < G.size(); ++j)
          os << i << ',' << j << ',' << G.G(i, j).real() << ',' << G.G(i, j).imag() << '\n';
    }
    ctx.say("T=" + fmt(T) + " N=" + std::to_string(b.size()) + " level=" + std::to_string(b.mesh_level) +
            " K=" + fmt(k.K) + " lambda_min=" + fmt(k.lambda_min) +
            (k.not_observable ? " NotObservable" : ""));
  }
  r.write("gramian_results");
  return unobservable ? NumericalFailure : Success;
}

int cmd_control(const Context& ctx) {
  const Config& c = ctx.config;
  const auto mesh = build_mesh(c);
  const auto region = build_region(c, mesh);
  const EigenBasis b = build_basis(c, mesh);
  const double T = times(c).front();
  const std::uint64_t seed = c.u64("hum.seed");
  const SpectralState u0 = seeded_state(b.size(), seed);
  const auto grid = make_grid(c, b, T);
  const auto s = hum::synthesize_control(b, region, u0, T, c.num("hum.epsilon"), &grid);
  std::optional<EigenBasis> fine;
  if (const int nf = c.integer("hum.fine_N"); nf > 0) {
    if (nf <= b.size()) throw ConfigError("hum.fine_N: must exceed spectrum.N");
    fine = with_potential(c, mesh, solve_basis(c, mesh, nf));
  }
  const auto v = hum::verify_control(b, u0, s.f, fine ? &*fine : nullptr);
  if (ctx.csv()) {
    auto os = ctx.open("control.csv");
    hum::write_control(os, s.f);
  }
  {
    auto os = ctx.open("control.json");
    hum::write_diagnostics(os, s.diagnostics, v, seed);
  }
  Results r(ctx, mesh, region.descriptor.describe());
  const auto& d = s.diagnostics;
  r.add("norm_f_sq", T, b.size(), "", d.norm_f_sq);
  r.add("K", T, b.size(), "", d.K);
  r.add("residual_T", T, b.size(), "", v.residual_T);
  if (v.spillover_residual) r.add("spillover_residual", T, fine->size(), "", *v.spillover_residual);
  r.add("optimality_bound", T, b.size(), "", d.bound_ok ? 1.0 : 0.0);
  r.add("replay_discrepancy", T, b.size(), "", d.replay_discrepancy);
  r.write("control_results");
  std::ostringstream msg;
  msg << "T=" << T << " N=" << b.size() << " residual_T=" << v.residual_T
      << " norm_f_sq=" << fmt(d.norm_f_sq) << " K|u0|^2=" << fmt(d.K)
      << " bound=" << (d.bound_ok ? "ok" : "violated");
  if (v.spillover_residual) msg << " spillover_residual=" << *v.spillover_residual;
  if (d.ill_conditioned) msg << " IllConditioned(condition=" << d.condition << ", try hum.epsilon > 0)";
  ctx.say(msg.str());
  return Success;
}

int cmd_sweep(const Context& ctx) {
  const Config& c = ctx.config;
  const int k_lo = c.integer("windows.k_min"), k_hi = c.integer("windows.k_max");
  const auto hs = c.list("windows.h");
  if (k_hi < k_lo && hs.empty())
    throw ConfigError("windows: empty sweep grid (set windows.k_max >= windows.k_min or windows.h)");
  const auto mesh = build_mesh(c);
  const auto region = build_region(c, mesh);
  const EigenBasis b = build_basis(c, mesh);
  Results r(ctx, mesh, region.descriptor.describe());
  if (k_hi >= k_lo)
    for (double T : times(c))
      for (const auto& w : observability::windowed_constants(b, region, T, k_lo, k_hi)) {
        r.add("K_k", T, b.size(), "k=" + std::to_string(w.k), w.K);
        ctx.say("T=" + fmt(T) + " k=" + std::to_string(w.k) + " modes=" + std::to_string(w.modes) +
                " K_k=" + fmt(w.K));
      }
  for (double h : hs) {
    for (double C : c.list("windows.C_horizon")) {
      const auto w = observability::wave_windowed_constant(b, region, h, C);
      r.add("K_wave", w.T, b.size(), "h=" + fmt(h) + ";C=" + fmt(C), w.K);
      ctx.say("h=" + fmt(h) + " C=" + fmt(C) + " T=" + fmt(w.T) + " modes=" + std::to_string(w.modes) +
              " K_wave=" + fmt(w.K));
    }
    for (double tau : c.list("windows.tau")) {
      const auto q = observability::quasimode_estimate_check(b, region, h, tau,
                                                             c.integer("windows.probes"),
                                                             c.u64("hum.seed"));
      r.add("quasimode_R", 0, b.size(), "h=" + fmt(h) + ";tau=" + fmt(tau), q.worst);
      ctx.say("h=" + fmt(h) + " tau=" + fmt(tau) + " on_shell=" + std::to_string(q.on_shell) +
              " worst_R=" + fmt(q.worst));
    }
  }
  r.write("sweep_results");
  return Success;
}

struct CheckLine {
  std::string name;
  double value, tolerance;
  bool pass;
};

int cmd_check(const Context& ctx) {
  const Config& c = ctx.config;
  const auto mesh = build_mesh(c);
  const auto region = build_region(c, mesh);
  const EigenBasis b = build_basis(c, mesh);
  const int n = b.size();
  const std::uint64_t seed = c.u64("hum.seed");
  std::vector<CheckLine> lines;
  const auto below = [&](const std::string& name, double v, double tol) {
    lines.push_back({name, v, tol, v <= tol});
  };

  below("basis.orthonormality", b.orthonormality_defect(), 1e-8);
  below("basis.residual", b.residuals.maxCoeff() / std::max(1.0, std::abs(b.lambda_max())), 1e-6);
  double unsorted = 0.0;
  for (int j = 1; j < n; ++j) unsorted = std::max(unsorted, b.lambdas(j - 1) - b.lambdas(j));
  below("basis.sorted", unsorted, 1e-12 * std::max(1.0, b.lambda_max()));
  const int k_max = static_cast<int>(std::ceil(std::log2(std::max(2.0, b.lambda_max())))) + 1;
  below("filters.partition_of_unity", spectral::dyadic_partition_check(b, k_max), 1e-12);

  const auto whole = surface::rasterize_region(mesh, surface::RegionDescriptor::whole());
  below("overlap.whole_is_identity",
        (observability::overlap_matrix(b, whole) - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(),
        1e-8);

  const auto Ts = times(c);
  const double T = Ts.front();
  const auto G = observability::gramian(b, region, T);
  const double gn = G.norm();
  const auto obs = observability::observability_constant(G);
  below("gramian.hermitian", G.hermitian_defect() / gn, 1e-10);
  below("gramian.psd", -obs.lambda_min / gn, 1e-10);
  const auto Gq = observability::gramian(b, region, T, nullptr, evolve::Evolution::Schrodinger,
                                         observability::Assembly::Quadrature);
  below("gramian.closed_form_vs_quadrature", (G.G - Gq.G).cwiseAbs().maxCoeff() / gn, 1e-8);
  const auto grid = make_grid(c, b, T);
  double qf = 0.0;
  const int probes = c.integer("hum.probes");
  for (int p = 0; p < probes; ++p) {
    const SpectralState phi = seeded_state(n, seed + 1000 + p);
    const double direct = observability::observed_energy(b, region, phi, grid);
    const double form = (phi.coeffs.adjoint() * G.G * phi.coeffs)(0).real();
    qf = std::max(qf, std::abs(form - direct) / direct);
  }
  below("gramian.quadratic_form", qf, 1e-6);
  lines.push_back({"observability.lambda_min_positive", obs.lambda_min, 0.0, obs.lambda_min > 0.0});
  double rise = 0.0, prev = obs.K;
  for (std::size_t i = 1; i < Ts.size(); ++i) {
    const double K = observability::observability_constant(observability::gramian(b, region, Ts[i])).K;
    if (Ts[i] > Ts[i - 1]) rise = std::max(rise, (K - prev) / prev);
    prev = K;
  }
  below("observability.K_nonincreasing_in_T", rise, 1e-10);

  double dual = 0.0, energy = 0.0, resid = 0.0, support = 0.0;
  bool bound = true;
  for (int p = 0; p < probes; ++p) {
    const SpectralState u0 = seeded_state(n, seed + p);
    const auto g = hum::apply_S(b, region, seeded_state(n, seed + 5000 + p), grid) * cd(0.3, 0.7);
    dual = std::max(dual, hum::duality_check(b, region, g, u0));
    if (obs.lambda_min <= 0.0) continue;
    const auto s = hum::synthesize_control(b, region, u0, T, c.num("hum.epsilon"), &grid);
    energy = std::max(energy, std::abs(s.diagnostics.norm_f_sq - s.diagnostics.u0_dot_phi.real()) /
                                  s.diagnostics.norm_f_sq);
    bound = bound && s.diagnostics.bound_ok;
    support = std::max(support, s.f.off_support_max());
    resid = std::max(resid, hum::verify_control(b, u0, s.f).residual_T);
  }
  below("hum.duality", dual, 1e-8);
  if (obs.lambda_min > 0.0) {
    below("hum.energy_identity", energy, 1e-8);
    lines.push_back({"hum.optimality_bound", bound ? 1.0 : 0.0, 1.0, bound});
    below("hum.control_support", support, 0.0);
    if (obs.condition() <= 1e10) below("hum.residual", resid, 1e-6);
  }

  bool all = true;
  {
    auto os = ctx.open("check.csv");
    os << "invariant,value,tolerance,pass\n";
    os.precision(6);
    for (const auto& l : lines) {
      os << l.name << ',' << l.value << ',' << l.tolerance << ',' << (l.pass ? "PASS" : "FAIL") << '\n';
      all = all && l.pass;
    }
  }
  for (const auto& l : lines) {
    std::ostringstream os;
    os.precision(3);
    os << (l.pass ? "PASS " : "FAIL ") << l.name << " value=" << l.value << " tol=" << l.tolerance;
    if (!l.pass || !ctx.quiet) ctx.out << os.str() << '\n';
  }
  ctx.say(std::string(all ? "all " : "some ") + "checks " + (all ? "passed" : "FAILED") + " (N=" +
          std::to_string(n) + ", level=" + std::to_string(b.mesh_level) + ", T=" + fmt(T) + ")");
  return all ? Success : NumericalFailure;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const std::map<std::string, std::function<int(const Context&)>>& commands() {
  static const std::map<std::string, std::function<int(const Context&)>> m = {
      {"mesh", cmd_mesh},     {"spectrum", cmd_spectrum}, {"gramian", cmd_gramian},
      {"control", cmd_control}, {"sweep", cmd_sweep},     {"check", cmd_check}};
  return m;
}

}  // namespace

int run(const Options& options, std::ostream& out, std::ostream& err) {
  try {
    const auto it = commands().find(options.command);
    if (it == commands().end()) throw ConfigError("unknown command '" + options.command + "'");
    Config config = options.config ? Config::load(*options.config) : Config::defaults();
    if (options.seed) config.set("hum.seed", std::to_string(*options.seed));
    if (options.out) config.set("output.directory", options.out->string());
    const std::string hash = config.hash();
    const fs::path dir = fs::path(config.str("output.directory")) / hash.substr(0, 12);
    const fs::path marker = dir / (options.command + ".meta.json");
    std::error_code ec;
    if (fs::exists(marker, ec) && !options.force)
      throw IoError(marker.string() + " exists; rerun with --force to overwrite");
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    {
      std::ofstream os(dir / "config.txt");
      if (!os) throw IoError("cannot write " + (dir / "config.txt").string());
      os << config.canonical();
    }
    Context ctx{options, config, dir, out, options.quiet};
    const auto start = std::chrono::steady_clock::now();
    const int code = it->second(ctx);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    nlohmann::json meta;
    meta["command"] = options.command;
    meta["config_hash"] = hash;
    meta["seed"] = config.u64("hum.seed");
    meta["timestamp"] = utc_now();
    meta["seconds"] = seconds;
    meta["exit_code"] = code;
    std::ofstream os(marker);
    if (!os) throw IoError("cannot write " + marker.string());
    os << meta.dump(2) << '\n';
    ctx.say("output: " + dir.string());
    return code;
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return ConfigFailure;
  } catch (const InvalidResolution& e) {
    err << e.what() << '\n';
    return ConfigFailure;
  } catch (const EmptyRegion& e) {
    err << e.what() << '\n';
    return ConfigFailure;
  } catch (const TooManyModes& e) {
    err << e.what() << '\n';
    return ConfigFailure;
  } catch (const IoError& e) {
    err << e.what() << '\n';
    return IoFailure;
  } catch (const Error& e) {
    err << e.what() << '\n';
    return NumericalFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return NumericalFailure;
  }
}

}  // namespace sclab::cli
