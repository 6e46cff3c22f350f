#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "oracles/fourier_overlap.hpp"
#include "oracles/rayleigh.hpp"
#include "sclab/errors.hpp"
#include "sclab/observability.hpp"

using namespace sclab;
using namespace sclab::observability;
using spectral::EigenBasis;
using spectral::SpectralState;
using surface::RegionDescriptor;
using cd = std::complex<double>;

namespace {
constexpr double kPi = std::numbers::pi;

struct Problem {
  surface::SurfaceMesh mesh;
  spectral::FourierBasis fb;
};

// Unit torus at n = 16 with 25 Fourier modes.
const Problem& torus25() {
  static const Problem p = [] {
    auto mesh = surface::build_torus(16, 1.0);
    auto fb = spectral::torus_fourier_basis(mesh, 25);
    return Problem{std::move(mesh), std::move(fb)};
  }();
  return p;
}

// Finer unit torus so that thin strips hold several grid columns.
const Problem& torus25_fine() {
  static const Problem p = [] {
    auto mesh = surface::build_torus(32, 1.0);
    auto fb = spectral::torus_fourier_basis(mesh, 25);
    return Problem{std::move(mesh), std::move(fb)};
  }();
  return p;
}

const Problem& torus16() {
  static const Problem p = [] {
    auto mesh = surface::build_torus(16, 2.0 * kPi);
    auto fb = spectral::torus_fourier_basis(mesh, 16);
    return Problem{std::move(mesh), std::move(fb)};
  }();
  return p;
}

SpectralState random_state(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXcd c(n);
  for (int j = 0; j < n; ++j) c(j) = {g(rng), g(rng)};
  return SpectralState(c);
}

double quadratic_form(const Eigen::MatrixXcd& G, const Eigen::VectorXcd& x) {
  return (x.adjoint() * G * x)(0).real();
}
}  // namespace

TEST_CASE("overlap matrix") {
  const auto& p = torus25();
  const EigenBasis& b = p.fb.basis;
  const auto whole = surface::rasterize_region(p.mesh, RegionDescriptor::whole());
  CHECK((overlap_matrix(b, whole) - Eigen::MatrixXd::Identity(25, 25)).cwiseAbs().maxCoeff() < 1e-8);

  const auto strip = surface::rasterize_region(p.mesh, RegionDescriptor::strip(0.0, 0.5, 0.0));
  const Eigen::MatrixXd m = overlap_matrix(b, strip);
  const Eigen::MatrixXd oracle = oracles::strip_fourier_overlap(p.fb.labels, 16, 1.0, 0, 8);
  CHECK((m - oracle).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
  for (int j = 0; j < 25; ++j) {
    CHECK(m(j, j) >= 0.0);
    CHECK(m(j, j) <= 1.0 + 1e-12);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  CHECK(es.eigenvalues().minCoeff() > -1e-12);

  // Shifted strip wraps across the seam.
  const auto wrap = surface::rasterize_region(p.mesh, RegionDescriptor::strip(0.75, 1.25, 0.0));
  const Eigen::MatrixXd ow = oracles::strip_fourier_overlap(p.fb.labels, 16, 1.0, 12, 8);
  CHECK((overlap_matrix(b, wrap) - ow).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("gramian basics") {
  const auto& p = torus25();
  const EigenBasis& b = p.fb.basis;
  const auto whole = surface::rasterize_region(p.mesh, RegionDescriptor::whole());
  for (double T : {0.5, 1.0, 2.0}) {
    const auto G = gramian(b, whole, T);
    CHECK((G.G - T * Eigen::MatrixXcd::Identity(25, 25)).cwiseAbs().maxCoeff() < 1e-8 * T);
    const auto r = observability_constant(G);
    CHECK(r.K == doctest::Approx(1.0 / T).epsilon(1e-8));
    CHECK_FALSE(r.not_observable);
  }

  const auto strip = surface::rasterize_region(p.mesh, RegionDescriptor::strip(0.0, 0.5, 0.0));
  const auto G = gramian(b, strip, 1.0);
  CHECK(G.hermitian_defect() <= 1e-10 * G.norm());
  const auto r = observability_constant(G);
  CHECK(r.lambda_min >= -1e-10 * G.norm());
  CHECK(r.lambda_min > 0.0);
  CHECK(r.certificate.norm() == doctest::Approx(1.0));
  CHECK(quadratic_form(G.G, r.certificate) == doctest::Approx(r.lambda_min).epsilon(1e-10));

  const auto m = overlap_matrix(b, strip);
  for (int j : {0, 5, 17})
    CHECK(std::abs(quadratic_form(G.G, SpectralState::mode(25, j).coeffs) - m(j, j)) < 1e-13);

  CHECK_THROWS_AS(gramian(b, strip, 0.0), ShapeMismatch);
}

TEST_CASE("closed form and quadrature assembly agree") {
  for (const Problem* p : {&torus16(), &torus25()}) {
    const EigenBasis& b = p->fb.basis;
    const auto strip = surface::rasterize_region(
        p->mesh, RegionDescriptor::strip(0.0, 0.3 * p->mesh.side_length));
    for (Evolution kind : {Evolution::Schrodinger, Evolution::HalfWave})
      for (double T : {0.5, 1.0, 2.0}) {
        const auto cf = gramian(b, strip, T, nullptr, kind);
        const auto qd = gramian(b, strip, T, nullptr, kind, Assembly::Quadrature);
        CHECK((cf.G - qd.G).cwiseAbs().maxCoeff() <= 1e-8 * cf.norm());
      }
  }
}

TEST_CASE("quadratic form identity against vertex-field quadrature") {
  const auto& p = torus25();
  const EigenBasis& b = p.fb.basis;
  const auto strip = surface::rasterize_region(p.mesh, RegionDescriptor::strip(0.0, 0.5, 0.0));
  const double T = 1.0;
  const auto G = gramian(b, strip, T);
  const auto grid = evolve::TimeGrid::for_rate(0.0, T, b.lambda_max(),
                                               evolve::TimeGrid::Rule::GaussLegendre);
  std::mt19937_64 rng(17);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const SpectralState phi = random_state(25, rng);
    const double direct = observed_energy(b, strip, phi, grid);
    worst = std::max(worst, std::abs(quadratic_form(G.G, phi.coeffs) - direct) / direct);
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("observability constant matches random Rayleigh search") {
  const auto& p = torus25();
  const auto strip = surface::rasterize_region(p.mesh, RegionDescriptor::strip(0.0, 0.5, 0.0));
  const auto G = gramian(p.fb.basis, strip, 1.0);
  const auto r = observability_constant(G);
  const double rq = oracles::rayleigh_random_search(G.G, 100000, 5);
  CHECK(rq >= r.lambda_min * (1.0 - 1e-12));
  CHECK(std::abs(1.0 / rq - r.K) <= 0.02 * r.K);
}

TEST_CASE("monotonicity") {
  const auto& p = torus25_fine();
  const EigenBasis& b = p.fb.basis;
  for (double a : {0.1, 0.3, 0.5}) {
    const auto strip = surface::rasterize_region(p.mesh, RegionDescriptor::strip(0.0, a));
    double prev = std::numeric_limits<double>::infinity();
    for (double T : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      const auto r = observability_constant(gramian(b, strip, T));
      CHECK(r.lambda_min > 0.0);
      CHECK(r.K <= prev * (1.0 + 1e-10));
      prev = r.K;
    }
  }
  // Larger region, pointwise larger weights.
  const double Ks = observability_constant(
                        gramian(b, surface::rasterize_region(p.mesh, RegionDescriptor::strip(0.0, 0.3, 0.0)), 1.0))
                        .K;
  const double Kl = observability_constant(
                        gramian(b, surface::rasterize_region(p.mesh, RegionDescriptor::strip(0.0, 0.6, 0.0)), 1.0))
                        .K;
  CHECK(Kl <= Ks);
}

TEST_CASE("windows") {
  const auto& p = torus25();
  const EigenBasis& b = p.fb.basis;
  const auto strip = surface::rasterize_region(p.mesh, RegionDescriptor::strip(0.0, 0.5));
  const auto full = gramian(b, strip, 1.0);
  const auto f = spectral::make_filter(b, spectral::FilterSpec::phi(5));
  const auto W = gramian(b, strip, 1.0, &f);
  const Eigen::MatrixXcd expect = f.weights.asDiagonal() * full.G * f.weights.asDiagonal();
  CHECK((W.G - expect).cwiseAbs().maxCoeff() <= 1e-15 * full.norm());
  REQUIRE(W.window.has_value());

  const auto guard = spectral::make_filter(b, spectral::FilterSpec::phi(10));
  CHECK_THROWS_AS(gramian(b, strip, 1.0, &guard), SpilloverGuard);

  // phi_0 on this basis keeps only the constant mode.
  const auto k0 = windowed_constants(b, strip, 2.0, 0, 0);
  REQUIRE(k0.size() == 1);
  CHECK(k0[0].modes == 1);
  CHECK(k0[0].K == doctest::Approx(b.area / (2.0 * strip.weighted_area)).epsilon(1e-12));

  const auto whole = surface::rasterize_region(p.mesh, RegionDescriptor::whole());
  for (const auto& w : windowed_constants(b, whole, 1.5, 0, 5)) {
    if (w.modes == 0) continue;
    CHECK(w.K == doctest::Approx(1.0 / 1.5).epsilon(1e-10));
  }
  CHECK_THROWS_AS(windowed_constants(b, whole, 1.0, 0, 10), SpilloverGuard);

  const Eigen::MatrixXcd r = restrict(full.G, {3, 7});
  CHECK(r(0, 1) == full.G(3, 7));
  CHECK(r(1, 0) == full.G(7, 3));
}

TEST_CASE("observation with H^-4 error") {
  const auto& p = torus25();
  const EigenBasis& b = p.fb.basis;
  const auto whole = surface::rasterize_region(p.mesh, RegionDescriptor::whole());
  const double T = 1.0;
  const auto G = gramian(b, whole, T);
  const std::vector<Probe> e0{{ProbeKind::Random, -1, SpectralState::mode(25, 0)}};
  const auto c0 = check_observe_with_error(b, G, e0);
  CHECK(c0.C_star == doctest::Approx(1.0 / (T + 1.0)).epsilon(1e-12));
  CHECK(c0.C_sup <= 1.0 / T + 1e-12);

  const auto strip = surface::rasterize_region(p.mesh, RegionDescriptor::strip(0.0, 0.3));
  const auto Gs = gramian(b, strip, T);
  const auto probes = standard_probes(b, Gs, 50, 9);
  int packets = 0, certs = 0;
  for (const auto& pr : probes) {
    packets += pr.kind == ProbeKind::DyadicPacket;
    certs += pr.kind == ProbeKind::Certificate;
  }
  CHECK(packets >= 3);
  CHECK(certs == 2);
  const auto c = check_observe_with_error(b, Gs, probes);
  CHECK(c.C_star <= c.C_sup * (1.0 + 1e-10));
  CHECK(c.C_star == doctest::Approx(c.C_sup).epsilon(1e-10));
  CHECK(c.argmax_kind == ProbeKind::Certificate);
  CHECK(c.ratios.size() == probes.size());

  const auto again = standard_probes(b, Gs, 50, 9);
  CHECK((again[10].state.coeffs - probes[10].state.coeffs).norm() == 0.0);
}

TEST_CASE("eigenfunction mass") {
  const auto& p = torus25();
  const EigenBasis& b = p.fb.basis;
  const auto whole = surface::rasterize_region(p.mesh, RegionDescriptor::whole());
  const auto mw = eigenfunction_mass(b, whole);
  CHECK((mw.diag.array() - 1.0).abs().maxCoeff() < 1e-10);
  const auto strip = surface::rasterize_region(p.mesh, RegionDescriptor::strip(0.0, 0.3));
  const auto ms = eigenfunction_mass(b, strip);
  CHECK(ms.diag(0) == doctest::Approx(strip.weighted_area / b.area).epsilon(1e-12));
  CHECK(ms.min > 0.0);
  CHECK(ms.min == ms.diag.minCoeff());
  CHECK((ms.diag - overlap_matrix(b, strip).diagonal()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(ms.eigenspace_min <= ms.min + 1e-15);
  CHECK(ms.eigenspace_min > 0.0);

  // The cluster minimum does not depend on the basis chosen inside a
  // degenerate eigenspace: rotate the first lambda = 4 pi^2 quadruple.
  EigenBasis rotated = b;
  Eigen::Matrix4d Q = Eigen::Matrix4d::Random().householderQr().householderQ();
  rotated.modes.middleCols(1, 4) = b.modes.middleCols(1, 4) * Q;
  const auto mr = eigenfunction_mass(rotated, strip);
  CHECK(mr.eigenspace_min == doctest::Approx(ms.eigenspace_min).epsilon(1e-12));
  const auto singletons = eigenfunction_mass(b, strip, -1.0);
  CHECK(singletons.eigenspace_min == doctest::Approx(ms.min).epsilon(1e-12));
}

TEST_CASE("quasimode estimate") {
  const auto& p = torus16();
  const EigenBasis& b = p.fb.basis;
  const auto strip = surface::rasterize_region(p.mesh, RegionDescriptor::strip(0.0, 2.0));
  const auto m = overlap_matrix(b, strip);
  // lambda_1 is close to 1 on the 2 pi torus.
  const int j = 1;
  REQUIRE(b.lambdas(j) == doctest::Approx(1.0).epsilon(2e-2));
  const double h = 0.6, tau = h * h * b.lambdas(j);
  CHECK(quasimode_ratio(b, m, h, tau, SpectralState::mode(16, j)) ==
        doctest::Approx(1.0 / std::sqrt(m(j, j))).epsilon(1e-12));
  // Far off-shell: residual dominates.
  const double r_off = quasimode_ratio(b, m, h, 100.0, SpectralState::mode(16, j));
  CHECK(r_off < h / (99.0 * std::log(1.0 / h)) * 1.0001);

  const auto q = quasimode_estimate_check(b, strip, h, 0.7, 200, 3);
  CHECK(q.on_shell > 0);
  CHECK(q.worst > 0.0);
  CHECK(std::isfinite(q.worst));
  CHECK(q.ratios.size() == 200);
  CHECK(quasimode_estimate_check(b, strip, h, 0.7, 200, 3).worst == q.worst);
  CHECK_THROWS_AS(quasimode_estimate_check(b, strip, 0.1, 1.0, 10, 1), UnresolvedScale);
}

TEST_CASE("wave constant") {
  const auto& p = torus25();
  const EigenBasis& b = p.fb.basis;
  const auto whole = surface::rasterize_region(p.mesh, RegionDescriptor::whole());
  const double h = 0.25;
  const auto w = wave_windowed_constant(b, whole, h, 1.0);
  CHECK(w.T == doctest::Approx(std::log(4.0)));
  CHECK(w.K == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(w.modes > 0);

  const auto strip = surface::rasterize_region(p.mesh, RegionDescriptor::strip(0.0, 0.5));
  const auto ws = wave_windowed_constant(b, strip, h, 2.0);
  CHECK(ws.K >= 1.0);
  CHECK_FALSE(ws.not_observable);
  // Single-mode window: closed form with sqrt(lambda) phases.
  const auto Gw = gramian(b, strip, 1.0, nullptr, Evolution::HalfWave);
  const auto m = overlap_matrix(b, strip);
  CHECK(Gw.G(7, 7).real() == doctest::Approx(m(7, 7)).epsilon(1e-13));
  CHECK_THROWS_AS(wave_windowed_constant(b, strip, 0.01, 1.0), SpilloverGuard);
}

TEST_CASE("results csv") {
  std::ostringstream os;
  write_results_header(os);
  write_result(os, {"K", "torus", "strip[0,0.5)", 1.0, 25, "k=2", 0.125, 1.0});
  CHECK(os.str() ==
        "quantity,surface,region,T,N,h_or_k,value,certificate_norm\n"
        "K,torus,\"strip[0,0.5)\",1,25,k=2,0.125,1\n");
}
