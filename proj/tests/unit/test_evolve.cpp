#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "sclab/errors.hpp"
#include "sclab/evolve.hpp"

using namespace sclab;
using namespace sclab::evolve;
using spectral::EigenBasis;
using spectral::SpectralState;
using cd = std::complex<double>;

namespace {
constexpr double kPi = std::numbers::pi;
constexpr cd kI{0.0, 1.0};

const spectral::FourierBasis& torus16() {
  static const auto fb = spectral::torus_fourier_basis(surface::build_torus(16, 2.0 * kPi), 16);
  return fb;
}

SpectralState random_state(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::VectorXcd c(n);
  for (int j = 0; j < n; ++j) c(j) = {g(rng), g(rng)};
  return SpectralState(c);
}

// Source with forcing exp(i nu t) * e_j on the whole surface.
ControlSignal single_mode_source(const EigenBasis& b, const surface::ControlRegion& whole,
                                 const TimeGrid& grid, int j, double nu) {
  Eigen::MatrixXcd g(b.num_dofs(), grid.size());
  for (int n = 0; n < grid.size(); ++n)
    g.col(n) = b.modes.col(j).cast<cd>() * std::polar(1.0, nu * grid.nodes[n]);
  return ControlSignal::from_unweighted(grid, whole, b.mass, g);
}
}  // namespace

TEST_CASE("time grids") {
  for (const TimeGrid& g : {TimeGrid::trapezoid(0.0, 2.0, 37), TimeGrid::simpson(0.0, 2.0, 37),
                            TimeGrid::gauss_legendre(0.0, 2.0, 5, 20)}) {
    double s = 0.0;
    for (int k = 0; k < g.size(); ++k) {
      CHECK(g.weights[k] > 0.0);
      if (k) CHECK(g.nodes[k] > g.nodes[k - 1]);
      s += g.weights[k];
    }
    CHECK(s == doctest::Approx(2.0).epsilon(1e-14));
  }
  // Gauss-Legendre with 20 nodes integrates degree 39 exactly.
  const TimeGrid gl = TimeGrid::gauss_legendre(-1.0, 1.0, 1, 20);
  double s = 0.0;
  for (int k = 0; k < gl.size(); ++k) s += gl.weights[k] * std::pow(gl.nodes[k], 38);
  CHECK(s == doctest::Approx(2.0 / 39.0).epsilon(1e-13));
  CHECK(TimeGrid::for_rate(0.0, 1.0, 100.0).step() * 100.0 < kPi / 8.0 + 1e-12);
  CHECK_THROWS_AS(check_resolution(TimeGrid::trapezoid(0.0, 1.0, 10), 100.0), AliasedGrid);
  CHECK_NOTHROW(check_resolution(TimeGrid::trapezoid(0.0, 1.0, 100), 100.0));
}

TEST_CASE("propagators are unitary phase groups") {
  const EigenBasis& b = torus16().basis;
  const SpectralState u = random_state(b.size(), 1);
  CHECK((schrodinger_propagate(b, u, 0.0).coeffs - u.coeffs).norm() == 0.0);
  CHECK((halfwave_propagate(b, u, 0.0).coeffs - u.coeffs).norm() == 0.0);
  for (double t : {0.3, -1.7, 25.0}) {
    CHECK(schrodinger_propagate(b, u, t).norm() == doctest::Approx(u.norm()).epsilon(1e-12));
    CHECK(halfwave_propagate(b, u, t).norm() == doctest::Approx(u.norm()).epsilon(1e-12));
  }
  const auto a = schrodinger_propagate(b, schrodinger_propagate(b, u, 0.4), 1.1);
  const auto c = schrodinger_propagate(b, u, 1.5);
  CHECK((a.coeffs - c.coeffs).norm() < 1e-12 * u.norm());
  const auto hw = halfwave_propagate(b, halfwave_propagate(b, u, 0.4), 1.1);
  CHECK((hw.coeffs - halfwave_propagate(b, u, 1.5).coeffs).norm() < 1e-12 * u.norm());
  // Periodic return and constant mode.
  const int j = 3;
  const auto ej = SpectralState::mode(b.size(), j);
  const auto back = schrodinger_propagate(b, ej, 2.0 * kPi / b.lambdas(j));
  CHECK((back.coeffs - ej.coeffs).norm() < 1e-12);
  const auto e0 = SpectralState::mode(b.size(), 0);
  CHECK((halfwave_propagate(b, e0, 3.0).coeffs - e0.coeffs).norm() == 0.0);
  // Explicit convention: u_j(t) = u_j exp(-i lambda_j t).
  CHECK(std::abs(schrodinger_propagate(b, ej, 0.7).coeffs(j) -
                 std::polar(1.0, -b.lambdas(j) * 0.7)) < 1e-15);
  CHECK(std::abs(halfwave_propagate(b, ej, 0.7).coeffs(j) -
                 std::polar(1.0, std::sqrt(b.lambdas(j)) * 0.7)) < 1e-15);
}

TEST_CASE("phase integral") {
  for (double T : {0.1, 1.0, 7.0}) {
    CHECK(std::abs(phase_integral(0.0, T) - T) < 1e-15 * T);
    for (double th : {1e-12, 1e-7, 0.3, -4.0, 100.0}) {
      const cd ref = (std::exp(kI * (th * T)) - 1.0) / (kI * th);
      const cd taylor = T * (1.0 + kI * (T * th / 2.0) - T * T * th * th / 6.0);
      const cd expect = std::abs(th * T) < 1e-4 ? taylor : ref;
      CHECK(std::abs(phase_integral(th, T) - expect) < 1e-12 * T);
    }
  }
}

TEST_CASE("semiclassical fourier transform") {
  for (double h : {0.1, 0.01}) {
    UniformSeries phi;
    phi.start = -8.0;
    phi.step = 16.0 / 1600;
    phi.values.resize(1601);
    for (int k = 0; k <= 1600; ++k) phi.values(k) = std::exp(-phi.at(k) * phi.at(k));
    const UniformSeries f = semiclassical_fourier(phi, h, false);
    const double ratio = f.l2_norm() / phi.l2_norm();
    CHECK(std::abs(ratio / std::sqrt(2.0 * kPi * h) - 1.0) < 1e-6);
    // Analytic transform of exp(-t^2): sqrt(pi) exp(-tau^2 / (4 h^2)).
    for (int m = 0; m < f.size(); m += 97) {
      const double tau = f.at(m);
      CHECK(std::abs(f.values(m) - std::sqrt(kPi) * std::exp(-tau * tau / (4 * h * h))) < 1e-10);
    }
  }
  SUBCASE("zero in, zero out") {
    UniformSeries z;
    z.values = Eigen::VectorXcd::Zero(64);
    CHECK(semiclassical_fourier(z, 0.1, false).values.norm() == 0.0);
  }
  SUBCASE("adjoint after forward is 2 pi h times identity") {
    const double h = 0.1;
    UniformSeries phi;
    phi.start = -6.0;
    phi.step = 12.0 / 600;
    phi.values.resize(601);
    for (int k = 0; k <= 600; ++k)
      phi.values(k) = std::exp(-phi.at(k) * phi.at(k)) * std::polar(1.0, 0.5 * phi.at(k));
    const UniformSeries f = semiclassical_fourier(phi, h, false);
    const UniformSeries back = semiclassical_fourier_on(f, h, true, phi.start, phi.step, phi.size());
    CHECK((back.values - 2.0 * kPi * h * phi.values).norm() <
          1e-8 * 2.0 * kPi * h * phi.values.norm());
  }
  SUBCASE("aliasing guard") {
    UniformSeries phi;
    phi.step = 0.1;
    phi.values = Eigen::VectorXcd::Ones(10);
    CHECK_THROWS_AS(semiclassical_fourier(phi, 0.01, false, 1.0), AliasedGrid);
    CHECK_NOTHROW(semiclassical_fourier(phi, 0.01, false, 0.3));
  }
}

TEST_CASE("control signals") {
  const auto mesh = surface::build_torus(16, 2.0 * kPi);
  const EigenBasis& b = torus16().basis;
  const auto strip = surface::rasterize_region(mesh, surface::RegionDescriptor::strip(0.0, kPi));
  const TimeGrid grid = TimeGrid::trapezoid(0.0, 1.0, 8);
  Eigen::MatrixXcd g = Eigen::MatrixXcd::Random(b.num_dofs(), grid.size());
  const ControlSignal s = ControlSignal::from_unweighted(grid, strip, b.mass, g);
  CHECK(s.off_support_max() == 0.0);
  CHECK(std::abs(s.norm_sq - s.recompute_norm_sq()) <= 1e-10 * s.norm_sq);
  CHECK(std::abs(s.inner(s).real() - s.norm_sq) <= 1e-12 * s.norm_sq);
  const ControlSignal t = s * cd(0.0, 2.0);
  CHECK(t.norm_sq == doctest::Approx(4.0 * s.norm_sq));
  CHECK(std::abs(t.recompute_norm_sq() - t.norm_sq) <= 1e-10 * t.norm_sq);
  // Pre-weight field recovered on the positive-weight set.
  const Eigen::MatrixXcd u = s.unweighted();
  for (int v = 0; v < b.num_dofs(); ++v)
    if (strip.weights[v] > 0) CHECK((u.row(v) - g.row(v)).norm() < 1e-12 * (1.0 + g.row(v).norm()));
}

TEST_CASE("inhomogeneous solve") {
  const auto mesh = surface::build_torus(16, 2.0 * kPi);
  const EigenBasis& b = torus16().basis;
  const auto whole = surface::rasterize_region(mesh, surface::RegionDescriptor::whole());
  const double T = 1.0;

  SUBCASE("zero source and zero terminal") {
    const TimeGrid grid = TimeGrid::trapezoid(0.0, T, 20);
    const auto traj = solve_inhomogeneous(b, ControlSignal::zero(grid, whole, b.mass),
                                          SpectralState::zero(b.size()), Direction::Backward);
    CHECK(traj.states.norm() == 0.0);
  }
  SUBCASE("zero source is free backward evolution") {
    const TimeGrid grid = TimeGrid::trapezoid(0.0, T, 20);
    const SpectralState uT = random_state(b.size(), 4);
    const auto traj = solve_inhomogeneous(b, ControlSignal::zero(grid, whole, b.mass), uT,
                                          Direction::Backward);
    CHECK((traj.front().coeffs - schrodinger_propagate(b, uT, -T).coeffs).norm() <
          1e-12 * uT.norm());
    for (std::size_t k = 0; k < traj.times.size(); ++k)
      CHECK(traj.at(static_cast<int>(k)).norm() == doctest::Approx(uT.norm()).epsilon(1e-12));
  }
  SUBCASE("single-mode constant source against the antiderivative") {
    const int j = 5;
    for (const TimeGrid& grid : {TimeGrid::trapezoid(0.0, T, 7), TimeGrid::simpson(0.0, T, 8),
                                 TimeGrid::gauss_legendre(0.0, T, 2, 10)}) {
      const auto src = single_mode_source(b, whole, grid, j, 0.0);
      const auto traj =
          solve_inhomogeneous(b, src, SpectralState::zero(b.size()), Direction::Backward);
      // u_j(0) = i int_0^T exp(i lambda s) ds.
      const cd expect = kI * phase_integral(b.lambdas(j), T);
      CHECK(std::abs(traj.front().coeffs(j) - expect) < 1e-12);
      for (int k = 0; k < b.size(); ++k)
        if (k != j) CHECK(std::abs(traj.front().coeffs(k)) < 1e-12);
    }
  }
  SUBCASE("forward and backward solves invert each other") {
    const TimeGrid grid = TimeGrid::gauss_legendre(0.0, T, 4, 12);
    Eigen::MatrixXcd g(b.num_dofs(), grid.size());
    for (int n = 0; n < grid.size(); ++n)
      g.col(n) = (b.modes * Eigen::VectorXd::LinSpaced(b.size(), 0.1, 1.0)).cast<cd>() *
                 std::cos(3.0 * grid.nodes[n]);
    const auto src = ControlSignal::from_unweighted(grid, whole, b.mass, g);
    const SpectralState u0 = random_state(b.size(), 9);
    const auto fwd = solve_inhomogeneous(b, src, u0, Direction::Forward);
    const auto bwd = solve_inhomogeneous(b, src, fwd.back(), Direction::Backward);
    CHECK((bwd.front().coeffs - u0.coeffs).norm() < 1e-12 * u0.norm());
  }
  SUBCASE("quadrature convergence on a smooth source") {
    const int j = 7;
    const double nu = 3.0;
    // u_j(0) = i int_0^T exp(i (lambda + nu) s) ds.
    const cd exact = kI * phase_integral(b.lambdas(j) + nu, T);
    auto error = [&](const TimeGrid& grid) {
      const auto src = single_mode_source(b, whole, grid, j, nu);
      return std::abs(
          solve_inhomogeneous(b, src, SpectralState::zero(b.size()), Direction::Backward)
              .front()
              .coeffs(j) -
          exact);
    };
    std::vector<double> trap, simp;
    for (int n : {16, 32, 64, 128}) {
      trap.push_back(error(TimeGrid::trapezoid(0.0, T, n)));
      simp.push_back(error(TimeGrid::simpson(0.0, T, n)));
    }
    for (int k = 0; k + 1 < 4; ++k) {
      // Exactly second order: the ratio tends to 4.
      CHECK(trap[k] / trap[k + 1] == doctest::Approx(4.0).epsilon(0.02));
      CHECK(simp[k] / simp[k + 1] >= 4.0);
    }
  }
}

TEST_CASE("trajectory export") {
  const auto mesh = surface::build_torus(16, 2.0 * kPi);
  const EigenBasis& b = torus16().basis;
  const auto whole = surface::rasterize_region(mesh, surface::RegionDescriptor::whole());
  const TimeGrid grid = TimeGrid::trapezoid(0.0, 1.0, 3);
  const auto traj = solve_inhomogeneous(b, ControlSignal::zero(grid, whole, b.mass),
                                        SpectralState::mode(b.size(), 1), Direction::Backward);
  std::ostringstream os;
  write_trajectory(os, traj, grid);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line.rfind("# rule=trapezoid", 0) == 0);
  std::getline(is, line);
  CHECK(line == "t,mode_index,re,im");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 4 * b.size());
}
