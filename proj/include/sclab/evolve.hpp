#pragma once

#include <complex>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sclab/spectral.hpp"
#include "sclab/surface.hpp"

namespace sclab::evolve {

// Sign convention: (i d/dt + Delta) u = 0 gives u_j(t) = u_j(0) exp(-i lambda_j t).
// The half-wave group exp(it sqrt(-Delta)) gives u_j(0) exp(+i sqrt(lambda_j) t).
enum class Evolution { Schrodinger, HalfWave };

std::string to_string(Evolution kind);

// Angular rate omega_j with u_j(t) = u_j(0) exp(-i omega_j t).
double phase_rate(Evolution kind, double lambda);

// Nodes and weights on [t_start, t_end]. Trapezoid and Simpson use uniform
// steps; Gauss-Legendre uses n_steps equal panels of `order` nodes each.
struct TimeGrid {
  enum class Rule { Trapezoid, Simpson, GaussLegendre };

  Rule rule = Rule::Trapezoid;
  double t_start = 0.0, t_end = 0.0;
  int n_steps = 0;
  int order = 0;  // nodes per Gauss-Legendre panel
  std::vector<double> nodes, weights;

  static TimeGrid trapezoid(double t0, double t1, int n_steps);
  static TimeGrid simpson(double t0, double t1, int n_steps);
  static TimeGrid gauss_legendre(double t0, double t1, int panels, int order = 20);
  // Default policy: the fastest phase rate advances less than pi/8 per step,
  // or at most 4 rad per Gauss-Legendre panel.
  static TimeGrid for_rate(double t0, double t1, double max_rate,
                           Rule rule = Rule::Trapezoid);

  int size() const { return static_cast<int>(nodes.size()); }
  double step() const { return (t_end - t_start) / n_steps; }
  bool uniform() const { return rule != Rule::GaussLegendre; }
  double length() const { return t_end - t_start; }
  std::string describe() const;
};

std::string to_string(TimeGrid::Rule rule);

// AliasedGrid unless the fastest phase is resolved: at most pi per uniform
// step, at most `order` rad per Gauss-Legendre panel.
void check_resolution(const TimeGrid& grid, double max_rate);

spectral::SpectralState schrodinger_propagate(const spectral::EigenBasis& basis,
                                              const spectral::SpectralState& state,
                                              double t);
spectral::SpectralState halfwave_propagate(const spectral::EigenBasis& basis,
                                           const spectral::SpectralState& state,
                                           double t);
spectral::SpectralState propagate(Evolution kind, const spectral::EigenBasis& basis,
                                  const spectral::SpectralState& state, double t);

// int_0^T exp(i theta t) dt; Taylor form when |theta| <= 1e-9 max(1, 1/T).
std::complex<double> phase_integral(double theta, double T);

// Samples on t_k = start + k*step.
struct UniformSeries {
  double start = 0.0, step = 1.0;
  Eigen::VectorXcd values;

  int size() const { return static_cast<int>(values.size()); }
  double at(int k) const { return start + k * step; }
  // Trapezoid L^2 norm.
  double l2_norm() const;
};

// F_h phi(tau) = int exp(-i t tau / h) phi(t) dt, or the adjoint with
// exp(+i t tau / h), by trapezoid quadrature. The output grid is centered
// on 0 and spans one aliasing period 2 pi h / dt with `out_count` points
// (default: as many as the input). Requesting |tau| up to tau_max beyond the
// Nyquist bound pi h / dt throws AliasedGrid.
UniformSeries semiclassical_fourier(const UniformSeries& samples, double h, bool adjoint,
                                    std::optional<double> tau_max = std::nullopt,
                                    std::optional<int> out_count = std::nullopt);
// Same quadrature evaluated on an explicit output grid.
UniformSeries semiclassical_fourier_on(const UniformSeries& samples, double h, bool adjoint,
                                       double out_start, double out_step, int out_count);

// Space-time field on quotient vertices, already multiplied by the region
// weights: field(v, n) = w_v g(t_n, v). The cached norm is the
// L^2((0,T) x Omega) norm of g, sum_n tw_n sum_v mass_v |field|^2 / w_v.
struct ControlSignal {
  TimeGrid grid;
  Eigen::MatrixXcd field;  // num_dofs x grid nodes
  std::vector<double> region_weights;
  Eigen::VectorXd mass;
  double norm_sq = 0.0;

  // Builds from pre-weight values g(v, n); entries off the support are dropped.
  static ControlSignal from_unweighted(const TimeGrid& grid, const surface::ControlRegion& region,
                                       const Eigen::VectorXd& mass, const Eigen::MatrixXcd& g);
  static ControlSignal zero(const TimeGrid& grid, const surface::ControlRegion& region,
                            const Eigen::VectorXd& mass);

  double recompute_norm_sq() const;
  // <a, b> in L^2((0,T) x Omega) on the shared grid.
  std::complex<double> inner(const ControlSignal& other) const;
  // Max |field| where the region weight vanishes.
  double off_support_max() const;
  // Pre-weight values, recoverable where the weight is positive (0 elsewhere).
  Eigen::MatrixXcd unweighted() const;

  ControlSignal operator+(const ControlSignal& o) const;
  ControlSignal operator*(std::complex<double> a) const;
};

// Mode forcing F(j, n) = <field(., t_n), e_j>_mass.
Eigen::MatrixXcd forcing_coefficients(const spectral::EigenBasis& basis,
                                      const ControlSignal& source);

enum class Direction { Forward, Backward };

struct Trajectory {
  std::vector<double> times;
  Eigen::MatrixXcd states;  // N x times

  spectral::SpectralState at(int k) const { return spectral::SpectralState(states.col(k)); }
  spectral::SpectralState front() const { return at(0); }
  spectral::SpectralState back() const { return at(static_cast<int>(times.size()) - 1); }
};

// Duhamel solution of (i d/dt + Delta) u = source. Backward starts from the
// data at t_end and integrates to t_start; Forward starts at t_start. On
// uniform grids the source is interpolated piecewise linearly (trapezoid) or
// quadratically over step pairs (Simpson) and integrated exactly against the
// phases; on Gauss-Legendre grids each panel uses its nodes. The trajectory
// is reported at step, step-pair or panel boundaries respectively.
Trajectory solve_inhomogeneous(const spectral::EigenBasis& basis, const ControlSignal& source,
                               const spectral::SpectralState& boundary, Direction direction);

// Trajectory CSV: comment line with the grid, then `t,mode_index,re,im`.
void write_trajectory(std::ostream& os, const Trajectory& traj, const TimeGrid& grid);

}  // namespace sclab::evolve
