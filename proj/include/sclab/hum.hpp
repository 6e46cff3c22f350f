#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>

#include <Eigen/Core>

#include "sclab/evolve.hpp"
#include "sclab/observability.hpp"
#include "sclab/spectral.hpp"
#include "sclab/surface.hpp"

namespace sclab::hum {

using evolve::ControlSignal;
using evolve::TimeGrid;

// S u0 = exp(it Delta) u0 sampled on the grid and multiplied by the region
// weights. AliasedGrid when the grid does not resolve lambda_N.
ControlSignal apply_S(const spectral::EigenBasis& basis, const surface::ControlRegion& region,
                      const spectral::SpectralState& u0, const TimeGrid& grid);

// R g = u(0) for (i d/dt + Delta) u = g 1_Omega with u(T) = 0.
spectral::SpectralState apply_R(const spectral::EigenBasis& basis, const ControlSignal& g);

// |<Rg, u0> - i <g, S u0>| / (|g| |u0|); zero when either vanishes.
double duality_check(const spectral::EigenBasis& basis, const surface::ControlRegion& region,
                     const ControlSignal& g, const spectral::SpectralState& u0);

inline constexpr double kIllConditioned = 1e12;

struct SynthesisDiagnostics {
  double norm_f_sq = 0.0;
  std::complex<double> u0_dot_phi;  // <u0, phi>, equals |f|^2 up to quadrature
  double lambda_min = 0.0, lambda_max = 0.0;
  double K = 0.0;  // 1 / lambda_min
  double condition = 0.0;
  double epsilon = 0.0;
  bool ill_conditioned = false;  // condition > 1e12 with epsilon = 0
  bool not_observable = false;
  bool bound_ok = false;            // |f|^2 <= K |u0|^2
  double replay_discrepancy = 0.0;  // |R f - G phi| / |u0|, quadrature replay vs closed form
};

struct Synthesis {
  ControlSignal f;
  spectral::SpectralState phi;
  SynthesisDiagnostics diagnostics;
};

// Solves (G + eps I) phi = u0 with the closed-form Gramian and returns
// f = -i S phi on a Gauss-Legendre grid (default: 4 rad per panel at the
// fastest phase). Throws ConvergenceFailure if G + eps I is not positive.
Synthesis synthesize_control(const spectral::EigenBasis& basis,
                             const surface::ControlRegion& region,
                             const spectral::SpectralState& u0, double T, double epsilon = 0.0,
                             const TimeGrid* grid = nullptr);

struct Verification {
  double residual_T = 0.0;  // |u(T)| / |u0|
  std::optional<double> spillover_residual;  // same on a finer basis of the same mesh
  spectral::SpectralState u_T;
};

// Forward solve from u0 with source f 1_Omega. With a finer basis the initial
// field and the control are projected onto it and the residual recomputed.
Verification verify_control(const spectral::EigenBasis& basis, const spectral::SpectralState& u0,
                            const ControlSignal& f,
                            const spectral::EigenBasis* fine_basis = nullptr);

// Control CSV `t,vertex_index,re,im` over support vertices, weighted field.
void write_control(std::ostream& os, const ControlSignal& f);
// JSON {norm_f_sq, K, lambda_min, residual_T, spillover_residual, epsilon, seed}.
void write_diagnostics(std::ostream& os, const SynthesisDiagnostics& d, const Verification& v,
                       std::uint64_t seed);

}  // namespace sclab::hum
