#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sclab/evolve.hpp"
#include "sclab/spectral.hpp"
#include "sclab/surface.hpp"

namespace sclab::observability {

using evolve::Evolution;

// m_jk = <w e_k, e_j>_mass. Real symmetric since modes are real.
Eigen::MatrixXd overlap_matrix(const spectral::EigenBasis& basis,
                               const surface::ControlRegion& region);

enum class Assembly { ClosedForm, Quadrature };

// Hermitian G with <G phi, phi> = int_0^T ||(W) exp(-i omega t) phi||^2_Omega dt.
struct ObservabilityGramian {
  Eigen::MatrixXcd G;
  double T = 0.0;
  std::string region;
  std::optional<std::string> window;
  Eigen::VectorXd window_weights;  // ones when unwindowed
  Evolution kind = Evolution::Schrodinger;
  Assembly method = Assembly::ClosedForm;
  int N = 0;
  double lambda_N = 0.0;
  int mesh_level = 0;

  int size() const { return static_cast<int>(G.rows()); }
  double norm() const;            // spectral norm (largest eigenvalue)
  double hermitian_defect() const;  // max |G_jk - conj(G_kj)|
};

ObservabilityGramian gramian(const spectral::EigenBasis& basis,
                             const surface::ControlRegion& region, double T,
                             const spectral::SpectralFilter* window = nullptr,
                             Evolution kind = Evolution::Schrodinger,
                             Assembly method = Assembly::ClosedForm,
                             const evolve::TimeGrid* grid = nullptr);

// Direct time quadrature of int_0^T ||exp(-i omega t) phi||^2_Omega dt from
// vertex fields; independent of the Gramian assembly.
double observed_energy(const spectral::EigenBasis& basis, const surface::ControlRegion& region,
                       const spectral::SpectralState& phi, const evolve::TimeGrid& grid,
                       Evolution kind = Evolution::Schrodinger);

inline constexpr double kNotObservableRatio = 1e-12;

struct ObservabilityResult {
  double K = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  Eigen::VectorXcd certificate;  // unit-norm minimizing eigenvector
  bool not_observable = false;
  double condition() const { return lambda_max / lambda_min; }
};

// Hermitian eigensolve of a Gramian, optionally restricted to index subset.
ObservabilityResult observability_constant(const ObservabilityGramian& G);
ObservabilityResult observability_constant(const Eigen::MatrixXcd& G);

struct WindowedConstant {
  int k = 0;
  int modes = 0;  // retained modes in the window support
  double K = 0.0;
  double lambda_min = 0.0;
  bool not_observable = false;
};

// K_k = 1/lambda_min of the Gramian restricted to ran phi_k(-Delta), i.e. to
// the modes where phi_k does not vanish; k = 0 means phi_0.
std::vector<WindowedConstant> windowed_constants(const spectral::EigenBasis& basis,
                                                 const surface::ControlRegion& region, double T,
                                                 int k_lo, int k_hi);

// Restricts G to the given indices.
Eigen::MatrixXcd restrict(const Eigen::MatrixXcd& G, const std::vector<int>& indices);

// Probe sets are reproducible from a seed. Random states use Gaussian
// coefficients; packets are Gaussian coefficients on one dyadic window.
enum class ProbeKind { Random, DyadicPacket, Certificate };
struct Probe {
  ProbeKind kind;
  int tag = -1;  // dyadic index for packets
  spectral::SpectralState state;
};
std::string to_string(ProbeKind kind);

std::vector<Probe> standard_probes(const spectral::EigenBasis& basis,
                                   const ObservabilityGramian& G, int n_random,
                                   std::uint64_t seed);

struct ErrorObservation {
  double C_star = 0.0;        // max over probes
  int argmax = -1;
  ProbeKind argmax_kind = ProbeKind::Random;
  double C_sup = 0.0;         // 1 / lambda_min(G + diag((1+lambda)^-4)), sup over all states
  std::vector<double> ratios;  // per probe
};

// C* = max ||u||^2 / (<G u,u> + ||u||^2_{H^-4}) over the probes.
ErrorObservation check_observe_with_error(const spectral::EigenBasis& basis,
                                          const ObservabilityGramian& G,
                                          const std::vector<Probe>& probes);

// Diagonal of the overlap matrix and its minimum. Within a degenerate
// eigenspace the diagonal depends on the chosen basis, so the minimum of the
// overlap over each spectral cluster (consecutive relative gaps at most
// cluster_gap) is reported as well; it bounds the mass of every
// eigenfunction combination in the cluster. A negative gap keeps every mode
// in its own cluster.
struct EigenfunctionMass {
  double min = 0.0;
  int argmin = 0;
  Eigen::VectorXd diag;
  double eigenspace_min = 0.0;
  int eigenspace_argmin = 0;  // first mode of the worst cluster
  int eigenspace_size = 0;
};
EigenfunctionMass eigenfunction_mass(const spectral::EigenBasis& basis,
                                     const surface::ControlRegion& region,
                                     double cluster_gap = 1e-2);

struct QuasimodeCheck {
  double worst = 0.0;
  int argmax = -1;
  int on_shell = 0;  // modes in the on-shell band
  std::vector<double> ratios;
};

// R(u) = ||u|| / (||u||_Omega + (log(1/h)/h) ||(-h^2 Delta - tau) u||), with
// ||u||_Omega^2 = <m u, u>. Probes: Gaussian coefficients on the on-shell band
// |h^2 lambda_j - tau| <= tau/4, plus 10% of the norm from off-shell modes.
// UnresolvedScale when 1/h^2 exceeds 0.8 * lambda_N or the band is empty.
QuasimodeCheck quasimode_estimate_check(const spectral::EigenBasis& basis,
                                        const surface::ControlRegion& region, double h,
                                        double tau, int n_probes, std::uint64_t seed);
double quasimode_ratio(const spectral::EigenBasis& basis, const Eigen::MatrixXd& overlap,
                       double h, double tau, const spectral::SpectralState& u);

struct WaveConstant {
  double h = 0.0;
  double C_horizon = 0.0;
  double T = 0.0;  // C_horizon * log(1/h)
  int modes = 0;
  double K = 0.0;  // T / lambda_min on the window
  double lambda_min = 0.0;
  bool not_observable = false;
};

WaveConstant wave_windowed_constant(const spectral::EigenBasis& basis,
                                    const surface::ControlRegion& region, double h,
                                    double C_horizon);

// Results: CSV `quantity,surface,region,T,N,h_or_k,value,certificate_norm`.
struct ResultRow {
  std::string quantity, surface, region;
  double T = 0.0;
  int N = 0;
  std::string h_or_k;
  double value = 0.0;
  double certificate_norm = 0.0;
};
void write_results_header(std::ostream& os);
void write_result(std::ostream& os, const ResultRow& row);

}  // namespace sclab::observability
