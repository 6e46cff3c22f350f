#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "sclab/surface.hpp"

namespace sclab::spectral {

using SparseMatrix = Eigen::SparseMatrix<double>;

// Discrete -Laplace-Beltrami on the quotient mesh. The Dirichlet energy is
// conformally invariant in 2D, so the stiffness uses Euclidean chart
// geometry; the metric factor enters only through the mass. The mass is
// lumped (diagonal), which makes multiplication by region weights an exact
// diagonal operation in the discrete L^2 pairing.
struct Operators {
  SparseMatrix stiffness;
  Eigen::VectorXd mass;
};

Operators assemble(const surface::SurfaceMesh& mesh);

// Sorted eigenpairs of (stiffness, mass), mass-orthonormal.
struct EigenBasis {
  Eigen::VectorXd lambdas;
  Eigen::MatrixXd modes;  // num_dofs x N
  Eigen::VectorXd mass;   // lumped mass per quotient vertex
  Eigen::VectorXd residuals;
  // Coordinates of each mode in the parent Laplace basis; identity unless the
  // basis came from perturb_basis.
  Eigen::MatrixXd change_of_basis;

  surface::SurfaceKind surface_kind = surface::SurfaceKind::Torus;
  int mesh_level = 0;
  double area = 0.0;
  std::string label = "laplace";

  int size() const { return static_cast<int>(lambdas.size()); }
  int num_dofs() const { return static_cast<int>(modes.rows()); }
  double lambda_max() const { return lambdas(lambdas.size() - 1); }

  // max |<e_j, e_k>_mass - delta_jk|.
  double orthonormality_defect() const;
  // Retain the first n modes.
  EigenBasis truncated(int n) const;
};

struct SpectralState {
  Eigen::VectorXcd coeffs;

  SpectralState() = default;
  explicit SpectralState(Eigen::VectorXcd c) : coeffs(std::move(c)) {}
  static SpectralState zero(int n) { return SpectralState(Eigen::VectorXcd::Zero(n)); }
  static SpectralState mode(int n, int j);

  int size() const { return static_cast<int>(coeffs.size()); }
  // L^2(M) norm, by Plancherel in the orthonormal basis.
  double norm() const { return coeffs.norm(); }
};

// Field on quotient vertices represented by a state.
Eigen::VectorXcd synthesize(const EigenBasis& basis, const SpectralState& state);
// Mass projection of a vertex field onto the retained modes.
SpectralState project(const EigenBasis& basis, const Eigen::VectorXcd& field);

enum class SolverMethod { Auto, Dense, ShiftInvert };

struct EigensolveOptions {
  SolverMethod method = SolverMethod::Auto;
  double tolerance = 1e-9;  // relative residual
  int block_size = 12;
  int max_restarts = 40;
  std::uint64_t seed = 0x5eed;
  int dense_limit = 2000;  // Auto switches to dense at or below this size
};

EigenBasis eigensolve(const surface::SurfaceMesh& mesh, int n_modes,
                      const EigensolveOptions& options = {});
EigenBasis eigensolve(const Operators& ops, int n_modes,
                      const EigensolveOptions& options = {});

// Exact discrete eigenbasis of a uniform torus grid: sampled real Fourier
// modes, which diagonalize the translation-invariant stiffness and mass.
struct TorusModeLabel {
  int px = 0, py = 0;  // wave vector
  bool sine = false;   // cos or sin member of the +-p pair
};

struct FourierBasis {
  EigenBasis basis;
  std::vector<TorusModeLabel> labels;
};

FourierBasis torus_fourier_basis(const surface::SurfaceMesh& mesh, int n_modes);

// Number of modes with lambda <= lambda_max, divided by the Weyl prediction
// area * lambda_max / (4 pi).
double weyl_ratio(const EigenBasis& basis);

// Reference bump profiles. smooth_step is the exp(-1/t) transition, beta is
// 1 on [0,1], 0 on [2,inf) and 1 - smooth_step(log2 r) between. Then
//   phi0(r)^2 = beta(r),  phi(r)^2 = beta(r) - beta(2r),
// so phi0(r)^2 + sum_{k>=1} phi(2^-k r)^2 telescopes to 1 exactly;
// phi is supported in (1/2, 2) and phi0 in [0, 2).
namespace profiles {
double smooth_step(double t);
double beta(double r);
double phi(double r);
double phi0(double r);
// chi = phi: the same window serves as the semiclassical cutoff.
double chi(double r);
}  // namespace profiles

struct FilterSpec {
  enum class Kind { Chi, Phi, Phi0, WaveChi };
  Kind kind = Kind::Phi0;
  double h = 0.0;  // Chi, WaveChi
  int k = 0;       // Phi

  static FilterSpec chi(double h) { return {Kind::Chi, h, 0}; }
  static FilterSpec phi(int k) { return {Kind::Phi, 0.0, k}; }
  static FilterSpec phi0() { return {Kind::Phi0, 0.0, 0}; }
  static FilterSpec wave_chi(double h) { return {Kind::WaveChi, h, 0}; }

  // Upper end of the support in lambda.
  double support_upper() const;
  std::string describe() const;
};

struct SpectralFilter {
  Eigen::VectorXd weights;
  std::string description;
  double support_upper = 0.0;

  SpectralState apply(const SpectralState& state) const;
  // Indices with nonzero weight.
  std::vector<int> support() const;
};

SpectralFilter make_filter(const EigenBasis& basis, const FilterSpec& spec);

// Fraction of lambda_N above which filters are refused.
inline constexpr double kSpilloverFraction = 0.8;
void check_spillover(const EigenBasis& basis, const SpectralFilter& filter);

// max_j |phi0(l_j)^2 + sum_{k=1}^{k_max} phi_k(l_j)^2 - 1|.
double dyadic_partition_check(const EigenBasis& basis, int k_max);

// (sum_j (1 + lambda_j)^s |u_j|^2)^{1/2}.
double sobolev_norm(const EigenBasis& basis, const SpectralState& state, double s);

// sum_{k>=0} 2^{-4k} ||phi_k(-Delta) u||^2, windows up to k_max.
double dyadic_h4_sum(const EigenBasis& basis, const SpectralState& state, int k_max);

// Galerkin eigenbasis of -Delta + V within the retained modes. V is sampled
// on quotient vertices.
EigenBasis perturb_basis(const EigenBasis& basis, const Eigen::VectorXd& potential);

// Text export: header `N nv`, then per mode a line `lambda residual` followed
// by nv coefficient lines.
void write_basis(std::ostream& os, const EigenBasis& basis);
// Reads modes, eigenvalues and residuals; the lumped mass comes from the
// caller, usually from assemble() on the same mesh.
EigenBasis read_basis(std::istream& is, const Eigen::VectorXd& mass);
void write_filter(std::ostream& os, const SpectralFilter& filter);

}  // namespace sclab::spectral
