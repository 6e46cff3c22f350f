#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <tuple>

#include "sclab/errors.hpp"
#include "sclab/spectral.hpp"

namespace sclab::spectral {

double EigenBasis::orthonormality_defect() const {
  const Eigen::MatrixXd gram = modes.transpose() * mass.asDiagonal() * modes;
  return (gram - Eigen::MatrixXd::Identity(size(), size())).cwiseAbs().maxCoeff();
}

EigenBasis EigenBasis::truncated(int n) const {
  EigenBasis out = *this;
  out.lambdas = lambdas.head(n);
  out.modes = modes.leftCols(n);
  out.residuals = residuals.head(n);
  out.change_of_basis = change_of_basis.topLeftCorner(change_of_basis.rows(), n);
  return out;
}

SpectralState SpectralState::mode(int n, int j) {
  SpectralState s = zero(n);
  s.coeffs(j) = 1.0;
  return s;
}

Eigen::VectorXcd synthesize(const EigenBasis& basis, const SpectralState& state) {
  if (state.size() != basis.size())
    throw ShapeMismatch("state has " + std::to_string(state.size()) +
                        " coefficients, basis has " + std::to_string(basis.size()));
  return basis.modes.cast<std::complex<double>>() * state.coeffs;
}

SpectralState project(const EigenBasis& basis, const Eigen::VectorXcd& field) {
  if (field.size() != basis.num_dofs())
    throw ShapeMismatch("field size does not match basis vertex count");
  const Eigen::VectorXcd weighted = basis.mass.cast<std::complex<double>>().cwiseProduct(field);
  return SpectralState(basis.modes.transpose().cast<std::complex<double>>() * weighted);
}

FourierBasis torus_fourier_basis(const surface::SurfaceMesh& mesh, int n_modes) {
  if (mesh.kind != surface::SurfaceKind::Torus)
    throw ShapeMismatch("Fourier basis requires a torus mesh");
  const int nv = mesh.num_dofs();
  if (n_modes < 2) throw TooManyModes("need at least 2 modes");
  if (n_modes * 10 > nv) {
    throw TooManyModes("requested " + std::to_string(n_modes) +
                       " modes but the mesh has only " + std::to_string(nv) +
                       " vertices (limit nv/10)");
  }
  const int n = mesh.level;
  const double L = mesh.side_length;
  const Operators ops = assemble(mesh);

  // Candidate wave vectors, by continuum |p|^2, well past n_modes.
  const int half = (n - 1) / 2;  // excludes the Nyquist line
  struct Candidate {
    TorusModeLabel label;
    int p2;
  };
  std::vector<Candidate> cands;
  for (int px = -half; px <= half; ++px) {
    for (int py = -half; py <= half; ++py) {
      if (px < 0 || (px == 0 && py < 0)) continue;
      const int p2 = px * px + py * py;
      cands.push_back({{px, py, false}, p2});
      if (p2 > 0) cands.push_back({{px, py, true}, p2});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.p2, a.label.px, a.label.py, a.label.sine) <
           std::tie(b.p2, b.label.px, b.label.py, b.label.sine);
  });
  const std::size_t pool = std::min(cands.size(), static_cast<std::size_t>(2 * n_modes + 16));
  // Extend the pool to a complete |p|^2 shell.
  std::size_t take = pool;
  while (take < cands.size() && cands[take].p2 == cands[take - 1].p2) ++take;
  if (take < static_cast<std::size_t>(n_modes))
    throw TooManyModes("grid too coarse for the requested Fourier modes");

  struct Mode {
    TorusModeLabel label;
    double lambda;
    Eigen::VectorXd vec;
  };
  std::vector<Mode> modes;
  for (std::size_t c = 0; c < take; ++c) {
    const auto& lab = cands[c].label;
    Eigen::VectorXd v(nv);
    for (int d = 0; d < nv; ++d) {
      const Eigen::Vector2d& x = mesh.vertices[mesh.representative[d]];
      const double phase = 2.0 * std::numbers::pi * (lab.px * x.x() + lab.py * x.y()) / L;
      v(d) = lab.sine ? std::sin(phase) : std::cos(phase);
    }
    v /= std::sqrt(v.dot(ops.mass.cwiseProduct(v)));
    const double lambda = v.dot(ops.stiffness * v);
    modes.push_back({lab, lambda, std::move(v)});
  }
  std::stable_sort(modes.begin(), modes.end(),
                   [](const Mode& a, const Mode& b) { return a.lambda < b.lambda; });
  // Exact ties come out of the symbol with rounding noise; order clusters by
  // label so the basis is reproducible.
  for (std::size_t s = 0; s < modes.size();) {
    std::size_t e = s + 1;
    while (e < modes.size() &&
           modes[e].lambda - modes[s].lambda <= 1e-10 * std::max(1.0, modes[s].lambda))
      ++e;
    std::sort(modes.begin() + s, modes.begin() + e, [](const Mode& a, const Mode& b) {
      return std::tie(a.label.px, a.label.py, a.label.sine) <
             std::tie(b.label.px, b.label.py, b.label.sine);
    });
    s = e;
  }

  FourierBasis out;
  EigenBasis& basis = out.basis;
  basis.lambdas.resize(n_modes);
  basis.modes.resize(nv, n_modes);
  basis.residuals.resize(n_modes);
  basis.mass = ops.mass;
  for (int j = 0; j < n_modes; ++j) {
    basis.lambdas(j) = modes[j].lambda;
    basis.modes.col(j) = modes[j].vec;
    basis.residuals(j) = (ops.stiffness * modes[j].vec -
                          modes[j].lambda * ops.mass.cwiseProduct(modes[j].vec))
                             .norm();
    out.labels.push_back(modes[j].label);
  }
  basis.lambdas(0) = std::abs(basis.lambdas(0)) < 1e-12 ? 0.0 : basis.lambdas(0);
  basis.change_of_basis = Eigen::MatrixXd::Identity(n_modes, n_modes);
  basis.surface_kind = mesh.kind;
  basis.mesh_level = mesh.level;
  basis.area = mesh.area;
  basis.label = "torus-fourier";
  return out;
}

double weyl_ratio(const EigenBasis& basis) {
  const double top = basis.lambda_max();
  const long count = std::count_if(basis.lambdas.begin(), basis.lambdas.end(),
                                   [top](double l) { return l <= top; });
  return static_cast<double>(count) * 4.0 * std::numbers::pi / (basis.area * top);
}

void write_basis(std::ostream& os, const EigenBasis& basis) {
  const auto old = os.precision(17);
  os << basis.size() << ' ' << basis.num_dofs() << '\n';
  for (int j = 0; j < basis.size(); ++j) {
    os << basis.lambdas(j) << ' ' << basis.residuals(j) << '\n';
    for (int d = 0; d < basis.num_dofs(); ++d) os << basis.modes(d, j) << '\n';
  }
  os.precision(old);
}

EigenBasis read_basis(std::istream& is, const Eigen::VectorXd& mass) {
  int n_modes = 0, nv = 0;
  if (!(is >> n_modes >> nv) || n_modes <= 0 || nv <= 0)
    throw IoError("basis file: malformed header");
  if (nv != mass.size())
    throw ShapeMismatch("basis file has " + std::to_string(nv) +
                        " vertices, mesh has " + std::to_string(mass.size()));
  EigenBasis basis;
  basis.lambdas.resize(n_modes);
  basis.residuals.resize(n_modes);
  basis.modes.resize(nv, n_modes);
  basis.mass = mass;
  for (int j = 0; j < n_modes; ++j) {
    if (!(is >> basis.lambdas(j) >> basis.residuals(j)))
      throw IoError("basis file: truncated at mode " + std::to_string(j));
    for (int d = 0; d < nv; ++d)
      if (!(is >> basis.modes(d, j)))
        throw IoError("basis file: truncated at mode " + std::to_string(j));
  }
  basis.change_of_basis = Eigen::MatrixXd::Identity(n_modes, n_modes);
  basis.label = "file";
  return basis;
}

}  // namespace sclab::spectral
