#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "sclab/errors.hpp"
#include "sclab/observability.hpp"

namespace sclab::observability {

using cd = std::complex<double>;
using spectral::EigenBasis;
using spectral::SpectralFilter;
using spectral::SpectralState;

namespace {

Eigen::VectorXd rates(const EigenBasis& basis, Evolution kind) {
  Eigen::VectorXd w(basis.size());
  for (int j = 0; j < basis.size(); ++j) w(j) = evolve::phase_rate(kind, basis.lambdas(j));
  return w;
}

SpectralState gaussian_state(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXcd c(n);
  for (int j = 0; j < n; ++j) c(j) = cd(g(rng), g(rng));
  return SpectralState(c);
}

}  // namespace

Eigen::MatrixXd overlap_matrix(const EigenBasis& basis, const surface::ControlRegion& region) {
  if (region.size() != basis.num_dofs())
    throw ShapeMismatch("region and basis have different vertex counts");
  Eigen::VectorXd lw(region.size());
  for (int v = 0; v < region.size(); ++v) lw(v) = basis.mass(v) * region.weights[v];
  Eigen::MatrixXd m = basis.modes.transpose() * lw.asDiagonal() * basis.modes;
  return 0.5 * (m + m.transpose());
}

double ObservabilityGramian::norm() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double ObservabilityGramian::hermitian_defect() const {
  return (G - G.adjoint()).cwiseAbs().maxCoeff();
}

ObservabilityGramian gramian(const EigenBasis& basis, const surface::ControlRegion& region,
                             double T, const SpectralFilter* window, Evolution kind,
                             Assembly method, const evolve::TimeGrid* grid) {
  if (!(T > 0.0)) throw ShapeMismatch("observation time T must be positive");
  const int n = basis.size();
  ObservabilityGramian out;
  out.T = T;
  out.region = region.descriptor.describe();
  out.kind = kind;
  out.method = method;
  out.N = n;
  out.lambda_N = basis.lambda_max();
  out.mesh_level = basis.mesh_level;
  out.window_weights = Eigen::VectorXd::Ones(n);
  if (window) {
    spectral::check_spillover(basis, *window);
    if (window->weights.size() != n) throw ShapeMismatch("window/basis size mismatch");
    out.window = window->description;
    out.window_weights = window->weights;
  }
  const Eigen::MatrixXd m = overlap_matrix(basis, region);
  const Eigen::VectorXd omega = rates(basis, kind);
  const Eigen::VectorXd& ww = out.window_weights;
  out.G.resize(n, n);
  if (method == Assembly::ClosedForm) {
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        out.G(j, k) = ww(j) * ww(k) * m(j, k) * evolve::phase_integral(omega(j) - omega(k), T);
  } else {
    const double spread = omega.maxCoeff() - omega.minCoeff();
    const evolve::TimeGrid g =
        grid ? *grid
             : evolve::TimeGrid::for_rate(0.0, T, spread, evolve::TimeGrid::Rule::GaussLegendre);
    if (std::abs(g.t_start) > 0.0 || std::abs(g.t_end - T) > 1e-12 * T)
      throw ShapeMismatch("quadrature grid must span [0, T]");
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
    Eigen::VectorXcd v(n);
    for (int q = 0; q < g.size(); ++q) {
      for (int j = 0; j < n; ++j) v(j) = std::polar(ww(j), omega(j) * g.nodes[q]);
      acc.noalias() += g.weights[q] * (v * v.adjoint());
    }
    out.G = acc.cwiseProduct(m.cast<cd>());
  }
  return out;
}

double observed_energy(const EigenBasis& basis, const surface::ControlRegion& region,
                       const SpectralState& phi, const evolve::TimeGrid& grid, Evolution kind) {
  Eigen::VectorXd lw(region.size());
  for (int v = 0; v < region.size(); ++v) lw(v) = basis.mass(v) * region.weights[v];
  double total = 0.0;
  for (int q = 0; q < grid.size(); ++q) {
    const SpectralState u = evolve::propagate(kind, basis, phi, grid.nodes[q]);
    const Eigen::VectorXcd field = spectral::synthesize(basis, u);
    total += grid.weights[q] * lw.dot(field.cwiseAbs2());
  }
  return total;
}

ObservabilityResult observability_constant(const Eigen::MatrixXcd& G) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (G + G.adjoint()));
  if (es.info() != Eigen::Success) throw ConvergenceFailure("Hermitian eigensolve of the Gramian failed");
  ObservabilityResult r;
  r.lambda_min = es.eigenvalues()(0);
  r.lambda_max = es.eigenvalues()(G.rows() - 1);
  r.certificate = es.eigenvectors().col(0);
  r.not_observable = !(r.lambda_min >= kNotObservableRatio * std::abs(r.lambda_max));
  r.K = r.lambda_min > 0.0 ? 1.0 / r.lambda_min : std::numeric_limits<double>::infinity();
  return r;
}

ObservabilityResult observability_constant(const ObservabilityGramian& G) {
  return observability_constant(G.G);
}

Eigen::MatrixXcd restrict(const Eigen::MatrixXcd& G, const std::vector<int>& idx) {
  const int n = static_cast<int>(idx.size());
  Eigen::MatrixXcd r(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) r(a, b) = G(idx[a], idx[b]);
  return r;
}

std::vector<WindowedConstant> windowed_constants(const EigenBasis& basis,
                                                 const surface::ControlRegion& region, double T,
                                                 int k_lo, int k_hi) {
  std::vector<SpectralFilter> filters;
  for (int k = k_lo; k <= k_hi; ++k) {
    const auto spec = k == 0 ? spectral::FilterSpec::phi0() : spectral::FilterSpec::phi(k);
    filters.push_back(spectral::make_filter(basis, spec));
    spectral::check_spillover(basis, filters.back());
  }
  const ObservabilityGramian G = gramian(basis, region, T);
  std::vector<WindowedConstant> out;
  for (int k = k_lo; k <= k_hi; ++k) {
    const auto support = filters[k - k_lo].support();
    WindowedConstant w;
    w.k = k;
    w.modes = static_cast<int>(support.size());
    if (!support.empty()) {
      const auto r = observability_constant(restrict(G.G, support));
      w.K = r.K;
      w.lambda_min = r.lambda_min;
      w.not_observable = r.not_observable;
    }
    out.push_back(w);
  }
  return out;
}

std::string to_string(ProbeKind kind) {
  switch (kind) {
    case ProbeKind::Random:
      return "random";
    case ProbeKind::DyadicPacket:
      return "dyadic";
    case ProbeKind::Certificate:
      return "certificate";
  }
  return "?";
}

namespace {
Eigen::VectorXd h4_weights(const EigenBasis& basis) {
  Eigen::VectorXd d(basis.size());
  for (int j = 0; j < basis.size(); ++j)
    d(j) = std::pow(1.0 + std::max(0.0, basis.lambdas(j)), -4.0);
  return d;
}
}  // namespace

std::vector<Probe> standard_probes(const EigenBasis& basis, const ObservabilityGramian& G,
                                   int n_random, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Probe> probes;
  const int n = basis.size();
  for (int i = 0; i < n_random; ++i) probes.push_back({ProbeKind::Random, -1, gaussian_state(n, rng)});
  const int k_max = static_cast<int>(std::ceil(std::log2(std::max(2.0, basis.lambda_max()))));
  for (int k = 0; k <= k_max; ++k) {
    const auto f = spectral::make_filter(
        basis, k == 0 ? spectral::FilterSpec::phi0() : spectral::FilterSpec::phi(k));
    if (f.support().empty()) continue;
    probes.push_back({ProbeKind::DyadicPacket, k, f.apply(gaussian_state(n, rng))});
  }
  probes.push_back({ProbeKind::Certificate, 0, SpectralState(observability_constant(G).certificate)});
  Eigen::MatrixXcd with_error = G.G;
  with_error.diagonal() += h4_weights(basis).cast<cd>();
  probes.push_back(
      {ProbeKind::Certificate, 1, SpectralState(observability_constant(with_error).certificate)});
  return probes;
}

ErrorObservation check_observe_with_error(const EigenBasis& basis, const ObservabilityGramian& G,
                                          const std::vector<Probe>& probes) {
  if (G.size() != basis.size()) throw ShapeMismatch("Gramian/basis size mismatch");
  const Eigen::VectorXd d = h4_weights(basis);
  ErrorObservation out;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const Eigen::VectorXcd& u = probes[p].state.coeffs;
    const double num = u.squaredNorm();
    const double den = (u.adjoint() * G.G * u)(0).real() + d.dot(u.cwiseAbs2());
    const double r = num > 0.0 ? num / den : 0.0;
    out.ratios.push_back(r);
    if (r > out.C_star) {
      out.C_star = r;
      out.argmax = static_cast<int>(p);
      out.argmax_kind = probes[p].kind;
    }
  }
  Eigen::MatrixXcd with_error = G.G;
  with_error.diagonal() += d.cast<cd>();
  out.C_sup = observability_constant(with_error).K;
  return out;
}

EigenfunctionMass eigenfunction_mass(const EigenBasis& basis, const surface::ControlRegion& region,
                                     double cluster_gap) {
  const Eigen::MatrixXd m = overlap_matrix(basis, region);
  EigenfunctionMass out;
  out.diag = m.diagonal();
  out.min = out.diag.minCoeff(&out.argmin);
  out.eigenspace_min = std::numeric_limits<double>::infinity();
  const int n = basis.size();
  for (int j = 0; j < n;) {
    int e = j + 1;
    while (e < n && basis.lambdas(e) - basis.lambdas(e - 1) <= cluster_gap * std::abs(basis.lambdas(e))) ++e;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.block(j, j, e - j, e - j), Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) < out.eigenspace_min) {
      out.eigenspace_min = es.eigenvalues()(0);
      out.eigenspace_argmin = j;
      out.eigenspace_size = e - j;
    }
    j = e;
  }
  return out;
}

double quasimode_ratio(const EigenBasis& basis, const Eigen::MatrixXd& overlap, double h,
                       double tau, const SpectralState& u) {
  const double norm = u.norm();
  const double omega_sq = (u.coeffs.adjoint() * overlap.cast<cd>() * u.coeffs)(0).real();
  double res = 0.0;
  for (int j = 0; j < basis.size(); ++j)
    res += std::pow(h * h * basis.lambdas(j) - tau, 2) * std::norm(u.coeffs(j));
  return norm / (std::sqrt(std::max(0.0, omega_sq)) + std::log(1.0 / h) / h * std::sqrt(res));
}

QuasimodeCheck quasimode_estimate_check(const EigenBasis& basis,
                                        const surface::ControlRegion& region, double h,
                                        double tau, int n_probes, std::uint64_t seed) {
  if (!(h > 0.0 && h < 1.0)) throw UnresolvedScale("h must lie in (0, 1)");
  if (1.0 / (h * h) > spectral::kSpilloverFraction * basis.lambda_max()) {
    std::ostringstream os;
    os << "1/h^2 = " << 1.0 / (h * h) << " exceeds 0.8*lambda_N = "
       << spectral::kSpilloverFraction * basis.lambda_max();
    throw UnresolvedScale(os.str());
  }
  std::vector<int> on, off;
  for (int j = 0; j < basis.size(); ++j)
    (std::abs(h * h * basis.lambdas(j) - tau) <= 0.25 * tau ? on : off).push_back(j);
  if (on.empty()) throw UnresolvedScale("no retained mode with h^2 lambda near tau");
  const Eigen::MatrixXd m = overlap_matrix(basis, region);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  QuasimodeCheck out;
  out.on_shell = static_cast<int>(on.size());
  for (int p = 0; p < n_probes; ++p) {
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(basis.size());
    for (int j : on) c(j) = cd(g(rng), g(rng));
    c /= c.norm();
    if (!off.empty()) {
      Eigen::VectorXcd e = Eigen::VectorXcd::Zero(basis.size());
      for (int j : off) e(j) = cd(g(rng), g(rng));
      c += 0.1 * e / e.norm();
    }
    const double r = quasimode_ratio(basis, m, h, tau, SpectralState(c));
    out.ratios.push_back(r);
    if (r > out.worst) {
      out.worst = r;
      out.argmax = p;
    }
  }
  return out;
}

WaveConstant wave_windowed_constant(const EigenBasis& basis, const surface::ControlRegion& region,
                                    double h, double C_horizon) {
  if (!(h > 0.0 && h < 1.0)) throw UnresolvedScale("h must lie in (0, 1)");
  if (!(C_horizon > 0.0)) throw ShapeMismatch("C_horizon must be positive");
  const auto filter = spectral::make_filter(basis, spectral::FilterSpec::wave_chi(h));
  spectral::check_spillover(basis, filter);
  WaveConstant w;
  w.h = h;
  w.C_horizon = C_horizon;
  w.T = C_horizon * std::log(1.0 / h);
  const auto support = filter.support();
  w.modes = static_cast<int>(support.size());
  if (support.empty()) throw UnresolvedScale("wave window contains no retained mode");
  const ObservabilityGramian G = gramian(basis, region, w.T, nullptr, Evolution::HalfWave);
  const auto r = observability_constant(restrict(G.G, support));
  w.lambda_min = r.lambda_min;
  w.not_observable = r.not_observable;
  w.K = w.T * r.K;
  return w;
}

void write_results_header(std::ostream& os) {
  os << "quantity,surface,region,T,N,h_or_k,value,certificate_norm\n";
}

void write_result(std::ostream& os, const ResultRow& row) {
  const auto old = os.precision(17);
  os << row.quantity << ',' << row.surface << ',' << '"' << row.region << '"' << ',' << row.T
     << ',' << row.N << ',' << row.h_or_k << ',' << row.value << ',' << row.certificate_norm
     << '\n';
  os.precision(old);
}

}  // namespace sclab::observability
