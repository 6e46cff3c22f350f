#include <cmath>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "json.hpp"
#include "sclab/errors.hpp"
#include "sclab/hum.hpp"

namespace sclab::hum {

using cd = std::complex<double>;
using spectral::EigenBasis;
using spectral::SpectralState;

ControlSignal apply_S(const EigenBasis& basis, const surface::ControlRegion& region,
                      const SpectralState& u0, const TimeGrid& grid) {
  if (u0.size() != basis.size()) throw ShapeMismatch("state/basis size mismatch");
  if (region.size() != basis.num_dofs()) throw ShapeMismatch("region/basis size mismatch");
  evolve::check_resolution(grid, basis.lambda_max());
  Eigen::MatrixXcd phases(basis.size(), grid.size());
  for (int n = 0; n < grid.size(); ++n)
    for (int j = 0; j < basis.size(); ++j)
      phases(j, n) = u0.coeffs(j) * std::polar(1.0, -basis.lambdas(j) * grid.nodes[n]);
  const Eigen::MatrixXcd g = basis.modes.cast<cd>() * phases;
  return ControlSignal::from_unweighted(grid, region, basis.mass, g);
}

SpectralState apply_R(const EigenBasis& basis, const ControlSignal& g) {
  return evolve::solve_inhomogeneous(basis, g, SpectralState::zero(basis.size()),
                                     evolve::Direction::Backward)
      .front();
}

double duality_check(const EigenBasis& basis, const surface::ControlRegion& region,
                     const ControlSignal& g, const SpectralState& u0) {
  const double scale = std::sqrt(g.norm_sq) * u0.norm();
  if (scale == 0.0) return 0.0;
  const SpectralState Rg = apply_R(basis, g);
  const cd lhs = u0.coeffs.dot(Rg.coeffs);  // <Rg, u0> = sum Rg conj(u0)
  const ControlSignal Su0 = apply_S(basis, region, u0, g.grid);
  const cd rhs = cd(0.0, 1.0) * g.inner(Su0);
  return std::abs(lhs - rhs) / scale;
}

Synthesis synthesize_control(const EigenBasis& basis, const surface::ControlRegion& region,
                             const SpectralState& u0, double T, double epsilon,
                             const TimeGrid* grid) {
  if (!(epsilon >= 0.0)) throw ShapeMismatch("epsilon must be nonnegative");
  if (u0.size() != basis.size()) throw ShapeMismatch("state/basis size mismatch");
  const auto G = observability::gramian(basis, region, T);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (G.G + G.G.adjoint()));
  if (es.info() != Eigen::Success) throw ConvergenceFailure("Hermitian eigensolve of the Gramian failed");
  const Eigen::VectorXd ev = es.eigenvalues();
  SynthesisDiagnostics d;
  d.epsilon = epsilon;
  d.lambda_min = ev(0);
  d.lambda_max = ev(ev.size() - 1);
  d.K = d.lambda_min > 0.0 ? 1.0 / d.lambda_min : std::numeric_limits<double>::infinity();
  d.condition = d.lambda_min > 0.0 ? d.lambda_max / d.lambda_min
                                   : std::numeric_limits<double>::infinity();
  d.not_observable = !(d.lambda_min >= observability::kNotObservableRatio * d.lambda_max);
  d.ill_conditioned = epsilon == 0.0 && d.condition > kIllConditioned;
  if (!(ev(0) + epsilon > 0.0)) {
    std::ostringstream os;
    os << "G + eps I is not positive (lambda_min = " << ev(0) << "); use epsilon > 0";
    throw ConvergenceFailure(os.str());
  }
  const Eigen::VectorXcd phi =
      es.eigenvectors() *
      ((es.eigenvectors().adjoint() * u0.coeffs).array() / (ev.array() + epsilon)).matrix();

  const TimeGrid g = grid ? *grid
                          : TimeGrid::for_rate(0.0, T, basis.lambda_max(),
                                               TimeGrid::Rule::GaussLegendre);
  if (std::abs(g.t_start) > 0.0 || std::abs(g.t_end - T) > 1e-12 * T)
    throw ShapeMismatch("synthesis grid must span [0, T]");
  Synthesis s{apply_S(basis, region, SpectralState(phi), g) * cd(0.0, -1.0), SpectralState(phi), d};
  s.diagnostics.norm_f_sq = s.f.norm_sq;
  s.diagnostics.u0_dot_phi = phi.dot(u0.coeffs);
  const double u0n = u0.norm();
  s.diagnostics.bound_ok = s.f.norm_sq <= d.K * u0n * u0n * (1.0 + 1e-8);
  if (u0n > 0.0) {
    const Eigen::VectorXcd target = G.G * phi;
    s.diagnostics.replay_discrepancy = (apply_R(basis, s.f).coeffs - target).norm() / u0n;
  }
  return s;
}

Verification verify_control(const EigenBasis& basis, const SpectralState& u0,
                            const ControlSignal& f, const EigenBasis* fine_basis) {
  Verification v;
  const double u0n = u0.norm();
  v.u_T = evolve::solve_inhomogeneous(basis, f, u0, evolve::Direction::Forward).back();
  v.residual_T = u0n > 0.0 ? v.u_T.norm() / u0n : v.u_T.norm();
  if (fine_basis) {
    if (fine_basis->num_dofs() != basis.num_dofs())
      throw ShapeMismatch("fine basis must live on the same mesh");
    const SpectralState u0f = spectral::project(*fine_basis, spectral::synthesize(basis, u0));
    const SpectralState uT =
        evolve::solve_inhomogeneous(*fine_basis, f, u0f, evolve::Direction::Forward).back();
    v.spillover_residual = u0n > 0.0 ? uT.norm() / u0n : uT.norm();
  }
  return v;
}

void write_control(std::ostream& os, const ControlSignal& f) {
  const auto old = os.precision(17);
  os << "t,vertex_index,re,im\n";
  for (int n = 0; n < f.grid.size(); ++n)
    for (int v = 0; v < f.field.rows(); ++v) {
      if (f.region_weights[v] <= 0.0) continue;
      const cd z = f.field(v, n);
      os << f.grid.nodes[n] << ',' << v << ',' << z.real() << ',' << z.imag() << '\n';
    }
  os.precision(old);
}

void write_diagnostics(std::ostream& os, const SynthesisDiagnostics& d, const Verification& v,
                       std::uint64_t seed) {
  nlohmann::json j;
  j["norm_f_sq"] = d.norm_f_sq;
  j["K"] = d.K;
  j["lambda_min"] = d.lambda_min;
  j["residual_T"] = v.residual_T;
  j["spillover_residual"] =
      v.spillover_residual ? nlohmann::json(*v.spillover_residual) : nlohmann::json(nullptr);
  j["epsilon"] = d.epsilon;
  j["seed"] = seed;
  j["condition"] = d.condition;
  j["ill_conditioned"] = d.ill_conditioned;
  j["not_observable"] = d.not_observable;
  j["bound_ok"] = d.bound_ok;
  j["replay_discrepancy"] = d.replay_discrepancy;
  os << j.dump(2) << '\n';
}

}  // namespace sclab::hum
