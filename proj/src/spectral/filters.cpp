#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "sclab/errors.hpp"
#include "sclab/spectral.hpp"

namespace sclab::spectral {

namespace profiles {

double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / t);
  const double b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

double beta(double r) {
  if (r <= 1.0) return 1.0;
  if (r >= 2.0) return 0.0;
  return 1.0 - smooth_step(std::log2(r));
}

double phi(double r) { return std::sqrt(std::max(0.0, beta(r) - beta(2.0 * r))); }

double phi0(double r) { return std::sqrt(beta(r)); }

double chi(double r) { return phi(r); }

}  // namespace profiles

double FilterSpec::support_upper() const {
  switch (kind) {
    case Kind::Chi:
      return 2.0 / (h * h);
    case Kind::Phi:
      return std::ldexp(1.0, k + 1);
    case Kind::Phi0:
      return 2.0;
    case Kind::WaveChi:
      return 4.0 / (h * h);
  }
  return 0.0;
}

std::string FilterSpec::describe() const {
  std::ostringstream os;
  os.precision(6);
  switch (kind) {
    case Kind::Chi:
      os << "chi(-h^2 Delta), h=" << h;
      break;
    case Kind::Phi:
      os << "phi_k(-Delta), k=" << k;
      break;
    case Kind::Phi0:
      os << "phi_0(-Delta)";
      break;
    case Kind::WaveChi:
      os << "chi(h sqrt(-Delta)), h=" << h;
      break;
  }
  return os.str();
}

SpectralState SpectralFilter::apply(const SpectralState& state) const {
  if (state.size() != weights.size())
    throw ShapeMismatch("filter has " + std::to_string(weights.size()) +
                        " weights, state has " + std::to_string(state.size()));
  return SpectralState(weights.cast<std::complex<double>>().cwiseProduct(state.coeffs));
}

std::vector<int> SpectralFilter::support() const {
  std::vector<int> idx;
  for (int j = 0; j < weights.size(); ++j)
    if (weights(j) > 0.0) idx.push_back(j);
  return idx;
}

SpectralFilter make_filter(const EigenBasis& basis, const FilterSpec& spec) {
  SpectralFilter f;
  f.description = spec.describe();
  f.support_upper = spec.support_upper();
  f.weights.resize(basis.size());
  for (int j = 0; j < basis.size(); ++j) {
    const double l = std::max(0.0, basis.lambdas(j));
    switch (spec.kind) {
      case FilterSpec::Kind::Chi:
        f.weights(j) = profiles::chi(spec.h * spec.h * l);
        break;
      case FilterSpec::Kind::Phi:
        f.weights(j) = profiles::phi(std::ldexp(l, -spec.k));
        break;
      case FilterSpec::Kind::Phi0:
        f.weights(j) = profiles::phi0(l);
        break;
      case FilterSpec::Kind::WaveChi:
        f.weights(j) = profiles::chi(spec.h * std::sqrt(l));
        break;
    }
  }
  return f;
}

void check_spillover(const EigenBasis& basis, const SpectralFilter& filter) {
  const double limit = kSpilloverFraction * basis.lambda_max();
  if (filter.support_upper > limit) {
    std::ostringstream os;
    os << filter.description << " reaches lambda=" << filter.support_upper
       << " but the basis only resolves up to " << kSpilloverFraction
       << "*lambda_N=" << limit << " (N=" << basis.size() << ")";
    throw SpilloverGuard(os.str());
  }
}

double dyadic_partition_check(const EigenBasis& basis, int k_max) {
  double worst = 0.0;
  for (int j = 0; j < basis.size(); ++j) {
    const double l = std::max(0.0, basis.lambdas(j));
    double sum = profiles::beta(l);
    for (int k = 1; k <= k_max; ++k) {
      const double p = profiles::phi(std::ldexp(l, -k));
      sum += p * p;
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

double sobolev_norm(const EigenBasis& basis, const SpectralState& state, double s) {
  if (state.size() != basis.size()) throw ShapeMismatch("state/basis size mismatch");
  double sum = 0.0;
  for (int j = 0; j < basis.size(); ++j)
    sum += std::pow(1.0 + std::max(0.0, basis.lambdas(j)), s) * std::norm(state.coeffs(j));
  return std::sqrt(sum);
}

double dyadic_h4_sum(const EigenBasis& basis, const SpectralState& state, int k_max) {
  if (state.size() != basis.size()) throw ShapeMismatch("state/basis size mismatch");
  double total = 0.0;
  for (int k = 0; k <= k_max; ++k) {
    const SpectralFilter f =
        make_filter(basis, k == 0 ? FilterSpec::phi0() : FilterSpec::phi(k));
    total += std::ldexp(f.apply(state).coeffs.squaredNorm(), -4 * k);
  }
  return total;
}

EigenBasis perturb_basis(const EigenBasis& basis, const Eigen::VectorXd& potential) {
  if (potential.size() != basis.num_dofs())
    throw ShapeMismatch("potential must have one value per vertex");
  if (!potential.allFinite()) throw ShapeMismatch("potential must be finite");
  const int n = basis.size();
  const Eigen::MatrixXd mv =
      basis.modes.transpose() * basis.mass.cwiseProduct(potential).asDiagonal() * basis.modes;
  Eigen::MatrixXd h = mv;
  h.diagonal() += basis.lambdas;
  h = 0.5 * (h + h.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  Eigen::VectorXd lam = es.eigenvalues();
  Eigen::MatrixXd c = es.eigenvectors();

  // Inside a degenerate cluster, rotate to align with the parent modes that
  // carry the cluster, so commuting perturbations leave the modes unchanged.
  for (int s = 0; s < n;) {
    int e = s + 1;
    while (e < n && std::abs(lam(e) - lam(s)) <= 1e-6 * std::max(std::abs(lam(e)), 1e-300)) ++e;
    const int m = e - s;
    auto block = c.middleCols(s, m);
    std::vector<int> rows(n);
    for (int i = 0; i < n; ++i) rows[i] = i;
    std::stable_sort(rows.begin(), rows.end(), [&](int a, int b) {
      return block.row(a).squaredNorm() > block.row(b).squaredNorm();
    });
    rows.resize(m);
    std::sort(rows.begin(), rows.end());
    Eigen::MatrixXd p(m, m);
    for (int i = 0; i < m; ++i) p.row(i) = block.row(rows[i]);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(p, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::MatrixXd q = svd.matrixV() * svd.matrixU().transpose();
    block = Eigen::MatrixXd(block * q);
    s = e;
  }

  EigenBasis out = basis;
  out.lambdas = lam;
  out.modes = basis.modes * c;
  out.change_of_basis = basis.change_of_basis * c;
  out.residuals = c.cwiseAbs().transpose() * basis.residuals;
  out.label = "perturbed";
  return out;
}

void write_filter(std::ostream& os, const SpectralFilter& filter) {
  const auto old = os.precision(17);
  for (int j = 0; j < filter.weights.size(); ++j) os << j << ' ' << filter.weights(j) << '\n';
  os.precision(old);
}

}  // namespace sclab::spectral
