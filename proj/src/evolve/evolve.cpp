#include <array>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "sclab/errors.hpp"
#include "sclab/evolve.hpp"

namespace sclab::evolve {

using cd = std::complex<double>;
using spectral::EigenBasis;
using spectral::SpectralState;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr cd kI{0.0, 1.0};

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
void legendre_rule(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

// M_k(z) = int_0^1 tau^k exp(z tau) dtau, k = 0, 1, 2.
std::array<cd, 3> moments(cd z) {
  std::array<cd, 3> m{};
  if (std::abs(z) < 1.0) {
    cd term = 1.0;  // z^p / p!
    for (int p = 0; p < 40; ++p) {
      for (int k = 0; k < 3; ++k) m[k] += term / double(p + k + 1);
      term *= z / double(p + 1);
      if (std::abs(term) < 1e-18) break;
    }
    return m;
  }
  const cd ez = std::exp(z);
  m[0] = (ez - 1.0) / z;
  m[1] = (ez - m[0]) / z;
  m[2] = (ez - 2.0 * m[1]) / z;
  return m;
}

// Weights c_k = int_0^1 exp(z tau) l_k(tau) dtau for the Lagrange basis of
// the interpolant: linear on {0,1} or quadratic on {0,1/2,1}.
std::array<cd, 3> interpolant_weights(cd z, bool quadratic) {
  const auto m = moments(z);
  if (!quadratic) return {m[0] - m[1], m[1], 0.0};
  return {2.0 * m[2] - 3.0 * m[1] + m[0], -4.0 * m[2] + 4.0 * m[1], 2.0 * m[2] - m[1]};
}

}  // namespace

std::string to_string(Evolution kind) {
  return kind == Evolution::Schrodinger ? "schrodinger" : "halfwave";
}

double phase_rate(Evolution kind, double lambda) {
  if (kind == Evolution::Schrodinger) return lambda;
  return -std::sqrt(std::max(0.0, lambda));
}

std::string to_string(TimeGrid::Rule rule) {
  switch (rule) {
    case TimeGrid::Rule::Trapezoid:
      return "trapezoid";
    case TimeGrid::Rule::Simpson:
      return "simpson";
    case TimeGrid::Rule::GaussLegendre:
      return "gauss-legendre";
  }
  return "?";
}

TimeGrid TimeGrid::trapezoid(double t0, double t1, int n_steps) {
  if (!(t1 > t0) || n_steps < 1) throw ShapeMismatch("time grid needs t1 > t0 and n_steps >= 1");
  TimeGrid g;
  g.rule = Rule::Trapezoid;
  g.t_start = t0;
  g.t_end = t1;
  g.n_steps = n_steps;
  const double h = (t1 - t0) / n_steps;
  for (int k = 0; k <= n_steps; ++k) {
    g.nodes.push_back(k == n_steps ? t1 : t0 + k * h);
    g.weights.push_back((k == 0 || k == n_steps) ? 0.5 * h : h);
  }
  return g;
}

TimeGrid TimeGrid::simpson(double t0, double t1, int n_steps) {
  if (n_steps % 2) ++n_steps;
  TimeGrid g = trapezoid(t0, t1, n_steps);
  g.rule = Rule::Simpson;
  const double h = (t1 - t0) / n_steps;
  for (int k = 0; k <= n_steps; ++k) {
    const double c = (k == 0 || k == n_steps) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    g.weights[k] = c * h / 3.0;
  }
  return g;
}

TimeGrid TimeGrid::gauss_legendre(double t0, double t1, int panels, int order) {
  if (!(t1 > t0) || panels < 1 || order < 1)
    throw ShapeMismatch("Gauss-Legendre grid needs t1 > t0, panels >= 1, order >= 1");
  TimeGrid g;
  g.rule = Rule::GaussLegendre;
  g.t_start = t0;
  g.t_end = t1;
  g.n_steps = panels;
  g.order = order;
  std::vector<double> x, w;
  legendre_rule(order, x, w);
  const double H = (t1 - t0) / panels;
  for (int p = 0; p < panels; ++p) {
    const double a = t0 + p * H;
    for (int q = 0; q < order; ++q) {
      g.nodes.push_back(a + 0.5 * H * (x[q] + 1.0));
      g.weights.push_back(0.5 * H * w[q]);
    }
  }
  return g;
}

TimeGrid TimeGrid::for_rate(double t0, double t1, double max_rate, Rule rule) {
  const double span = (t1 - t0) * std::max(max_rate, 1e-300);
  if (rule == Rule::GaussLegendre)
    return gauss_legendre(t0, t1, std::max(1, static_cast<int>(std::ceil(span / 4.0))));
  const int n = std::max(2, static_cast<int>(std::ceil(span / (kPi / 8.0))));
  return rule == Rule::Simpson ? simpson(t0, t1, n) : trapezoid(t0, t1, n);
}

std::string TimeGrid::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "rule=" << to_string(rule) << " t_start=" << t_start << " t_end=" << t_end
     << " n_steps=" << n_steps;
  if (rule == Rule::GaussLegendre) os << " order=" << order;
  return os.str();
}

void check_resolution(const TimeGrid& grid, double max_rate) {
  const double per_step = std::abs(max_rate) * grid.step();
  const double limit = grid.uniform() ? kPi : static_cast<double>(grid.order);
  if (per_step > limit) {
    std::ostringstream os;
    os << "fastest phase rate " << max_rate << " advances " << per_step
       << " rad per step of " << grid.describe() << " (limit " << limit << ")";
    throw AliasedGrid(os.str());
  }
}

SpectralState propagate(Evolution kind, const EigenBasis& basis, const SpectralState& state,
                        double t) {
  if (state.size() != basis.size()) throw ShapeMismatch("state/basis size mismatch");
  SpectralState out = state;
  for (int j = 0; j < state.size(); ++j)
    out.coeffs(j) *= std::polar(1.0, -phase_rate(kind, basis.lambdas(j)) * t);
  return out;
}

SpectralState schrodinger_propagate(const EigenBasis& basis, const SpectralState& state,
                                    double t) {
  return propagate(Evolution::Schrodinger, basis, state, t);
}

SpectralState halfwave_propagate(const EigenBasis& basis, const SpectralState& state,
                                 double t) {
  return propagate(Evolution::HalfWave, basis, state, t);
}

cd phase_integral(double theta, double T) {
  if (std::abs(theta) <= 1e-9 * std::max(1.0, 1.0 / T))
    return T * (1.0 + kI * (T * theta / 2.0) - T * T * theta * theta / 6.0);
  // (exp(i T theta) - 1) / (i theta) without cancellation.
  const double half = 0.5 * T * theta;
  return (2.0 * std::sin(half) / theta) * std::polar(1.0, half);
}

double UniformSeries::l2_norm() const {
  double s = 0.0;
  for (int k = 0; k < size(); ++k) {
    const double w = (k == 0 || k == size() - 1) ? 0.5 : 1.0;
    s += w * std::norm(values(k));
  }
  return std::sqrt(s * step);
}

UniformSeries semiclassical_fourier_on(const UniformSeries& samples, double h, bool adjoint,
                                       double out_start, double out_step, int out_count) {
  if (!(h > 0.0)) throw ShapeMismatch("semiclassical parameter h must be positive");
  const int n = samples.size();
  const double sign = adjoint ? 1.0 : -1.0;
  UniformSeries out;
  out.start = out_start;
  out.step = out_step;
  out.values = Eigen::VectorXcd::Zero(out_count);
  for (int m = 0; m < out_count; ++m) {
    const double tau = out_start + m * out_step;
    cd acc = 0.0;
    for (int k = 0; k < n; ++k) {
      const double w = (k == 0 || k == n - 1) ? 0.5 : 1.0;
      acc += w * std::polar(1.0, sign * samples.at(k) * tau / h) * samples.values(k);
    }
    out.values(m) = acc * samples.step;
  }
  return out;
}

UniformSeries semiclassical_fourier(const UniformSeries& samples, double h, bool adjoint,
                                    std::optional<double> tau_max,
                                    std::optional<int> out_count) {
  if (!(h > 0.0)) throw ShapeMismatch("semiclassical parameter h must be positive");
  const double nyquist = kPi * h / samples.step;
  if (tau_max && *tau_max > nyquist) {
    std::ostringstream os;
    os << "requested |tau| <= " << *tau_max << " exceeds the Nyquist bound h*pi/dt = "
       << nyquist;
    throw AliasedGrid(os.str());
  }
  const int m = out_count.value_or(samples.size());
  const double dtau = 2.0 * kPi * h / (m * samples.step);
  return semiclassical_fourier_on(samples, h, adjoint, -(m / 2) * dtau, dtau, m);
}

ControlSignal ControlSignal::from_unweighted(const TimeGrid& grid,
                                             const surface::ControlRegion& region,
                                             const Eigen::VectorXd& mass,
                                             const Eigen::MatrixXcd& g) {
  if (g.rows() != region.size() || g.cols() != grid.size() || mass.size() != region.size())
    throw ShapeMismatch("control field shape does not match region and grid");
  ControlSignal s;
  s.grid = grid;
  s.region_weights = region.weights;
  s.mass = mass;
  s.field = g;
  for (int v = 0; v < region.size(); ++v) s.field.row(v) *= region.weights[v];
  s.norm_sq = s.recompute_norm_sq();
  return s;
}

ControlSignal ControlSignal::zero(const TimeGrid& grid, const surface::ControlRegion& region,
                                  const Eigen::VectorXd& mass) {
  return from_unweighted(grid, region, mass,
                         Eigen::MatrixXcd::Zero(region.size(), grid.size()));
}

double ControlSignal::recompute_norm_sq() const {
  double s = 0.0;
  for (int v = 0; v < field.rows(); ++v) {
    const double w = region_weights[v];
    if (w <= 0.0) continue;
    double row = 0.0;
    for (int n = 0; n < field.cols(); ++n) row += grid.weights[n] * std::norm(field(v, n));
    s += mass(v) * row / w;
  }
  return s;
}

cd ControlSignal::inner(const ControlSignal& other) const {
  if (other.field.rows() != field.rows() || other.field.cols() != field.cols())
    throw ShapeMismatch("control signals live on different grids");
  cd s = 0.0;
  for (int v = 0; v < field.rows(); ++v) {
    const double w = region_weights[v];
    if (w <= 0.0) continue;
    cd row = 0.0;
    for (int n = 0; n < field.cols(); ++n)
      row += grid.weights[n] * field(v, n) * std::conj(other.field(v, n));
    s += mass(v) * row / w;
  }
  return s;
}

double ControlSignal::off_support_max() const {
  double m = 0.0;
  for (int v = 0; v < field.rows(); ++v)
    if (region_weights[v] <= 0.0) m = std::max(m, field.row(v).cwiseAbs().maxCoeff());
  return m;
}

Eigen::MatrixXcd ControlSignal::unweighted() const {
  Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(field.rows(), field.cols());
  for (int v = 0; v < field.rows(); ++v)
    if (region_weights[v] > 0.0) g.row(v) = field.row(v) / region_weights[v];
  return g;
}

ControlSignal ControlSignal::operator+(const ControlSignal& o) const {
  if (o.field.rows() != field.rows() || o.field.cols() != field.cols())
    throw ShapeMismatch("control signals live on different grids");
  ControlSignal s = *this;
  s.field += o.field;
  s.norm_sq = s.recompute_norm_sq();
  return s;
}

ControlSignal ControlSignal::operator*(cd a) const {
  ControlSignal s = *this;
  s.field *= a;
  s.norm_sq = std::norm(a) * norm_sq;
  return s;
}

Eigen::MatrixXcd forcing_coefficients(const EigenBasis& basis, const ControlSignal& source) {
  if (source.field.rows() != basis.num_dofs())
    throw ShapeMismatch("control field and basis have different vertex counts");
  const Eigen::MatrixXcd weighted = basis.mass.cast<cd>().asDiagonal() * source.field;
  return basis.modes.transpose().cast<cd>() * weighted;
}

Trajectory solve_inhomogeneous(const EigenBasis& basis, const ControlSignal& source,
                               const SpectralState& boundary, Direction direction) {
  if (boundary.size() != basis.size()) throw ShapeMismatch("state/basis size mismatch");
  const TimeGrid& grid = source.grid;
  const Eigen::MatrixXcd F = forcing_coefficients(basis, source);
  const int n_modes = basis.size();

  // Segments [a, b] with the node indices feeding each one.
  struct Segment {
    double a, b;
    int first, count;
  };
  std::vector<Segment> segs;
  switch (grid.rule) {
    case TimeGrid::Rule::Trapezoid:
      for (int k = 0; k < grid.n_steps; ++k) segs.push_back({grid.nodes[k], grid.nodes[k + 1], k, 2});
      break;
    case TimeGrid::Rule::Simpson:
      for (int k = 0; k < grid.n_steps; k += 2)
        segs.push_back({grid.nodes[k], grid.nodes[k + 2], k, 3});
      break;
    case TimeGrid::Rule::GaussLegendre: {
      const double H = grid.step();
      for (int p = 0; p < grid.n_steps; ++p)
        segs.push_back({grid.t_start + p * H, p + 1 == grid.n_steps ? grid.t_end : grid.t_start + (p + 1) * H,
                        p * grid.order, grid.order});
      break;
    }
  }
  const int ns = static_cast<int>(segs.size());

  Trajectory traj;
  traj.times.resize(ns + 1);
  traj.times[0] = segs.front().a;
  for (int s = 0; s < ns; ++s) traj.times[s + 1] = segs[s].b;
  traj.states.resize(n_modes, ns + 1);

  for (int j = 0; j < n_modes; ++j) {
    const double lam = basis.lambdas(j);
    // Per segment: z-weighted source integral  J = int_a^b exp(i lam (s-a)) F(s) ds.
    auto segment_integral = [&](const Segment& sg) -> cd {
      const double H = sg.b - sg.a;
      if (grid.rule == TimeGrid::Rule::GaussLegendre) {
        cd acc = 0.0;
        for (int q = 0; q < sg.count; ++q) {
          const int n = sg.first + q;
          acc += grid.weights[n] * std::polar(1.0, lam * (grid.nodes[n] - sg.a)) * F(j, n);
        }
        return acc;
      }
      const auto c = interpolant_weights(kI * (lam * H), sg.count == 3);
      cd acc = 0.0;
      for (int q = 0; q < sg.count; ++q) acc += c[q] * F(j, sg.first + q);
      return H * acc;
    };
    if (direction == Direction::Backward) {
      cd u = boundary.coeffs(j);
      traj.states(j, ns) = u;
      for (int s = ns - 1; s >= 0; --s) {
        const double H = segs[s].b - segs[s].a;
        u = std::polar(1.0, lam * H) * u + kI * segment_integral(segs[s]);
        traj.states(j, s) = u;
      }
    } else {
      cd u = boundary.coeffs(j);
      traj.states(j, 0) = u;
      for (int s = 0; s < ns; ++s) {
        const double H = segs[s].b - segs[s].a;
        u = std::polar(1.0, -lam * H) * (u - kI * segment_integral(segs[s]));
        traj.states(j, s + 1) = u;
      }
    }
  }
  return traj;
}

void write_trajectory(std::ostream& os, const Trajectory& traj, const TimeGrid& grid) {
  const auto old = os.precision(17);
  os << "# " << grid.describe() << '\n';
  os << "t,mode_index,re,im\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    for (int j = 0; j < traj.states.rows(); ++j)
      os << traj.times[k] << ',' << j << ',' << traj.states(j, k).real() << ','
         << traj.states(j, k).imag() << '\n';
  os.precision(old);
}

}  // namespace sclab::evolve
