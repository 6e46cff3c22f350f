#include "sclab/surface.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <set>

#include "../quadrature.hpp"
#include "sclab/errors.hpp"

namespace sclab::surface {

using cplx = std::complex<double>;

std::string to_string(SurfaceKind kind) {
  return kind == SurfaceKind::Torus ? "torus" : "bolza";
}

double metric_factor(SurfaceKind kind, const Eigen::Vector2d& z) {
  if (kind == SurfaceKind::Torus) return 1.0;
  const double s = 1.0 - z.squaredNorm();
  return 4.0 / (s * s);
}

int SurfaceMesh::euler_characteristic() const {
  std::set<std::pair<int, int>> edges;
  for (const auto& t : triangles) {
    for (int e = 0; e < 3; ++e) {
      int a = t[e], b = t[(e + 1) % 3];
      edges.emplace(std::min(a, b), std::max(a, b));
    }
  }
  const long n_edges = static_cast<long>(edges.size()) -
                       static_cast<long>(edge_gluing.size());
  return static_cast<int>(num_dofs() - n_edges + num_triangles());
}

std::vector<std::pair<int, int>> SurfaceMesh::identifications() const {
  std::vector<std::pair<int, int>> out;
  for (int v = 0; v < num_vertices(); ++v) {
    const int rep = representative[dof[v]];
    if (rep != v) out.emplace_back(v, rep);
  }
  return out;
}

double triangle_area(const SurfaceMesh& mesh, int t) {
  const auto& tri = mesh.triangles[t];
  const Eigen::Vector2d& p0 = mesh.vertices[tri[0]];
  const Eigen::Vector2d& p1 = mesh.vertices[tri[1]];
  const Eigen::Vector2d& p2 = mesh.vertices[tri[2]];
  const Eigen::Vector2d e1 = p1 - p0, e2 = p2 - p0;
  const double chart = 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
  if (mesh.kind == SurfaceKind::Torus) return chart;
  double acc = 0.0;
  for (const auto& q : detail::triangle_rule()) {
    const Eigen::Vector2d z = q.bary[0] * p0 + q.bary[1] * p1 + q.bary[2] * p2;
    acc += q.weight * metric_factor(mesh.kind, z);
  }
  return chart * acc;
}

std::vector<double> dof_areas(const SurfaceMesh& mesh) {
  std::vector<double> out(mesh.num_dofs(), 0.0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Eigen::Vector2d& p0 = mesh.vertices[tri[0]];
    const Eigen::Vector2d& p1 = mesh.vertices[tri[1]];
    const Eigen::Vector2d& p2 = mesh.vertices[tri[2]];
    const Eigen::Vector2d e1 = p1 - p0, e2 = p2 - p0;
    const double chart = 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
    for (const auto& q : detail::triangle_rule()) {
      const Eigen::Vector2d z =
          q.bary[0] * p0 + q.bary[1] * p1 + q.bary[2] * p2;
      const double rho = metric_factor(mesh.kind, z);
      for (int a = 0; a < 3; ++a)
        out[mesh.dof[tri[a]]] += chart * q.weight * rho * q.bary[a];
    }
  }
  return out;
}

namespace {

// Union-find over chart vertices; representative = smallest index.
class Gluing {
 public:
  explicit Gluing(int n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int v) {
    while (parent_[v] != v) v = parent_[v] = parent_[parent_[v]];
    return v;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<int> parent_;
};

void finalize_dofs(SurfaceMesh& mesh, Gluing& gluing) {
  const int nv = mesh.num_vertices();
  mesh.dof.assign(nv, -1);
  mesh.representative.clear();
  for (int v = 0; v < nv; ++v) {
    const int root = gluing.find(v);
    if (root == v) {
      mesh.dof[v] = static_cast<int>(mesh.representative.size());
      mesh.representative.push_back(v);
    }
  }
  for (int v = 0; v < nv; ++v) mesh.dof[v] = mesh.dof[gluing.find(v)];
}

void check_triangles(const SurfaceMesh& mesh) {
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Eigen::Vector2d e1 = mesh.vertices[tri[1]] - mesh.vertices[tri[0]];
    const Eigen::Vector2d e2 = mesh.vertices[tri[2]] - mesh.vertices[tri[0]];
    const double chart = 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
    if (!(chart > 1e-300)) {
      throw DegenerateTriangle("triangle " + std::to_string(t) +
                               " has chart area " + std::to_string(chart));
    }
  }
}

}  // namespace

SurfaceMesh build_torus(int n, double side_length) {
  if (n < 4) {
    throw InvalidResolution("torus grid needs n >= 4, got " +
                            std::to_string(n));
  }
  if (!(side_length > 0.0)) {
    throw InvalidResolution("torus side length must be positive");
  }
  SurfaceMesh mesh;
  mesh.kind = SurfaceKind::Torus;
  mesh.side_length = side_length;
  mesh.level = n;
  const double h = side_length / n;
  const auto idx = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) mesh.vertices.emplace_back(i * h, j * h);
  mesh.conformal_weight.assign(mesh.vertices.size(), 1.0);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      mesh.triangles.push_back({idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)});
      mesh.triangles.push_back({idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)});
    }
  }
  Gluing gluing(mesh.num_vertices());
  for (int k = 0; k <= n; ++k) {
    gluing.unite(idx(n, k), idx(0, k));
    gluing.unite(idx(k, n), idx(k, 0));
  }
  for (int k = 0; k < n; ++k) {
    mesh.edge_gluing.push_back({idx(n, k), idx(n, k + 1), idx(0, k), idx(0, k + 1)});
    mesh.edge_gluing.push_back({idx(k, n), idx(k + 1, n), idx(k, 0), idx(k + 1, 0)});
  }
  finalize_dofs(mesh, gluing);
  check_triangles(mesh);
  mesh.area = side_length * side_length;
  return mesh;
}

namespace bolza {

double corner_radius() { return std::pow(2.0, -0.25); }

namespace {
// cosh of the inradius of the regular octagon with interior angle pi/4.
double cosh_inradius() { return 1.0 / std::tan(std::numbers::pi / 8); }
}  // namespace

double midpoint_radius() { return std::tanh(0.5 * std::acosh(cosh_inradius())); }

cplx corner(int k) {
  const double angle = std::numbers::pi / 8 + k * std::numbers::pi / 4;
  return std::polar(corner_radius(), angle);
}

Mobius Mobius::operator*(const Mobius& o) const {
  return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c,
          c * o.b + d * o.d};
}

Mobius Mobius::inverse() const { return {d, -b, -c, a}; }

Mobius side_pairing(int s) {
  if (s >= 4) return side_pairing(s - 4).inverse();
  // Translation by twice the inradius along the axis at angle s*pi/4.
  const double r = std::acosh(cosh_inradius());
  const double ch = std::cosh(r), sh = std::sinh(r);
  const cplx rot = std::polar(1.0, s * std::numbers::pi / 4);
  return {ch, sh * rot, sh * std::conj(rot), ch};
}

const std::vector<Mobius>& short_words() {
  static const std::vector<Mobius> words = [] {
    std::vector<Mobius> out{Mobius{}};
    for (int s = 0; s < 8; ++s) out.push_back(side_pairing(s));
    for (int s = 0; s < 8; ++s)
      for (int t = 0; t < 8; ++t)
        if ((s + 4) % 8 != t) out.push_back(side_pairing(s) * side_pairing(t));
    return out;
  }();
  return words;
}

double disk_distance(cplx z, cplx w) {
  const double num = 2.0 * std::norm(z - w);
  const double den = (1.0 - std::norm(z)) * (1.0 - std::norm(w));
  return std::acosh(1.0 + num / den);
}

}  // namespace bolza

namespace {

Eigen::Vector2d to_vec(cplx z) { return {z.real(), z.imag()}; }
cplx to_cplx(const Eigen::Vector2d& v) { return {v.x(), v.y()}; }

// Hyperbolic midpoint via the hyperboloid model.
cplx hyperbolic_midpoint(cplx a, cplx b) {
  const auto lift = [](cplx z) {
    const double s = 1.0 - std::norm(z);
    return std::array<double, 3>{(1.0 + std::norm(z)) / s, 2.0 * z.real() / s,
                                 2.0 * z.imag() / s};
  };
  const auto pa = lift(a), pb = lift(b);
  std::array<double, 3> m{pa[0] + pb[0], pa[1] + pb[1], pa[2] + pb[2]};
  const double q = std::sqrt(m[0] * m[0] - m[1] * m[1] - m[2] * m[2]);
  for (double& x : m) x /= q;
  return {m[1] / (1.0 + m[0]), m[2] / (1.0 + m[0])};
}

}  // namespace

SurfaceMesh build_bolza(int refine) {
  if (refine < 0) throw InvalidResolution("refine must be >= 0");
  SurfaceMesh mesh;
  mesh.kind = SurfaceKind::Bolza;
  mesh.level = refine;

  // side_mask bit s: vertex lies on side s, the side between corners s-1, s.
  std::vector<unsigned> side_mask;
  mesh.vertices.emplace_back(0.0, 0.0);
  side_mask.push_back(0u);
  for (int k = 0; k < 8; ++k) {
    mesh.vertices.push_back(to_vec(bolza::corner(k)));
    side_mask.push_back((1u << k) | (1u << ((k + 1) % 8)));
  }
  for (int k = 0; k < 8; ++k) mesh.triangles.push_back({0, 1 + k, 1 + (k + 1) % 8});

  for (int level = 0; level < refine; ++level) {
    std::map<std::pair<int, int>, int> midpoints;
    const auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      const cplx m = hyperbolic_midpoint(to_cplx(mesh.vertices[a]),
                                         to_cplx(mesh.vertices[b]));
      const int id = mesh.num_vertices();
      mesh.vertices.push_back(to_vec(m));
      side_mask.push_back(side_mask[a] & side_mask[b]);
      midpoints.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(mesh.triangles.size() * 4);
    for (const auto& t : mesh.triangles) {
      const int m01 = midpoint(t[0], t[1]);
      const int m12 = midpoint(t[1], t[2]);
      const int m20 = midpoint(t[2], t[0]);
      next.push_back({t[0], m01, m20});
      next.push_back({m01, t[1], m12});
      next.push_back({m20, m12, t[2]});
      next.push_back({m01, m12, m20});
    }
    mesh.triangles = std::move(next);
  }

  mesh.conformal_weight.resize(mesh.vertices.size());
  for (int v = 0; v < mesh.num_vertices(); ++v)
    mesh.conformal_weight[v] = metric_factor(mesh.kind, mesh.vertices[v]);

  // Glue side s+4 onto side s.
  Gluing gluing(mesh.num_vertices());
  std::vector<int> partner_of(mesh.num_vertices());
  for (int s = 0; s < 4; ++s) {
    const bolza::Mobius g = bolza::side_pairing(s);
    std::vector<int> target;
    for (int v = 0; v < mesh.num_vertices(); ++v)
      if (side_mask[v] & (1u << s)) target.push_back(v);
    std::fill(partner_of.begin(), partner_of.end(), -1);
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      if (!(side_mask[v] & (1u << (s + 4)))) continue;
      const cplx image = g(to_cplx(mesh.vertices[v]));
      int best = -1;
      double best_dist = 1e-8;
      for (int u : target) {
        const double d = std::abs(to_cplx(mesh.vertices[u]) - image);
        if (d < best_dist) {
          best = u;
          best_dist = d;
        }
      }
      if (best < 0) {
        throw DegenerateTriangle("side pairing found no partner for vertex " +
                                 std::to_string(v));
      }
      partner_of[v] = best;
      gluing.unite(v, best);
    }
    const unsigned bit = 1u << (s + 4);
    for (const auto& t : mesh.triangles) {
      for (int e = 0; e < 3; ++e) {
        const int a = t[e], b = t[(e + 1) % 3];
        if ((side_mask[a] & bit) && (side_mask[b] & bit))
          mesh.edge_gluing.push_back({a, b, partner_of[a], partner_of[b]});
      }
    }
  }
  finalize_dofs(mesh, gluing);
  check_triangles(mesh);
  mesh.area = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) mesh.area += triangle_area(mesh, t);
  return mesh;
}

double surface_distance(const SurfaceMesh& mesh, const Eigen::Vector2d& a,
                        const Eigen::Vector2d& b) {
  if (mesh.kind == SurfaceKind::Torus) {
    const double L = mesh.side_length;
    Eigen::Vector2d d = a - b;
    for (int c = 0; c < 2; ++c) d[c] -= L * std::round(d[c] / L);
    return d.norm();
  }
  const cplx za = to_cplx(a), zb = to_cplx(b);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& g : bolza::short_words())
    best = std::min(best, bolza::disk_distance(za, g(zb)));
  return best;
}

void write_mesh(std::ostream& os, const SurfaceMesh& mesh) {
  const auto old = os.precision(17);
  os << "surface " << to_string(mesh.kind) << ' ' << mesh.num_vertices() << ' '
     << mesh.num_triangles() << ' ' << mesh.area << '\n';
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    os << mesh.vertices[v].x() << ' ' << mesh.vertices[v].y() << ' '
       << mesh.conformal_weight[v] << '\n';
  }
  for (const auto& t : mesh.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (const auto& [boundary, interior] : mesh.identifications())
    os << boundary << ' ' << interior << '\n';
  os.precision(old);
}

}  // namespace sclab::surface
