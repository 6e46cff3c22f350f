#pragma once

#include <array>
#include <complex>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace sclab::surface {

enum class SurfaceKind { Torus, Bolza };

std::string to_string(SurfaceKind kind);

// Triangulated fundamental domain of a closed surface.
//
// Triangles index chart vertices. Boundary vertices of the fundamental domain
// appear once per chart copy and are glued through `dof`: every chart vertex
// maps to a quotient vertex (degree of freedom), whose representative is the
// smallest chart index in its class.
struct SurfaceMesh {
  SurfaceKind kind = SurfaceKind::Torus;
  std::vector<Eigen::Vector2d> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<double> conformal_weight;  // per chart vertex
  std::vector<int> dof;                  // chart vertex -> quotient vertex
  std::vector<int> representative;       // quotient vertex -> chart vertex
  // Boundary edge (a,b) glued onto (a',b') with a -> a', b -> b'.
  std::vector<std::array<int, 4>> edge_gluing;
  double area = 0.0;
  double side_length = 0.0;  // torus only
  int level = 0;             // torus grid resolution or Bolza refine depth

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  int num_dofs() const { return static_cast<int>(representative.size()); }

  // V - E + F of the quotient complex.
  int euler_characteristic() const;

  // (chart index, representative chart index) for every non-representative
  // chart vertex.
  std::vector<std::pair<int, int>> identifications() const;
};

// Metric factor rho with ds^2 = rho |dz|^2 in the chart.
double metric_factor(SurfaceKind kind, const Eigen::Vector2d& z);

SurfaceMesh build_torus(int n, double side_length);
SurfaceMesh build_bolza(int refine);

// Lumped (row-sum) Riemannian area of each quotient vertex. Sums to the
// discrete surface area.
std::vector<double> dof_areas(const SurfaceMesh& mesh);

// Riemannian area of one chart triangle, integrated with a degree-5 rule.
double triangle_area(const SurfaceMesh& mesh, int t);

namespace bolza {

// Euclidean chart radius of the octagon corners, 2^{-1/4}.
double corner_radius();
// Euclidean chart radius of the side midpoints.
double midpoint_radius();
// Chart coordinates of corner k (k = 0..7), at angle pi/8 + k pi/4.
std::complex<double> corner(int k);

// Orientation-preserving isometry z -> (a z + b) / (c z + d).
struct Mobius {
  std::complex<double> a{1.0}, b{0.0}, c{0.0}, d{1.0};
  std::complex<double> operator()(std::complex<double> z) const {
    return (a * z + b) / (c * z + d);
  }
  Mobius operator*(const Mobius& o) const;
  Mobius inverse() const;
};

// Side pairing s = 0..3: hyperbolic translation toward angle s pi/4 mapping
// side s+4 onto side s. Index s = 4..7 returns the inverse of pairing s-4.
Mobius side_pairing(int s);

// Group elements given by words of length <= 2 in the side pairings.
const std::vector<Mobius>& short_words();

double disk_distance(std::complex<double> z, std::complex<double> w);

}  // namespace bolza

// Geodesic distance on the quotient surface between two chart points:
// minimum image for the torus, minimum over short deck translates for Bolza.
double surface_distance(const SurfaceMesh& mesh, const Eigen::Vector2d& a,
                        const Eigen::Vector2d& b);

// Description of an open control set.
struct RegionDescriptor {
  enum class Shape { Whole, Ball, Strip, Vertices };

  Shape shape = Shape::Whole;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();  // Ball
  double radius = 0.0;                               // Ball
  double x0 = 0.0, x1 = 0.0;                         // Strip [x0, x1) in chart x
  std::vector<int> vertex_list;                      // Vertices (quotient ids)
  // Transition band width; unset means 10% of the region diameter.
  std::optional<double> band;

  static RegionDescriptor whole();
  static RegionDescriptor ball(Eigen::Vector2d center, double radius,
                               std::optional<double> band = std::nullopt);
  static RegionDescriptor strip(double x0, double x1,
                                std::optional<double> band = std::nullopt);
  static RegionDescriptor vertices(std::vector<int> ids);

  double band_width() const;
  std::string describe() const;
};

struct ControlRegion {
  std::vector<double> weights;  // per quotient vertex, in [0,1]
  double support_area = 0.0;    // area of {weight > 0}
  double weighted_area = 0.0;   // integral of the weight
  RegionDescriptor descriptor;

  int size() const { return static_cast<int>(weights.size()); }
  bool is_whole() const;
};

// Quintic smoothstep 6t^5 - 15t^4 + 10t^3 on [0,1], clamped outside.
double quintic_ramp(double t);

ControlRegion rasterize_region(const SurfaceMesh& mesh,
                               const RegionDescriptor& spec);

// Smooth bump exp(1 - 1/(1 - (d/r)^2)) in the surface distance d from the
// center, peak 1, per quotient vertex.
Eigen::VectorXd bump_field(const SurfaceMesh& mesh, const Eigen::Vector2d& center, double radius);

void write_mesh(std::ostream& os, const SurfaceMesh& mesh);
void write_region(std::ostream& os, const ControlRegion& region);

}  // namespace sclab::surface
