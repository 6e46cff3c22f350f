#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "sclab/errors.hpp"
#include "sclab/surface.hpp"

namespace sclab::surface {

double quintic_ramp(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

RegionDescriptor RegionDescriptor::whole() { return {}; }

RegionDescriptor RegionDescriptor::ball(Eigen::Vector2d center, double radius,
                                        std::optional<double> band) {
  RegionDescriptor d;
  d.shape = Shape::Ball;
  d.center = center;
  d.radius = radius;
  d.band = band;
  return d;
}

RegionDescriptor RegionDescriptor::strip(double x0, double x1,
                                         std::optional<double> band) {
  RegionDescriptor d;
  d.shape = Shape::Strip;
  d.x0 = x0;
  d.x1 = x1;
  d.band = band;
  return d;
}

RegionDescriptor RegionDescriptor::vertices(std::vector<int> ids) {
  RegionDescriptor d;
  d.shape = Shape::Vertices;
  d.vertex_list = std::move(ids);
  return d;
}

double RegionDescriptor::band_width() const {
  if (band) return *band;
  switch (shape) {
    case Shape::Ball:
      return 0.1 * 2.0 * radius;
    case Shape::Strip:
      return 0.1 * (x1 - x0);
    default:
      return 0.0;
  }
}

std::string RegionDescriptor::describe() const {
  std::ostringstream os;
  os.precision(6);
  switch (shape) {
    case Shape::Whole:
      os << "whole";
      break;
    case Shape::Ball:
      os << "ball(" << center.x() << "," << center.y() << ";r=" << radius
         << ";band=" << band_width() << ")";
      break;
    case Shape::Strip:
      os << "strip[" << x0 << "," << x1 << ");band=" << band_width();
      break;
    case Shape::Vertices:
      os << "vertices(" << vertex_list.size() << ")";
      break;
  }
  return os.str();
}

bool ControlRegion::is_whole() const {
  return std::all_of(weights.begin(), weights.end(),
                     [](double w) { return w == 1.0; });
}

namespace {

// Weight at one chart copy, given its depth inside the region boundary.
double profile(double depth, double band) {
  if (depth <= 0.0) return 0.0;
  if (band <= 0.0) return 1.0;
  return quintic_ramp(depth / band);
}

double chart_weight(const SurfaceMesh& mesh, const RegionDescriptor& spec,
                    const Eigen::Vector2d& p) {
  const double band = spec.band_width();
  switch (spec.shape) {
    case RegionDescriptor::Shape::Whole:
      return 1.0;
    case RegionDescriptor::Shape::Ball: {
      if (!(spec.radius > 0.0)) return 0.0;
      return profile(spec.radius - surface_distance(mesh, p, spec.center), band);
    }
    case RegionDescriptor::Shape::Strip: {
      double x = p.x();
      if (mesh.kind == SurfaceKind::Torus) {
        const double L = mesh.side_length;
        x = spec.x0 + std::fmod(std::fmod(x - spec.x0, L) + L, L);
        // Rounding can push x0 itself to x0 + L.
        if (std::abs(x - spec.x0 - L) < 1e-12 * L) x = spec.x0;
      }
      if (x < spec.x0 || x >= spec.x1) return 0.0;
      if (band <= 0.0) return 1.0;
      return profile(std::min(x - spec.x0, spec.x1 - x), band);
    }
    case RegionDescriptor::Shape::Vertices:
      return 0.0;
  }
  return 0.0;
}

}  // namespace

ControlRegion rasterize_region(const SurfaceMesh& mesh,
                               const RegionDescriptor& spec) {
  ControlRegion region;
  region.descriptor = spec;
  region.weights.assign(mesh.num_dofs(), 0.0);
  if (spec.shape == RegionDescriptor::Shape::Vertices) {
    for (int id : spec.vertex_list) {
      if (id < 0 || id >= mesh.num_dofs())
        throw EmptyRegion("vertex id " + std::to_string(id) + " out of range");
      region.weights[id] = 1.0;
    }
  } else {
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      const int d = mesh.dof[v];
      region.weights[d] =
          std::max(region.weights[d], chart_weight(mesh, spec, mesh.vertices[v]));
    }
  }
  const double max_w = *std::max_element(region.weights.begin(), region.weights.end());
  if (!(max_w > 0.0)) {
    throw EmptyRegion("descriptor " + spec.describe() +
                      " covers no vertex of the mesh");
  }
  if (max_w < 1.0) {
    throw EmptyRegion("descriptor " + spec.describe() +
                      " has no mesh vertex in its core");
  }
  const std::vector<double> areas = dof_areas(mesh);
  for (int d = 0; d < mesh.num_dofs(); ++d) {
    if (region.weights[d] > 0.0) region.support_area += areas[d];
    region.weighted_area += areas[d] * region.weights[d];
  }
  return region;
}

void write_region(std::ostream& os, const ControlRegion& region) {
  const auto old = os.precision(17);
  for (int d = 0; d < region.size(); ++d) os << d << ' ' << region.weights[d] << '\n';
  os.precision(old);
}

Eigen::VectorXd bump_field(const SurfaceMesh& mesh, const Eigen::Vector2d& center, double radius) {
  if (!(radius > 0.0)) throw EmptyRegion("bump radius must be positive");
  Eigen::VectorXd v(mesh.num_dofs());
  for (int d = 0; d < mesh.num_dofs(); ++d) {
    const double s = surface_distance(mesh, mesh.vertices[mesh.representative[d]], center) / radius;
    v(d) = s < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0;
  }
  return v;
}

}  // namespace sclab::surface
