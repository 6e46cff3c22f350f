#include <cmath>
#include <vector>

#include "sclab/errors.hpp"
#include "sclab/spectral.hpp"

namespace sclab::spectral {

Operators assemble(const surface::SurfaceMesh& mesh) {
  const int n = mesh.num_dofs();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(mesh.triangles.size() * 9);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Eigen::Vector2d p[3] = {mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                                  mesh.vertices[tri[2]]};
    const Eigen::Vector2d e1 = p[1] - p[0], e2 = p[2] - p[0];
    const double area = 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
    if (!(area > 1e-300)) {
      throw DegenerateTriangle("triangle " + std::to_string(t) +
                               " has chart area " + std::to_string(area));
    }
    // grad phi_a = J (p_{a+2} - p_{a+1}) / (2 area), J the quarter turn.
    Eigen::Vector2d grad[3];
    for (int a = 0; a < 3; ++a) {
      const Eigen::Vector2d e = p[(a + 2) % 3] - p[(a + 1) % 3];
      grad[a] = Eigen::Vector2d(-e.y(), e.x()) / (2.0 * area);
    }
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        triplets.emplace_back(mesh.dof[tri[a]], mesh.dof[tri[b]],
                              area * grad[a].dot(grad[b]));
  }
  Operators ops;
  ops.stiffness.resize(n, n);
  ops.stiffness.setFromTriplets(triplets.begin(), triplets.end());
  ops.stiffness.makeCompressed();
  const std::vector<double> lumped = surface::dof_areas(mesh);
  ops.mass = Eigen::Map<const Eigen::VectorXd>(lumped.data(), n);
  return ops;
}

}  // namespace sclab::spectral
