#pragma once

#include <array>

namespace sclab::detail {

// Seven-point rule on a triangle, exact for polynomials of degree 5.
// Barycentric coordinates and weights (weights sum to one).
struct TrianglePoint {
  std::array<double, 3> bary;
  double weight;
};

inline const std::array<TrianglePoint, 7>& triangle_rule() {
  static const std::array<TrianglePoint, 7> rule = [] {
    constexpr double w0 = 0.225;
    constexpr double a1 = 0.059715871789769820, b1 = 0.470142064105115090;
    constexpr double w1 = 0.132394152788506181;
    constexpr double a2 = 0.797426985353087322, b2 = 0.101286507323456339;
    constexpr double w2 = 0.125939180544827153;
    return std::array<TrianglePoint, 7>{{
        {{1.0 / 3, 1.0 / 3, 1.0 / 3}, w0},
        {{a1, b1, b1}, w1},
        {{b1, a1, b1}, w1},
        {{b1, b1, a1}, w1},
        {{a2, b2, b2}, w2},
        {{b2, a2, b2}, w2},
        {{b2, b2, a2}, w2},
    }};
  }();
  return rule;
}

}  // namespace sclab::detail
