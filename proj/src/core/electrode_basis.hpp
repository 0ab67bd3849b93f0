#pragma once

#include <array>

#include "common.hpp"

namespace tdmsim {

// Axis-aligned rectangle in the z = 0 plane, meters.
struct Rect {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;

  double area() const noexcept { return (x_max - x_min) * (y_max - y_min); }
};

/// Potential of a unit-voltage rectangle in an otherwise grounded plane and
/// its spatial derivatives. third[k](i, j) holds d3 phi / dx_i dx_j dx_k.
struct BasisDerivatives {
  double value = 0.0;
  Vec3 gradient = Vec3::Zero();
  Mat3 hessian = Mat3::Zero();
  std::array<Mat3, 3> third{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
};

// order: 0 value only, 1 adds the gradient, 2 the Hessian, 3 third derivatives.
// Accumulates into out, so several rectangles can share one result.
void accumulate_rect_basis(const Rect& rect, const Vec3& r, int order, BasisDerivatives& out);

double rect_basis_value(const Rect& rect, const Vec3& r);

}  // namespace tdmsim
