#include "electrode_basis.hpp"

#include <cmath>

namespace tdmsim {

namespace {

// Derivatives of G(a, b, z) = atan(a b / (z R)), R = |(a, b, z)|, the solid
// angle of the quadrant [0, a] x [0, b] seen from height z.
struct Corner {
  double g;
  double ga, gb, gz;
  double gaa, gbb, gzz, gab, gaz, gbz;
  double gaaa, gbbb, gzzz, gaab, gabb, gaaz, gbbz, gazz, gbzz, gabz;
};

// d2G/da2
double h2(double a, double b, double z, double r) {
  const double az = a * a + z * z;
  return -a * b * z * (3 * a * a + 2 * b * b + 3 * z * z) / (az * az * r * r * r);
}

// d2G/dadz
double k2(double a, double b, double z, double r) {
  const double a2 = a * a, b2 = b * b, z2 = z * z, az = a2 + z2;
  return b * (a2 * a2 + a2 * b2 - a2 * z2 - b2 * z2 - 2 * z2 * z2) / (az * az * r * r * r);
}

// d3G/da3
double h3a(double a, double b, double z, double r) {
  const double a2 = a * a, b2 = b * b, z2 = z * z, az = a2 + z2;
  const double r5 = r * r * r * r * r;
  const double p = -12 * a2 * a2 * a2 - 15 * a2 * a2 * b2 - 21 * a2 * a2 * z2 -
                   6 * a2 * b2 * b2 - 10 * a2 * b2 * z2 - 6 * a2 * z2 * z2 +
                   2 * b2 * b2 * z2 + 5 * b2 * z2 * z2 + 3 * z2 * z2 * z2;
  return -b * z * p / (az * az * az * r5);
}

// d3G/da2dz
double h3z(double a, double b, double z, double r) {
  const double a2 = a * a, b2 = b * b, z2 = z * z, az = a2 + z2;
  const double r5 = r * r * r * r * r;
  const double p = -3 * a2 * a2 * a2 - 5 * a2 * a2 * b2 + 6 * a2 * a2 * z2 -
                   2 * a2 * b2 * b2 + 10 * a2 * b2 * z2 + 21 * a2 * z2 * z2 +
                   6 * b2 * b2 * z2 + 15 * b2 * z2 * z2 + 12 * z2 * z2 * z2;
  return a * b * p / (az * az * az * r5);
}

Corner corner(double a, double b, double z, int order) {
  Corner c{};
  const double r2 = a * a + b * b + z * z;
  const double r = std::sqrt(r2);
  c.g = std::atan(a * b / (z * r));
  if (order < 1) return c;
  const double az = a * a + z * z;
  const double bz = b * b + z * z;
  c.ga = b * z / (az * r);
  c.gb = a * z / (bz * r);
  c.gz = -a * b * (r2 + z * z) / (az * bz * r);
  if (order < 2) return c;
  const double r3 = r2 * r;
  c.gaa = h2(a, b, z, r);
  c.gbb = h2(b, a, z, r);
  c.gzz = -c.gaa - c.gbb;
  c.gab = z / r3;
  c.gaz = k2(a, b, z, r);
  c.gbz = k2(b, a, z, r);
  if (order < 3) return c;
  const double r5 = r3 * r2;
  c.gaaa = h3a(a, b, z, r);
  c.gbbb = h3a(b, a, z, r);
  c.gaaz = h3z(a, b, z, r);
  c.gbbz = h3z(b, a, z, r);
  c.gaab = -3 * a * z / r5;
  c.gabb = -3 * b * z / r5;
  c.gabz = (r2 - 3 * z * z) / r5;
  c.gazz = -c.gaaa - c.gabb;
  c.gbzz = -c.gaab - c.gbbb;
  c.gzzz = -c.gaaz - c.gbbz;
  return c;
}

// Second derivative for axis pair (i, j); axes 0, 1, 2 map to a, b, z.
double second(const Corner& c, int i, int j) {
  const int key = (1 << (2 * i)) + (1 << (2 * j));
  switch (key) {
    case 2: return c.gaa;
    case 8: return c.gbb;
    case 32: return c.gzz;
    case 5: return c.gab;
    case 17: return c.gaz;
    case 20: return c.gbz;
  }
  return 0.0;
}

double third(const Corner& c, int i, int j, int k) {
  int n[3] = {0, 0, 0};
  ++n[i];
  ++n[j];
  ++n[k];
  const int key = n[0] * 100 + n[1] * 10 + n[2];
  switch (key) {
    case 300: return c.gaaa;
    case 30: return c.gbbb;
    case 3: return c.gzzz;
    case 210: return c.gaab;
    case 120: return c.gabb;
    case 201: return c.gaaz;
    case 21: return c.gbbz;
    case 102: return c.gazz;
    case 12: return c.gbzz;
    case 111: return c.gabz;
  }
  return 0.0;
}

}  // namespace

void accumulate_rect_basis(const Rect& rect, const Vec3& r, int order, BasisDerivatives& out) {
  require(r.z() > 0.0, ErrorKind::domain, "basis potential needs z > 0");
  constexpr double inv_2pi = 1.0 / constants::two_pi;
  // a = x_corner - x and b = y_corner - y, so d/dx = -d/da and d/dy = -d/db.
  const double sign_axis[3] = {-1.0, -1.0, 1.0};
  const double xs[2] = {rect.x_min, rect.x_max};
  const double ys[2] = {rect.y_min, rect.y_max};
  for (int ix = 0; ix < 2; ++ix) {
    for (int iy = 0; iy < 2; ++iy) {
      const double w = ((ix == iy) ? inv_2pi : -inv_2pi);
      const Corner c = corner(xs[ix] - r.x(), ys[iy] - r.y(), r.z(), order);
      out.value += w * c.g;
      if (order < 1) continue;
      out.gradient += w * Vec3(-c.ga, -c.gb, c.gz);
      if (order < 2) continue;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          out.hessian(i, j) += w * sign_axis[i] * sign_axis[j] * second(c, i, j);
        }
      }
      if (order < 3) continue;
      for (int k = 0; k < 3; ++k) {
        for (int i = 0; i < 3; ++i) {
          for (int j = 0; j < 3; ++j) {
            out.third[static_cast<std::size_t>(k)](i, j) +=
                w * sign_axis[i] * sign_axis[j] * sign_axis[k] * third(c, i, j, k);
          }
        }
      }
    }
  }
}

double rect_basis_value(const Rect& rect, const Vec3& r) {
  BasisDerivatives d;
  accumulate_rect_basis(rect, r, 0, d);
  return d.value;
}

}  // namespace tdmsim
