#include "strandsim/section.hpp"

#include <cmath>
#include <stdexcept>

namespace strand {

CrossSection CrossSection::circular(double r0, double r1) {
  CrossSection cs;
  cs.kind = SectionKind::Circular;
  cs.params_start = {r0, r0};
  cs.params_end = {r1, r1};
  return cs;
}

CrossSection CrossSection::rectangular(double w0, double h0, double w1, double h1) {
  CrossSection cs;
  cs.kind = SectionKind::Rectangular;
  cs.params_start = {w0, h0};
  cs.params_end = {w1, h1};
  return cs;
}

CrossSection CrossSection::ellipsoidal(double ay0, double az0, double ay1, double az1) {
  CrossSection cs;
  cs.kind = SectionKind::Ellipsoidal;
  cs.params_start = {ay0, az0};
  cs.params_end = {ay1, az1};
  return cs;
}

Eigen::Vector2d CrossSection::params(double X) const {
  return (1.0 - X) * params_start + X * params_end;
}

namespace {

// Torsion constant of a solid rectangle, Roark's closed-form approximation.
double rectangle_torsion(double w, double h) {
  const double t = std::min(w, h);
  const double b = std::max(w, h);
  const double r = t / b;
  return b * t * t * t * (1.0 / 3.0 - 0.21 * r * (1.0 - r * r * r * r / 12.0));
}

}  // namespace

SectionProps CrossSection::properties(double X) const {
  if (X < -1e-12 || X > 1.0 + 1e-12) throw std::out_of_range("abscissa out of range");
  if (override_table) return override_table(X);
  const Eigen::Vector2d p = params(X);
  SectionProps sp;
  switch (kind) {
    case SectionKind::Circular: {
      const double r = p[0];
      sp.area = M_PI * r * r;
      sp.inertia_y = sp.inertia_z = M_PI * std::pow(r, 4) / 4.0;
      sp.torsion = 2.0 * sp.inertia_y;
      break;
    }
    case SectionKind::Rectangular: {
      const double w = p[0], h = p[1];
      sp.area = w * h;
      sp.inertia_y = w * h * h * h / 12.0;
      sp.inertia_z = h * w * w * w / 12.0;
      sp.torsion = rectangle_torsion(w, h);
      break;
    }
    case SectionKind::Ellipsoidal: {
      const double ay = p[0], az = p[1];
      sp.area = M_PI * ay * az;
      sp.inertia_y = M_PI * ay * std::pow(az, 3) / 4.0;
      sp.inertia_z = M_PI * az * std::pow(ay, 3) / 4.0;
      sp.torsion = M_PI * std::pow(ay, 3) * std::pow(az, 3) / (ay * ay + az * az);
      break;
    }
  }
  return sp;
}

bool CrossSection::contains(double X, double y, double z) const {
  const Eigen::Vector2d p = params(X);
  switch (kind) {
    case SectionKind::Circular:
      return y * y + z * z < p[0] * p[0];
    case SectionKind::Rectangular:
      return std::abs(y) < 0.5 * p[0] && std::abs(z) < 0.5 * p[1];
    case SectionKind::Ellipsoidal:
      return (y * y) / (p[0] * p[0]) + (z * z) / (p[1] * p[1]) < 1.0;
  }
  return false;
}

Mat6 screw_inertia(const CrossSection& cs, const Material& mat, double X) {
  const SectionProps sp = cs.properties(X);
  Vec6 d;
  d << sp.inertia_y + sp.inertia_z, sp.inertia_y, sp.inertia_z, sp.area, sp.area, sp.area;
  return (mat.density * d).asDiagonal();
}

Mat6 screw_stiffness(const CrossSection& cs, const Material& mat, double X,
                     const ShearCorrection& shear) {
  const SectionProps sp = cs.properties(X);
  const double E = mat.youngs_modulus;
  const double G = mat.shear_modulus();
  Vec6 d;
  d << G * sp.torsion, E * sp.inertia_y, E * sp.inertia_z, E * sp.area, shear.ky * G * sp.area,
      shear.kz * G * sp.area;
  return d.asDiagonal();
}

Mat6 damping_tensor(const CrossSection& cs, const Material& mat, double X,
                    const ShearCorrection& shear) {
  if (mat.viscous_modulus == 0.0) return Mat6::Zero();
  return (mat.viscous_modulus / mat.youngs_modulus) * screw_stiffness(cs, mat, X, shear);
}

}  // namespace strand
