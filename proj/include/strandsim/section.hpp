#pragma once

#include <functional>

#include "strandsim/lie.hpp"

namespace strand {

/// Geometric section properties at one abscissa, SI units.
struct SectionProps {
  double area = 0.0;       // m^2
  double inertia_y = 0.0;  // m^4, bending about y
  double inertia_z = 0.0;  // m^4, bending about z
  double torsion = 0.0;    // m^4, torsion constant J_t
};

enum class SectionKind { Circular, Rectangular, Ellipsoidal };

/// Cross-section shape along a normalized division, with end parameters
/// linearly interpolated in X. Parameter meaning per kind:
///   Circular:    p[0] = radius
///   Rectangular: p[0] = width (y), p[1] = height (z)
///   Ellipsoidal: p[0] = semi-axis y, p[1] = semi-axis z
struct CrossSection {
  SectionKind kind = SectionKind::Circular;
  Eigen::Vector2d params_start{0.01, 0.01};
  Eigen::Vector2d params_end{0.01, 0.01};
  /// Optional override winning over the closed forms.
  std::function<SectionProps(double)> override_table;

  static CrossSection circular(double r0, double r1);
  static CrossSection rectangular(double w0, double h0, double w1, double h1);
  static CrossSection ellipsoidal(double ay0, double az0, double ay1, double az1);

  Eigen::Vector2d params(double X) const;

  /// Closed-form (or overridden) properties. X outside [0,1] throws
  /// std::out_of_range("abscissa out of range").
  SectionProps properties(double X) const;

  /// Whether a body-frame offset (y, z) lies strictly inside the boundary.
  bool contains(double X, double y, double z) const;
};

struct Material {
  double youngs_modulus = 0.0;   // Pa
  double poisson_ratio = 0.0;    // (-1, 0.5]
  double density = 0.0;          // kg/m^3
  double viscous_modulus = 0.0;  // Pa.s, Kelvin-Voigt

  double shear_modulus() const { return youngs_modulus / (2.0 * (1.0 + poisson_ratio)); }
};

/// Optional shear correction factors on the GA terms (1.0 by default).
struct ShearCorrection {
  double ky = 1.0;
  double kz = 1.0;
};

/// Cross-sectional screw inertia: rho * diag(Ix, Iy, Iz, A, A, A) with the
/// polar Ix = Iy + Iz. Angular block first.
Mat6 screw_inertia(const CrossSection& cs, const Material& mat, double X);

/// Linear-elastic screw stiffness diag(G*Jt, E*Iy, E*Iz, E*A, G*A, G*A).
Mat6 screw_stiffness(const CrossSection& cs, const Material& mat, double X,
                     const ShearCorrection& shear = {});

/// Kelvin-Voigt damping: (viscous_modulus / E) * stiffness.
Mat6 damping_tensor(const CrossSection& cs, const Material& mat, double X,
                    const ShearCorrection& shear = {});

}  // namespace strand
