#pragma once

#include <array>

#include "strandsim/lie.hpp"

namespace strand {

/// Deformation mode indices in the twist layout.
enum StrainMode {
  kTorsionX = 0,
  kBendingY = 1,
  kBendingZ = 2,
  kElongationX = 3,
  kShearY = 4,
  kShearZ = 5,
};

/// Polynomial strain basis of one soft division: per mode an enabled flag and
/// a shifted-Legendre polynomial order on the normalized abscissa, plus the
/// reference strain. Default reference is the straight unstretched rod.
struct StrainBasisSpec {
  std::array<int, 6> order{-1, -1, -1, -1, -1, -1};  // -1 = mode disabled
  Vec6 ref_strain = (Vec6() << 0, 0, 0, 1, 0, 0).finished();

  StrainBasisSpec& enable(int mode, int poly_order) {
    order[mode] = poly_order;
    return *this;
  }

  int dof() const {
    int n = 0;
    for (int m = 0; m < 6; ++m)
      if (order[m] >= 0) n += order[m] + 1;
    return n;
  }

  int max_order() const {
    int p = 0;
    for (int m = 0; m < 6; ++m) p = std::max(p, order[m]);
    return p;
  }

  /// Basis matrix Phi(X), 6 x dof(); one nonzero block row per enabled mode.
  Mat6X eval(double X) const;

  Vec6 reference(double /*X*/) const { return ref_strain; }
};

}  // namespace strand
