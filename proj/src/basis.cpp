#include "strandsim/basis.hpp"

#include "strandsim/quadrature.hpp"

namespace strand {

Mat6X StrainBasisSpec::eval(double X) const {
  Mat6X phi = Mat6X::Zero(6, dof());
  const auto poly = shifted_legendre(max_order(), X);
  int col = 0;
  for (int m = 0; m < 6; ++m) {
    if (order[m] < 0) continue;
    for (int k = 0; k <= order[m]; ++k) phi(m, col++) = poly[k];
  }
  return phi;
}

}  // namespace strand
