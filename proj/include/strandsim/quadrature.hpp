#pragma once

#include <vector>

namespace strand {

/// Gauss-Legendre rule mapped to [0, 1]; weights sum to 1.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point rule, exact for polynomials of degree 2n-1. n >= 1.
GaussRule gauss_legendre(int n);

/// Shifted Legendre polynomials P~_k(x) = P_k(2x-1) on [0, 1],
/// orders 0..max_order inclusive.
std::vector<double> shifted_legendre(int max_order, double x);

}  // namespace strand
