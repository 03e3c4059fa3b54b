#include "strandsim/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace strand {

// Newton iteration on P_n with the recurrence derivative; nodes seeded by the
// Chebyshev-like asymptotic estimate. Accurate to machine precision for the
// orders used here (<= ~80).
GaussRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss order must be >= 1");
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    // map [-1,1] -> [0,1]
    rule.nodes[i] = 0.5 * (1.0 - x);
    rule.nodes[n - 1 - i] = 0.5 * (1.0 + x);
    rule.weights[i] = 0.5 * w;
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  return rule;
}

std::vector<double> shifted_legendre(int max_order, double x) {
  std::vector<double> p(max_order + 1);
  const double u = 2.0 * x - 1.0;
  p[0] = 1.0;
  if (max_order >= 1) p[1] = u;
  for (int k = 2; k <= max_order; ++k)
    p[k] = ((2 * k - 1) * u * p[k - 1] - (k - 1) * p[k - 2]) / k;
  return p;
}

}  // namespace strand
