#include "supgauss/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "supgauss/errors.hpp"

namespace supgauss {

QuadratureRule gauss_legendre(std::size_t n, double lo, double hi) {
  require(n >= 1, "quadrature needs at least one node");
  QuadratureRule unit;
  unit.nodes.resize(n);
  unit.weights.resize(n);
  // Newton iteration on P_n from the Chebyshev-like initial guess; nodes are
  // symmetric, so only half are computed.
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = pk;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    if (n == 1) {
      x = 0.0;
      dp = 1.0;
    }
    unit.nodes[i] = -x;
    unit.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    unit.weights[i] = w;
    unit.weights[n - 1 - i] = w;
  }
  return rescale(unit, lo, hi);
}

QuadratureRule rescale(const QuadratureRule& unit, double lo, double hi) {
  QuadratureRule r;
  r.nodes.resize(unit.nodes.size());
  r.weights.resize(unit.weights.size());
  const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
  for (std::size_t i = 0; i < unit.nodes.size(); ++i) {
    r.nodes[i] = mid + half * unit.nodes[i];
    r.weights[i] = half * unit.weights[i];
  }
  return r;
}

}  // namespace supgauss
