#pragma once

#include <span>
#include <vector>

namespace supgauss {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [lo, hi]; exact for polynomials of degree 2n - 1.
QuadratureRule gauss_legendre(std::size_t n, double lo = -1.0, double hi = 1.0);

/// Maps a rule on [-1, 1] to [lo, hi].
QuadratureRule rescale(const QuadratureRule& unit, double lo, double hi);

}  // namespace supgauss
