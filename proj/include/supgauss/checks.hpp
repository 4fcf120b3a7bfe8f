#pragma once

// Property suites run by the command line tool and the acceptance harness:
// smooth-max sandwich and derivative identities, the smoothed-indicator
// sandwich, and anti-concentration of Gaussian suprema.

#include <cstddef>
#include <span>
#include <vector>

#include "supgauss/parallel.hpp"
#include "supgauss/rng.hpp"
#include "supgauss/simulate.hpp"

namespace supgauss {

struct SandwichReport {
  std::size_t vectors = 0;
  std::size_t violations = 0;
  double max_slack_ratio = 0.0;  // max (F_beta - max) / (log p / beta), <= 1 when no violations
};

/// max x <= F_beta(x) <= max x + log(p) / beta on random vectors with
/// p uniform on [1, max_p] and beta log-uniform on [0.1, 100].
SandwichReport smooth_max_sandwich(std::size_t vectors, std::size_t max_p, const RngPolicy& rng,
                                   const Execution& exec = Execution::parallel());

struct DerivativeReport {
  std::size_t draws = 0;
  double max_pi_sum_error = 0.0;  // |sum pi - 1|
  double max_w_abs_sum = 0.0;     // sum |w_jk|, bounded by 2
  double max_q_abs_sum = 0.0;     // sum |q_jkl|, bounded by 6
  std::size_t fd_draws = 0;
  double max_fd_error_pi = 0.0;   // relative, gradient vs pi
  double max_fd_error_w = 0.0;    // Hessian vs beta w, in units of beta
  std::size_t violations = 0;     // of the three identities above
};

DerivativeReport derivative_suite(std::size_t draws, std::size_t max_p, std::size_t fd_draws, std::size_t fd_max_p,
                                  const RngPolicy& rng, const Execution& exec = Execution::parallel());

struct IndicatorReport {
  std::size_t points = 0;
  std::size_t violations = 0;
  double epsilon = 0.0;
};

/// (1 - eps) 1_A <= g <= eps + (1 - eps) 1_{A^{3 delta}} for A = [lo, hi] on
/// an even grid over [lo - 1.5, hi + 1.5] (widened to cover A^{6 delta}).
IndicatorReport indicator_sandwich(double lo, double hi, double delta, double beta, std::size_t points);

struct AnticoncentrationRow {
  double epsilon = 0.0;
  double levy = 0.0;
  double bound = 0.0;  // 3 eps (mean + sqrt(1 v log(1/eps)))
};

/// Levy concentration of a Gaussian sup sample with unit variances, against
/// the anti-concentration bound.
std::vector<AnticoncentrationRow> anticoncentration_table(const SupSample& sample, std::span<const double> epsilons);

}  // namespace supgauss
