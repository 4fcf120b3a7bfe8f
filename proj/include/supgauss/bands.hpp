#pragma once

// Uniform confidence bands from Gaussian-sup critical values, and coverage
// experiments for kernel scenarios.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "supgauss/parallel.hpp"
#include "supgauss/scenarios.hpp"
#include "supgauss/simulate.hpp"

namespace supgauss {

enum class BandSide { one_sided_lower, two_sided };
enum class CoverageTarget { exact_centered, true_function };

struct BandResult {
  std::vector<double> estimate;
  std::vector<double> sigma_n;
  std::vector<double> lower;
  std::vector<double> upper;  // +inf for one-sided bands
  double c_alpha = 0.0;
  BandSide side = BandSide::two_sided;
  double alpha = 0.0;

  std::size_t size() const { return estimate.size(); }
  /// True when lower[j] <= target[j] <= upper[j] for every j.
  bool contains(std::span<const double> target) const;
};

/// (1 - alpha) quantile of a Gaussian sup sample. For two-sided bands pass a
/// sample of sup |B_n|.
double critical_value(const SupSample& gauss, double alpha);

/// One-sided: [estimate - c sigma, inf). Two-sided: estimate -+ c sigma.
/// A zero sigma gives zero half-width even for c = inf.
BandResult build_band(std::span<const double> estimate, std::span<const double> sigma_n, double c_alpha,
                      BandSide side, double alpha = 0.0);

/// Band around the kernel estimate computed from `points` (rows (y, t)).
BandResult kernel_band(const KernelClass& kc, const Eigen::MatrixXd& points, double c_alpha, BandSide side,
                       double alpha = 0.0);

/// E[g(Y) | X = x] p(x) on the class grid, the function a kernel estimate targets.
std::vector<double> kernel_truth(const KernelScenario& scenario, const KernelClass& kc);

struct CoverageReport {
  double nominal = 0.0;
  double empirical = 0.0;
  double binomial_se = 0.0;
  std::size_t replications = 0;
  double c_alpha = 0.0;
};

struct CoverageOptions {
  BandSide side = BandSide::two_sided;
  CoverageTarget target = CoverageTarget::exact_centered;
  /// Replaces the simulated critical value (e.g. +inf).
  std::optional<double> c_alpha_override;
  Execution exec = Execution::parallel();
};

/// R_outer data sets of size n; each band uses the critical value from one
/// shared sample of R_inner Gaussian-sup draws.
CoverageReport coverage_experiment(const KernelScenario& scenario, double alpha, std::size_t n, std::size_t R_outer,
                                   std::size_t R_inner, const RngPolicy& rng, const CoverageOptions& options = {});

double binomial_se(double p, std::size_t trials);

}  // namespace supgauss
