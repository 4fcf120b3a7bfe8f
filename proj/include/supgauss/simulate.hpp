#pragma once

// Monte Carlo engine: suprema of empirical processes and of their Gaussian
// analogues, and the distances used to compare the two.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "supgauss/funcclass.hpp"
#include "supgauss/parallel.hpp"
#include "supgauss/rng.hpp"

namespace supgauss {

/// Writes one i.i.d. draw from P into `out` (size = class point_dim()).
using PointSampler = std::function<void(Engine&, std::span<double>)>;

struct SupSample {
  std::vector<double> values;  // ascending
  std::string statistic_id;
  RngPolicy rng;
  std::size_t n = 0;  // 0 for Gaussian analogues

  std::size_t size() const { return values.size(); }
};

enum class Centering { analytic_means, plugin };

struct EmpiricalOptions {
  Centering centering = Centering::analytic_means;
  /// Pilot sample size for plugin centering (0 means 20 n).
  std::size_t pilot_n = 0;
  /// Record max_j |G_n f_j| instead of max_j G_n f_j.
  bool abs_max = false;
  Execution exec = Execution::parallel();
  std::string statistic_id = "Z_n";
};

/// R replications of max_j n^{-1/2} sum_i (f_j(X_i) - P f_j).
SupSample empirical_sup_sample(const DiscretizedClass& cls, const PointSampler& sampler, std::size_t n,
                               std::size_t R, const RngPolicy& rng, const EmpiricalOptions& options = {});

/// Centering vector used for a given class and options (the pilot sample is
/// drawn from rng.child("pilot") for plugin centering).
std::vector<double> centering_means(const DiscretizedClass& cls, const PointSampler& sampler, std::size_t n,
                                    const RngPolicy& rng, const EmpiricalOptions& options);

/// Covariance of the Gaussian analogue with a factor for exact sampling. The
/// factor is N x r: lower-triangular Cholesky (r = N) after ridge repair, or a
/// supplied low-rank factor.
struct CovarianceModel {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd factor;
  double repair_shift = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(sigma.rows()); }

  /// Symmetrizes, then adds the smallest ridge r * max_diag, r in
  /// {0, 1e-12, 1e-10, 1e-8, 1e-6}, for which a Cholesky factor reproduces the
  /// shifted matrix to 1e-8 relative Frobenius error.
  static CovarianceModel from_matrix(Eigen::MatrixXd sigma);
  /// sigma = L L^T, no repair.
  static CovarianceModel from_factor(Eigen::MatrixXd factor);
};

/// Sigma_jk = Q(f_j f_k) - Q f_j Q f_k under a quadrature rule or discrete law.
CovarianceModel gaussian_covariance(const DiscretizedClass& cls, const DiscreteMeasure& rule);
/// Same with the empirical measure of `reps` draws from the sampler.
CovarianceModel gaussian_covariance_mc(const DiscretizedClass& cls, const PointSampler& sampler, std::size_t reps,
                                       const RngPolicy& rng);

struct GaussianOptions {
  bool abs_max = false;
  Execution exec = Execution::parallel();
  std::string statistic_id = "Z_tilde";
};

/// R replications of max_j (L xi)_j with xi standard normal.
SupSample gaussian_sup_sample(const CovarianceModel& cov, std::size_t R, const RngPolicy& rng,
                              const GaussianOptions& options = {});

struct KsResult {
  double estimate = 0.0;
  double conf_radius = 0.0;
};

/// Two-sample sup-CDF distance with the DKW-type radius sqrt(log(40) / (2 min R)).
KsResult ks_distance(const SupSample& a, const SupSample& b);
KsResult ks_distance(std::span<const double> a_sorted, std::span<const double> b_sorted);

/// Fraction of rank-aligned pairs (a_(i), b_(ceil(i R_b / R_a))) farther apart than delta.
double quantile_coupling(const SupSample& a, const SupSample& b, double delta);

/// max over sample points x of the fraction of values in [x - eps, x + eps].
double levy_concentration(const SupSample& a, double epsilon);

/// Empirical (1 - alpha) quantile, value at index ceil((1 - alpha)(R - 1)).
double sup_quantile(const SupSample& a, double alpha);

/// CSV: "statistic_id,seed,n,R", a metadata row, then "value" and one value per row.
void write_sup_sample(std::ostream& out, const SupSample& sample);
SupSample read_sup_sample(std::istream& in);

/// Builds a sample from unsorted values.
SupSample make_sup_sample(std::vector<double> values, std::string statistic_id, const RngPolicy& rng,
                          std::size_t n);

}  // namespace supgauss
