#pragma once

// Kernel (local) and series empirical processes as discretized classes with
// exact Gaussian analogues, plus the rate experiments built on them.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "supgauss/funcclass.hpp"
#include "supgauss/laws.hpp"
#include "supgauss/parallel.hpp"
#include "supgauss/simulate.hpp"

namespace supgauss {

/// value(n) = scale * n^{-exponent}
struct PowerRule {
  double scale = 1.0;
  double exponent = 0.2;
  double at(std::size_t n) const;
};

// ---------------------------------------------------------------- kernel

enum class KernelType { epanechnikov, gaussian };
enum class KernelFamily { density, regression, cond_cdf };
enum class Normalization { unit, studentized };
enum class RegressionFunction { zero, linear, sine };

double regression_value(RegressionFunction m, std::span<const double> x);

/// One-dimensional kernel profile with unit integral.
double kernel_1d(KernelType k, double u);
/// Half-width (in units of h) outside which the kernel is treated as zero.
double kernel_reach(KernelType k);
/// integral of k^2 for the one-dimensional profile.
double kernel_l2_squared(KernelType k);

struct KernelScenario {
  std::size_t d = 1;
  KernelType kernel = KernelType::epanechnikov;
  PowerRule bandwidth{1.0, 0.2};
  std::vector<double> region_lo{0.0};
  std::vector<double> region_hi{1.0};
  std::size_t grid_points = 64;  // per axis
  KernelFamily family = KernelFamily::density;
  std::vector<double> y_grid;    // thresholds for cond_cdf
  std::shared_ptr<const DataLaw> x_law;
  RegressionFunction m = RegressionFunction::zero;
  double noise_sd = 1.0;         // Y = m(X) + noise_sd * N(0,1)
  Normalization normalization = Normalization::studentized;
  std::size_t quad_nodes = 0;    // per axis; 0 picks 256 for d = 1 and 32 for d = 2

  void validate() const;
  std::vector<std::vector<double>> x_grid() const;
  std::size_t g_count() const;
  std::size_t nodes() const;
};

/// f_{x,g}(y, t) = scale_{x,g} (g(y) k((t - x)/h) - mu_{x,g}), points are (y, t_1..t_d),
/// index j = x_index * g_count + g_index.
class KernelFunctions final : public FunctionFamily {
 public:
  KernelFunctions(const KernelScenario& scenario, double h, std::vector<double> scale, std::vector<double> mu);

  std::size_t size() const override { return scale_.size(); }
  std::size_t point_dim() const override { return d_ + 1; }
  void evaluate(std::span<const double> x, std::span<double> out) const override;
  double envelope(std::span<const double> x) const override;
  void accumulate(std::span<const double> x, std::span<double> sums) const override;
  std::span<const double> offsets() const override { return offsets_; }

  double g_value(std::size_t g_index, double y) const;
  double h() const { return h_; }

 private:
  std::size_t d_, grid_points_, g_count_;
  KernelType kernel_;
  KernelFamily family_;
  std::vector<double> y_grid_, lo_, step_;
  double h_, reach_;
  std::vector<double> scale_, mu_, offsets_;
  double max_scale_, max_abs_mu_;
};

struct KernelClass {
  DiscretizedClass cls;
  CovarianceModel cov;
  double h = 0.0;
  std::size_t n = 0;
  std::vector<std::vector<double>> x_grid;
  std::vector<double> mu;        // E[g(Y) k((X - x)/h)]
  std::vector<double> scale;     // c_n(x, g) h^{-d/2}
  std::vector<double> sigma_n;   // standard deviation of the estimate S_n(x, g)
  std::vector<double> expected;  // E[S_n(x, g)] = h^{-d} mu
  PointSampler sampler;
  std::shared_ptr<const KernelFunctions> functions;
};

KernelClass build_kernel_class(const KernelScenario& scenario, std::size_t n);

/// S_n(x, g) = (n h^d)^{-1} sum_i g(Y_i) k((X_i - x)/h) for points (y, t).
std::vector<double> kernel_estimate(const KernelClass& kc, const Eigen::MatrixXd& points);

// ---------------------------------------------------------------- series

enum class Basis { fourier_trig, legendre, bspline };
enum class SeriesModel { mean_regression, quantile_regression };
enum class NoiseScale { homoskedastic, heteroskedastic, none };

/// s(x): 1, 0.5 + x_1, or 0.
double noise_scale(NoiseScale s, std::span<const double> x);

/// K one-dimensional basis functions at x in [0, 1].
void basis_1d(Basis basis, std::size_t K, double x, std::span<double> out);

struct SeriesScenario {
  Basis basis = Basis::fourier_trig;
  std::size_t d = 1;
  PowerRule order{1.0, -1.0 / 3.0};  // K_n = ceil(scale n^{1/3}) per axis
  std::size_t grid_points = 64;       // per axis
  SeriesModel model = SeriesModel::mean_regression;
  NoiseScale noise = NoiseScale::homoskedastic;
  std::vector<double> taus{0.5};
  std::shared_ptr<const DataLaw> x_law;  // defaults to uniform on [0,1]^d
  std::size_t quad_nodes = 0;            // per axis; 0 picks 256 for d = 1 and 48 for d = 2

  void validate() const;
  std::size_t order_at(std::size_t n) const;  // per-axis K
  std::vector<std::vector<double>> x_grid() const;
  std::size_t tau_count() const { return model == SeriesModel::quantile_regression ? taus.size() : 1; }
};

/// Tensor-product basis psi^K(x), K = K1^d.
void basis_eval(Basis basis, std::size_t K1, std::size_t d, std::span<const double> x, std::span<double> out);

/// alpha(x)^T [g(eta) psi(X)] in linear-feature form; points are (eta, x_1..x_d).
class SeriesFunctions final : public FunctionFamily {
 public:
  SeriesFunctions(const SeriesScenario& scenario, std::size_t K1, Eigen::MatrixXd coefficients, double envelope_bound);

  std::size_t size() const override { return static_cast<std::size_t>(coef_.rows()); }
  std::size_t point_dim() const override { return d_ + 1; }
  void evaluate(std::span<const double> x, std::span<double> out) const override;
  double envelope(std::span<const double> x) const override;
  std::size_t feature_dim() const override { return static_cast<std::size_t>(coef_.cols()); }
  void features(std::span<const double> x, std::span<double> out) const override;
  const Eigen::MatrixXd* coefficients() const override { return &coef_; }

 private:
  Basis basis_;
  std::size_t d_, K1_, K_;
  SeriesModel model_;
  std::vector<double> taus_;
  Eigen::MatrixXd coef_;
  double envelope_bound_;
};

struct SeriesClass {
  DiscretizedClass cls;
  CovarianceModel cov;  // low-rank factor, rank <= K * tau_count
  std::size_t K = 0;    // total basis size
  std::size_t n = 0;
  std::vector<std::vector<double>> x_grid;
  Eigen::MatrixXd alpha;  // one row per (x, tau): alpha(x)^T, K columns
  Eigen::MatrixXd Omega;  // covariance of the feature vector g(eta) psi(X)
  Eigen::MatrixXd A1, A2;
  std::vector<std::string> warnings;
  PointSampler sampler;
};

SeriesClass build_series_class(const SeriesScenario& scenario, std::size_t n);

/// One draw of sup_x alpha(x)^T n^{-1/2} sum_i g(eta_i) psi(X_i).
double series_linear_statistic(const SeriesScenario& scenario, std::size_t n, const RngPolicy& rng);
double series_linear_statistic(const SeriesClass& sc, std::size_t n, const RngPolicy& rng);

/// sup over a 1001-point grid per axis of |psi^K(x)|, floored at 1.
double xi_n(const SeriesScenario& scenario, std::size_t K1);

// ---------------------------------------------------------------- rates

struct RateRow {
  std::size_t n = 0;
  double ks = 0.0;
  double ks_conf = 0.0;
  double predicted_rate = 0.0;
  double tuning = 0.0;  // h for kernel scenarios, xi_n for series scenarios
};

struct RateTable {
  std::vector<RateRow> rows;
  double slope_fit = 0.0;
};

double predicted_rate_kernel(std::size_t n, double h, std::size_t d);
double predicted_rate_series(std::size_t n, double xi);
/// Least-squares slope of log y against log x.
double loglog_slope(std::span<const double> x, std::span<const double> y);

struct RateOptions {
  bool abs_max = false;
  Execution exec = Execution::parallel();
};

RateTable rate_experiment(const KernelScenario& scenario, std::span<const std::size_t> n_list, std::size_t R,
                          const RngPolicy& rng, const RateOptions& options = {});
RateTable rate_experiment(const SeriesScenario& scenario, std::span<const std::size_t> n_list, std::size_t R,
                          const RngPolicy& rng, const RateOptions& options = {});

}  // namespace supgauss
