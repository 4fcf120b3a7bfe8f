#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "supgauss/errors.hpp"
#include "supgauss/quadrature.hpp"
#include "supgauss/scenarios.hpp"

using namespace supgauss;

namespace {

// A rule that evaluates to h at n.
PowerRule fixed_h(double h, std::size_t n) { return {h * std::pow(static_cast<double>(n), 0.2), 0.2}; }

std::shared_ptr<const DataLaw> beta22() { return iid_law(std::make_shared<BetaLaw>(2.0, 2.0), 1); }

Eigen::MatrixXd draw(const PointSampler& s, std::size_t dim, std::size_t m, std::uint64_t seed) {
  Engine e(seed);
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(dim));
  std::vector<double> x(dim);
  for (std::size_t i = 0; i < m; ++i) {
    s(e, x);
    for (std::size_t c = 0; c < dim; ++c) pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = x[c];
  }
  return pts;
}

// Sample covariance of the class values, computed directly from evaluate().
Eigen::MatrixXd mc_covariance(const DiscretizedClass& cls, const Eigen::MatrixXd& pts) {
  const auto N = static_cast<Eigen::Index>(cls.size());
  Eigen::MatrixXd vals(pts.rows(), N);
  std::vector<double> x(static_cast<std::size_t>(pts.cols())), out(cls.size());
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index c = 0; c < pts.cols(); ++c) x[static_cast<std::size_t>(c)] = pts(i, c);
    cls.family->evaluate(x, out);
    for (Eigen::Index j = 0; j < N; ++j) vals(i, j) = out[static_cast<std::size_t>(j)];
  }
  const Eigen::RowVectorXd mean = vals.colwise().mean();
  const Eigen::MatrixXd c = vals.rowwise() - mean;
  return c.transpose() * c / static_cast<double>(pts.rows());
}

}  // namespace

TEST_CASE("kernel: disjoint supports leave only the mean product") {
  // E[k_a k_b] = 0, so the covariance is -h^{-1} E[k_a] E[k_b] = -h under a
  // uniform design with interior points.
  KernelScenario s;
  s.region_lo = {0.2};
  s.region_hi = {0.8};
  s.grid_points = 2;
  s.bandwidth = fixed_h(0.1, 1000);
  s.normalization = Normalization::unit;
  const auto kc = build_kernel_class(s, 1000);
  CHECK(kc.h == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(kc.cov.sigma(0, 1) == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(kc.cov.sigma(0, 0) == doctest::Approx(0.6 - 0.1).epsilon(1e-12));
}

TEST_CASE("kernel: studentized diagonal is one") {
  for (KernelType k : {KernelType::epanechnikov, KernelType::gaussian}) {
    KernelScenario s;
    s.kernel = k;
    s.x_law = beta22();
    const auto kc = build_kernel_class(s, 1000);
    REQUIRE(kc.cov.size() == 64);
    for (Eigen::Index j = 0; j < 64; ++j) CHECK(std::abs(kc.cov.sigma(j, j) - 1.0) < 1e-6);
  }
}

TEST_CASE("kernel: small-h variance under a uniform design") {
  // Interior point, unit normalization: h^{-1} E[k^2] = int k^2 and E[k] = h
  // exactly, so the variance itself is int k^2 - h.
  KernelScenario s;
  s.region_lo = {0.5};
  s.region_hi = {0.5};
  s.grid_points = 1;
  s.normalization = Normalization::unit;
  s.bandwidth = fixed_h(0.05, 1000);
  const auto kc = build_kernel_class(s, 1000);
  const double h = 0.05, var = kc.cov.sigma(0, 0);
  CHECK(kc.mu[0] == doctest::Approx(h).epsilon(1e-12));
  CHECK(std::abs(var + kc.mu[0] * kc.mu[0] / h - kernel_l2_squared(KernelType::epanechnikov)) < 1e-4);
  CHECK(std::abs(var - (0.6 - h)) < 1e-10);

  s.kernel = KernelType::gaussian;
  s.bandwidth = fixed_h(0.01, 1000);
  const auto kg = build_kernel_class(s, 1000);
  CHECK(std::abs(kg.cov.sigma(0, 0) - (kernel_l2_squared(KernelType::gaussian) - 0.01)) < 1e-8);
}

TEST_CASE("kernel: sparse accumulation matches dense evaluation and the envelope dominates") {
  KernelScenario s;
  s.x_law = beta22();
  s.grid_points = 17;
  s.family = KernelFamily::cond_cdf;
  s.y_grid = {-0.5, 0.0, 0.7};
  s.m = RegressionFunction::sine;
  const auto kc = build_kernel_class(s, 500);
  const auto pts = draw(kc.sampler, 2, 300, 5);
  const std::size_t N = kc.cls.size();
  std::vector<double> sums(N, 0.0), dense(N, 0.0), out(N), x(2);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    x = {pts(i, 0), pts(i, 1)};
    kc.functions->accumulate(x, sums);
    kc.functions->evaluate(x, out);
    for (std::size_t j = 0; j < N; ++j) dense[j] += out[j];
    for (double v : out) CHECK(std::abs(v) <= kc.functions->envelope(x) * (1 + 1e-12));
  }
  const auto off = kc.functions->offsets();
  for (std::size_t j = 0; j < N; ++j) CHECK(sums[j] + 300.0 * off[j] == doctest::Approx(dense[j]).epsilon(1e-9));
}

TEST_CASE("kernel: the estimate matches a direct sum") {
  KernelScenario s;
  s.x_law = beta22();
  s.grid_points = 9;
  const std::size_t n = 400;
  const auto kc = build_kernel_class(s, n);
  const auto pts = draw(kc.sampler, 2, n, 8);
  const auto est = kernel_estimate(kc, pts);
  for (std::size_t a = 0; a < 9; ++a) {
    double direct = 0.0;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) direct += kernel_1d(s.kernel, (pts(i, 1) - kc.x_grid[a][0]) / kc.h);
    direct /= static_cast<double>(n) * kc.h;
    CHECK(est[a] == doctest::Approx(direct).epsilon(1e-12));
  }
  // E S_n(x) is a density smoothed by the kernel.
  CHECK(kc.expected[4] == doctest::Approx(1.5).epsilon(0.1));
}

TEST_CASE("kernel: quadrature covariance agrees with Monte Carlo") {
  struct Case {
    KernelFamily family;
    std::size_t d;
  };
  for (Case c : {Case{KernelFamily::density, 1}, Case{KernelFamily::regression, 1}, Case{KernelFamily::cond_cdf, 1},
                 Case{KernelFamily::density, 2}}) {
    KernelScenario s;
    s.d = c.d;
    s.region_lo.assign(c.d, 0.25);
    s.region_hi.assign(c.d, 0.75);
    s.grid_points = c.d == 1 ? 5 : 3;
    s.family = c.family;
    s.y_grid = {0.0, 0.5};
    s.m = RegressionFunction::linear;
    s.noise_sd = 0.5;
    s.x_law = iid_law(std::make_shared<BetaLaw>(2.0, 2.0), c.d);
    s.bandwidth = fixed_h(0.3, 100);
    const auto kc = build_kernel_class(s, 100);
    const auto pts = draw(kc.sampler, c.d + 1, 200000, 11 + c.d);
    const Eigen::MatrixXd mc = mc_covariance(kc.cls, pts);
    CHECK((mc - kc.cov.sigma).cwiseAbs().maxCoeff() < 0.03);
    for (Eigen::Index j = 0; j < mc.rows(); ++j) CHECK(kc.cov.sigma(j, j) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("kernel: class is centered") {
  KernelScenario s;
  s.x_law = beta22();
  s.grid_points = 5;
  const auto kc = build_kernel_class(s, 300);
  const auto pts = draw(kc.sampler, 2, 100000, 3);
  std::vector<double> x(2), out(5), m(5, 0.0), m2(5, 0.0);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    x = {pts(i, 0), pts(i, 1)};
    kc.functions->evaluate(x, out);
    for (int j = 0; j < 5; ++j) {
      m[j] += out[j];
      m2[j] += out[j] * out[j];
    }
  }
  for (int j = 0; j < 5; ++j) {
    const double mean = m[j] / 1e5, se = std::sqrt((m2[j] / 1e5 - mean * mean) / 1e5);
    CHECK(std::abs(mean) < 4 * se);
  }
}

TEST_CASE("kernel: rejections") {
  KernelScenario s;
  s.x_law = beta22();
  s.region_lo = {1.5};
  s.region_hi = {2.0};
  CHECK_THROWS_WITH_AS(build_kernel_class(s, 1000), doctest::Contains("σ̲ = 0 at grid point"), InvalidArgument);
  s.region_lo = {0.0};
  s.region_hi = {1.0};
  CHECK_THROWS_AS(build_kernel_class(s, 2), InvalidArgument);
  s.family = KernelFamily::cond_cdf;
  CHECK_THROWS_AS(build_kernel_class(s, 100), InvalidArgument);
  s.family = KernelFamily::density;
  s.d = 3;
  CHECK_THROWS_AS(build_kernel_class(s, 100), InvalidArgument);
}

// ---------------------------------------------------------------- series

TEST_CASE("series: orthonormal bases") {
  for (Basis b : {Basis::fourier_trig, Basis::legendre}) {
    const QuadratureRule q = gauss_legendre(64, 0.0, 1.0);
    std::vector<double> psi(5);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(5, 5);
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
      basis_1d(b, 5, q.nodes[i], psi);
      const Eigen::Map<Eigen::VectorXd> v(psi.data(), 5);
      G += q.weights[i] * v * v.transpose();
    }
    CHECK((G - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-8);
  }
  SeriesScenario s;
  CHECK(xi_n(s, 5) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
  CHECK(xi_n(s, 1) == 1.0);
  s.basis = Basis::legendre;
  double prev = 0.0;
  for (std::size_t K = 1; K <= 12; ++K) {
    const double xi = xi_n(s, K);
    CHECK(xi >= prev);
    CHECK(xi == doctest::Approx(static_cast<double>(K)).epsilon(1e-12));  // sum (2k+1) at the endpoints
    prev = xi;
  }
}

TEST_CASE("series: B-splines form a partition of unity") {
  std::mt19937_64 e(4);
  std::uniform_real_distribution<double> U;
  for (std::size_t K : {1, 2, 4, 7, 12}) {
    std::vector<double> b(K);
    for (int i = 0; i < 200; ++i) {
      basis_1d(Basis::bspline, K, i == 0 ? 1.0 : U(e), b);
      double sum = 0.0;
      for (double v : b) {
        CHECK(v >= -1e-14);
        sum += v;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("series: fourier K = 5 Gram matrix and alpha") {
  SeriesScenario s;
  s.order = {5.0, 0.0};
  const auto sc = build_series_class(s, 100);
  REQUIRE(sc.K == 5);
  CHECK((sc.A1 - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((sc.A2 - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-8);
  std::vector<double> psi(5);
  for (std::size_t i = 0; i < sc.x_grid.size(); ++i) {
    basis_1d(Basis::fourier_trig, 5, sc.x_grid[i][0], psi);
    const Eigen::Map<Eigen::VectorXd> v(psi.data(), 5);
    CHECK((sc.alpha.row(static_cast<Eigen::Index>(i)).transpose() - v / v.norm()).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("series: unit variance and rank at most K") {
  for (Basis b : {Basis::fourier_trig, Basis::legendre, Basis::bspline}) {
    for (NoiseScale ns : {NoiseScale::homoskedastic, NoiseScale::heteroskedastic}) {
      SeriesScenario s;
      s.basis = b;
      s.noise = ns;
      s.x_law = beta22();
      const auto sc = build_series_class(s, 500);  // K = 8
      CHECK(sc.K == 8);
      for (Eigen::Index j = 0; j < sc.cov.sigma.rows(); ++j) CHECK(sc.cov.sigma(j, j) == doctest::Approx(1.0).epsilon(1e-8));
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(sc.cov.sigma);
      const auto sv = svd.singularValues();
      for (Eigen::Index k = 8; k < sv.size(); ++k) CHECK(sv(k) < 1e-8 * sv(0));
    }
  }
}

TEST_CASE("series: quantile regression") {
  SeriesScenario s;
  s.model = SeriesModel::quantile_regression;
  s.taus = {0.25, 0.5, 0.75};
  s.noise = NoiseScale::heteroskedastic;
  const auto sc = build_series_class(s, 100);  // K = 5
  const std::size_t T = 3, K = sc.K;
  CHECK(sc.cls.size() == 64 * T);
  for (Eigen::Index j = 0; j < sc.cov.sigma.rows(); ++j) CHECK(sc.cov.sigma(j, j) == doctest::Approx(1.0).epsilon(1e-8));

  // Check-function summands: tau = 1/2 gives +-1/2 times psi, and all are centered.
  Engine e(9);
  std::vector<double> x(2), f(T * K), psi(K);
  std::vector<double> m(T, 0.0), m2(T, 0.0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    sc.sampler(e, x);
    sc.cls.family->features(x, f);
    basis_1d(Basis::fourier_trig, K, x[1], psi);
    CHECK(std::abs(std::abs(f[K]) - 0.5 * std::abs(psi[0])) < 1e-15);
    for (std::size_t t = 0; t < T; ++t) {
      const double g = f[t * K] / psi[0];
      CHECK(std::abs(g) <= 1.0);
      m[t] += g;
      m2[t] += g * g;
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    const double mean = m[t] / draws, se = std::sqrt((m2[t] / draws - mean * mean) / draws);
    CHECK(std::abs(mean) < 3 * se);
  }
  // Covariance against Monte Carlo over the same draws.
  const auto pts = draw(sc.sampler, 2, 200000, 10);
  CHECK((mc_covariance(sc.cls, pts) - sc.cov.sigma).cwiseAbs().maxCoeff() < 0.03);
}

TEST_CASE("series: degenerate noise and the 0/0 convention") {
  SeriesScenario s;
  s.noise = NoiseScale::none;
  const auto sc = build_series_class(s, 1000);
  CHECK_FALSE(sc.warnings.empty());
  CHECK(sc.alpha.cwiseAbs().maxCoeff() == 0.0);
  CHECK(series_linear_statistic(sc, 1000, RngPolicy(1)) == 0.0);
  const auto g = gaussian_sup_sample(sc.cov, 10, RngPolicy(2));
  for (double v : g.values) CHECK(v == 0.0);
}

TEST_CASE("series: K = 1 collapse") {
  SeriesScenario s;
  s.order = {1.0, 0.0};
  s.grid_points = 8;
  const auto sc = build_series_class(s, 10000);
  CHECK((sc.cov.sigma - Eigen::MatrixXd::Ones(8, 8)).cwiseAbs().maxCoeff() < 1e-12);

  // The statistic is n^{-1/2} sum eta_i.
  const std::size_t n = 10000;
  Engine e = RngPolicy(3).engine(0);
  std::vector<double> x(2);
  double direct = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sc.sampler(e, x);
    direct += x[0];
  }
  CHECK(series_linear_statistic(sc, n, RngPolicy(3)) == doctest::Approx(direct / 100.0).epsilon(1e-10));

  const std::size_t R = 10000;
  const auto emp = empirical_sup_sample(sc.cls, sc.sampler, n, R, RngPolicy(4));
  const auto gau = gaussian_sup_sample(sc.cov, R, RngPolicy(5));
  CHECK(ks_distance(emp, gau).estimate <= 0.02);
}

TEST_CASE("series: linear statistic matches the dense class") {
  SeriesScenario s;
  s.basis = Basis::legendre;
  s.grid_points = 16;
  s.d = 2;
  const auto sc = build_series_class(s, 64);  // K1 = 4, K = 16
  CHECK(sc.K == 16);
  const std::size_t n = 64;
  Engine e = RngPolicy(6).engine(0);
  std::vector<double> x(3), out(sc.cls.size()), sum(sc.cls.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    sc.sampler(e, x);
    sc.cls.family->evaluate(x, out);
    for (std::size_t j = 0; j < out.size(); ++j) sum[j] += out[j];
  }
  const double best = *std::max_element(sum.begin(), sum.end()) / 8.0;
  CHECK(series_linear_statistic(sc, n, RngPolicy(6)) == doctest::Approx(best).epsilon(1e-10));
  for (Eigen::Index j = 0; j < sc.cov.sigma.rows(); ++j) CHECK(sc.cov.sigma(j, j) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("series: rejections") {
  SeriesScenario s;
  s.model = SeriesModel::quantile_regression;
  s.taus = {1.0};
  CHECK_THROWS_AS(build_series_class(s, 100), InvalidArgument);
  s.taus = {0.5};
  s.noise = NoiseScale::none;
  CHECK_THROWS_AS(build_series_class(s, 100), InvalidArgument);
  s = SeriesScenario{};
  s.d = 3;
  CHECK_THROWS_AS(build_series_class(s, 100), InvalidArgument);
  CHECK_THROWS_AS(xi_n(SeriesScenario{}, 0), InvalidArgument);
}

// ---------------------------------------------------------------- rates

TEST_CASE("rates: predicted rate and slope") {
  const double h = std::pow(10.0, -0.6);
  const double expect = std::pow(std::pow(10.0, 2.4), -1.0 / 6.0) * std::log(1000.0);
  CHECK(std::abs(predicted_rate_kernel(1000, h, 1) / expect - 1.0) < 1e-12);
  CHECK(std::abs(predicted_rate_series(1000, 8.0) / (std::pow(1000.0, -1.0 / 6.0) * 2.0 * std::log(1000.0)) - 1.0) <
        1e-12);
  const std::vector<double> n{100, 400, 1600}, y{0.3, 0.15, 0.075};
  CHECK(loglog_slope(n, y) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("rates: single-point grid is a one-dimensional CLT") {
  KernelScenario s;
  s.x_law = beta22();
  s.region_lo = {0.5};
  s.region_hi = {0.5};
  s.grid_points = 1;
  const std::vector<std::size_t> ns{200, 400, 800};
  const auto t = rate_experiment(s, ns, 2000, RngPolicy(12));
  REQUIRE(t.rows.size() == 3);
  for (const auto& r : t.rows) {
    CHECK(r.ks <= r.ks_conf + 1.0 / std::sqrt(static_cast<double>(r.n)));
    CHECK(r.predicted_rate == doctest::Approx(predicted_rate_kernel(r.n, r.tuning, 1)));
  }
}

TEST_CASE("rates: deterministic across execution modes, and validation") {
  SeriesScenario s;
  s.grid_points = 16;
  const std::vector<std::size_t> ns{50, 100, 200};
  RateOptions serial;
  serial.exec = Execution::serial();
  const auto a = rate_experiment(s, ns, 300, RngPolicy(13), serial);
  const auto b = rate_experiment(s, ns, 300, RngPolicy(13));
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.rows[i].ks == b.rows[i].ks);
  CHECK(a.slope_fit == b.slope_fit);

  const std::vector<std::size_t> short_list{50, 100}, unsorted{50, 200, 100}, tiny{2, 50, 100};
  CHECK_THROWS_AS(rate_experiment(s, short_list, 10, RngPolicy(1)), InvalidArgument);
  CHECK_THROWS_AS(rate_experiment(s, unsorted, 10, RngPolicy(1)), InvalidArgument);
  CHECK_THROWS_AS(rate_experiment(s, tiny, 10, RngPolicy(1)), InvalidArgument);
}
