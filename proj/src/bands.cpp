#include "supgauss/bands.hpp"

#include <cmath>
#include <limits>

#include "supgauss/errors.hpp"

namespace supgauss {

bool BandResult::contains(std::span<const double> target) const {
  require(target.size() == size(), "target has the wrong length");
  for (std::size_t j = 0; j < size(); ++j)
    if (!(lower[j] <= target[j] && target[j] <= upper[j])) return false;
  return true;
}

double critical_value(const SupSample& gauss, double alpha) { return sup_quantile(gauss, alpha); }

BandResult build_band(std::span<const double> estimate, std::span<const double> sigma_n, double c_alpha,
                      BandSide side, double alpha) {
  require(estimate.size() == sigma_n.size(), "estimate and sigma_n differ in length");
  require(!std::isnan(c_alpha) && c_alpha >= 0.0, "c_alpha must be nonnegative");
  BandResult b;
  b.estimate.assign(estimate.begin(), estimate.end());
  b.sigma_n.assign(sigma_n.begin(), sigma_n.end());
  b.c_alpha = c_alpha;
  b.side = side;
  b.alpha = alpha;
  const std::size_t m = estimate.size();
  b.lower.resize(m);
  b.upper.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    require(sigma_n[j] >= 0.0, "sigma_n must be nonnegative");
    const double half = sigma_n[j] == 0.0 ? 0.0 : c_alpha * sigma_n[j];
    b.lower[j] = estimate[j] - half;
    b.upper[j] = side == BandSide::two_sided ? estimate[j] + half : std::numeric_limits<double>::infinity();
  }
  return b;
}

BandResult kernel_band(const KernelClass& kc, const Eigen::MatrixXd& points, double c_alpha, BandSide side,
                       double alpha) {
  return build_band(kernel_estimate(kc, points), kc.sigma_n, c_alpha, side, alpha);
}

std::vector<double> kernel_truth(const KernelScenario& scenario, const KernelClass& kc) {
  const auto law = scenario.x_law ? scenario.x_law : iid_law(std::make_shared<UniformLaw>(0.0, 1.0), scenario.d);
  require(law->has_density(), "true_function target needs a data law with a density");
  const std::size_t G = scenario.g_count();
  std::vector<double> out;
  out.reserve(kc.x_grid.size() * G);
  for (const auto& x : kc.x_grid) {
    const double p = law->density(x);
    const double m = regression_value(scenario.m, x);
    for (std::size_t g = 0; g < G; ++g) {
      double cond = 1.0;
      if (scenario.family == KernelFamily::regression) {
        cond = m;
      } else if (scenario.family == KernelFamily::cond_cdf) {
        const double y = scenario.y_grid[g];
        cond = scenario.noise_sd == 0.0 ? (m <= y ? 1.0 : 0.0) : normal_cdf((y - m) / scenario.noise_sd);
      }
      out.push_back(cond * p);
    }
  }
  return out;
}

double binomial_se(double p, std::size_t trials) {
  require(trials > 0, "need at least one trial");
  return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

CoverageReport coverage_experiment(const KernelScenario& scenario, double alpha, std::size_t n, std::size_t R_outer,
                                   std::size_t R_inner, const RngPolicy& rng, const CoverageOptions& options) {
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
  require(R_outer >= 1, "need at least one outer replication");
  const KernelClass kc = build_kernel_class(scenario, n);
  std::vector<double> target;
  if (options.target == CoverageTarget::exact_centered) {
    target = kc.expected;
  } else {
    target = kernel_truth(scenario, kc);
  }

  double c = 0.0;
  if (options.c_alpha_override) {
    c = *options.c_alpha_override;
  } else {
    require(R_inner >= 1, "need at least one inner replication");
    GaussianOptions go;
    go.abs_max = options.side == BandSide::two_sided;
    go.exec = options.exec;
    c = critical_value(gaussian_sup_sample(kc.cov, R_inner, rng.child("inner"), go), alpha);
  }

  const RngPolicy outer = rng.child("outer");
  const std::size_t dim = kc.functions->point_dim();
  std::vector<unsigned char> covered(R_outer, 0);
  for_each_replication(
      R_outer, options.exec, [&] { return Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim)); },
      [&](std::size_t r, Eigen::MatrixXd& pts) {
        Engine eng = outer.engine(r);
        std::vector<double> x(dim);
        for (std::size_t i = 0; i < n; ++i) {
          kc.sampler(eng, x);
          for (std::size_t k = 0; k < dim; ++k) pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = x[k];
        }
        covered[r] = kernel_band(kc, pts, c, options.side, alpha).contains(target) ? 1 : 0;
      });

  std::size_t hits = 0;
  for (unsigned char v : covered) hits += v;
  CoverageReport rep;
  rep.nominal = 1.0 - alpha;
  rep.replications = R_outer;
  rep.empirical = static_cast<double>(hits) / static_cast<double>(R_outer);
  rep.binomial_se = binomial_se(rep.empirical, R_outer);
  rep.c_alpha = c;
  return rep;
}

}  // namespace supgauss
