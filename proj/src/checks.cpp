#include "supgauss/checks.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "supgauss/errors.hpp"
#include "supgauss/smoothmax.hpp"

namespace supgauss {

SandwichReport smooth_max_sandwich(std::size_t vectors, std::size_t max_p, const RngPolicy& rng,
                                   const Execution& exec) {
  require(vectors >= 1 && max_p >= 1, "need at least one vector of dimension at least one");
  std::vector<double> ratio(vectors);
  std::vector<unsigned char> bad(vectors);
  for_each_replication(
      vectors, exec, [] { return std::vector<double>(); },
      [&](std::size_t r, std::vector<double>& x) {
        Engine eng = rng.engine(r);
        const std::size_t p = std::uniform_int_distribution<std::size_t>(1, max_p)(eng);
        const double beta = std::exp(std::uniform_real_distribution<double>(std::log(0.1), std::log(100.0))(eng));
        const double scale = std::exp(std::uniform_real_distribution<double>(-3.0, 3.0)(eng));
        std::normal_distribution<double> N(0.0, scale);
        x.resize(p);
        for (auto& v : x) v = N(eng);
        const double m = *std::max_element(x.begin(), x.end());
        const double f = smooth_max(x, beta);
        const double slack = std::log(static_cast<double>(p)) / beta;
        bad[r] = (f >= m && f <= m + slack) ? 0 : 1;
        ratio[r] = slack > 0.0 ? (f - m) / slack : (f == m ? 0.0 : 1e300);
      });
  SandwichReport rep;
  rep.vectors = vectors;
  for (std::size_t r = 0; r < vectors; ++r) {
    rep.violations += bad[r];
    rep.max_slack_ratio = std::max(rep.max_slack_ratio, ratio[r]);
  }
  return rep;
}

namespace {

struct DerivResult {
  double pi_err = 0.0, w_sum = 0.0, q_sum = 0.0;
  double fd_pi = 0.0, fd_w = 0.0;
};

void finite_differences(const std::vector<double>& x, double beta, const SmoothMaxDerivs& d, DerivResult& out) {
  const auto p = static_cast<Eigen::Index>(x.size());
  const double h1 = 1e-5, h2 = 1e-4;
  Eigen::VectorXd grad(p);
  Eigen::MatrixXd hess(p, p);
  auto at = [&](std::vector<double> y) { return smooth_max(y, beta); };
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    auto xp = x, xm = x;
    xp[uj] += h1;
    xm[uj] -= h1;
    grad(j) = (at(xp) - at(xm)) / (2 * h1);
    for (Eigen::Index k = 0; k < p; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      auto a = x, b = x, c = x, e = x;
      a[uj] += h2;
      a[uk] += h2;
      b[uj] += h2;
      b[uk] -= h2;
      c[uj] -= h2;
      c[uk] += h2;
      e[uj] -= h2;
      e[uk] -= h2;
      hess(j, k) = (at(a) - at(b) - at(c) + at(e)) / (4 * h2 * h2);
    }
  }
  out.fd_pi = (grad - d.pi).norm() / d.pi.norm();
  // Hessian entries are O(beta); near one-hot weights make a relative norm meaningless.
  out.fd_w = (hess - beta * d.w).norm() / beta;
}

}  // namespace

DerivativeReport derivative_suite(std::size_t draws, std::size_t max_p, std::size_t fd_draws, std::size_t fd_max_p,
                                  const RngPolicy& rng, const Execution& exec) {
  require(max_p >= 1 && fd_max_p >= 2, "dimensions must be at least 1 (2 for finite differences)");
  std::vector<DerivResult> res(draws + fd_draws);
  const RngPolicy main = rng.child("draws"), fd = rng.child("fd");
  for_each_replication(
      draws + fd_draws, exec, [] { return std::vector<double>(); },
      [&](std::size_t r, std::vector<double>& x) {
        const bool is_fd = r >= draws;
        Engine eng = is_fd ? fd.engine(r - draws) : main.engine(r);
        const std::size_t top = is_fd ? fd_max_p : max_p;
        const std::size_t p = std::uniform_int_distribution<std::size_t>(is_fd ? 2 : 1, top)(eng);
        // Finite differences need moderate curvature, so their beta stays in [0.5, 4].
        const double beta = is_fd ? std::uniform_real_distribution<double>(0.5, 4.0)(eng)
                                  : std::exp(std::uniform_real_distribution<double>(std::log(0.1), std::log(100.0))(eng));
        std::normal_distribution<double> N;
        x.resize(p);
        for (auto& v : x) v = N(eng);
        const auto d = smooth_max_derivs(x, beta);
        DerivResult& out = res[r];
        out.pi_err = std::abs(d.pi.sum() - 1.0);
        out.w_sum = d.w.cwiseAbs().sum();
        out.q_sum = d.q_sum;
        if (is_fd) finite_differences(x, beta, d, out);
      });
  DerivativeReport rep;
  rep.draws = draws;
  rep.fd_draws = fd_draws;
  for (std::size_t r = 0; r < res.size(); ++r) {
    const auto& o = res[r];
    rep.max_pi_sum_error = std::max(rep.max_pi_sum_error, o.pi_err);
    rep.max_w_abs_sum = std::max(rep.max_w_abs_sum, o.w_sum);
    rep.max_q_abs_sum = std::max(rep.max_q_abs_sum, o.q_sum);
    if (o.pi_err > 1e-12 || o.w_sum > 2.0 + 1e-12 || o.q_sum > 6.0 + 1e-12) ++rep.violations;
    if (r >= draws) {
      rep.max_fd_error_pi = std::max(rep.max_fd_error_pi, o.fd_pi);
      rep.max_fd_error_w = std::max(rep.max_fd_error_w, o.fd_w);
    }
  }
  return rep;
}

IndicatorReport indicator_sandwich(double lo, double hi, double delta, double beta, std::size_t points) {
  require(points >= 2, "need at least two grid points");
  const IndicatorSmoothing s({{lo, hi}}, delta, beta);
  IndicatorReport rep;
  rep.points = points;
  rep.epsilon = s.epsilon();
  const double eps = rep.epsilon;
  const double a = lo - std::max(1.5, 6.0 * delta), b = hi + std::max(1.5, 6.0 * delta);
  for (std::size_t i = 0; i < points; ++i) {
    const double t = a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1);
    const double g = s(t);
    const double in_a = (t >= lo && t <= hi) ? 1.0 : 0.0;
    const double in_3 = distance_to_set(s.set(), t) <= 3.0 * delta ? 1.0 : 0.0;
    if (!((1.0 - eps) * in_a <= g && g <= eps + (1.0 - eps) * in_3)) ++rep.violations;
  }
  return rep;
}

std::vector<AnticoncentrationRow> anticoncentration_table(const SupSample& sample, std::span<const double> epsilons) {
  double mean = 0.0;
  for (double v : sample.values) mean += v;
  mean /= static_cast<double>(sample.size());
  std::vector<AnticoncentrationRow> rows;
  for (double e : epsilons) {
    require(e > 0.0, "epsilon must be positive");
    AnticoncentrationRow row;
    row.epsilon = e;
    row.levy = levy_concentration(sample, e);
    row.bound = 3.0 * e * (mean + std::sqrt(std::max(1.0, std::log(1.0 / e))));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace supgauss
