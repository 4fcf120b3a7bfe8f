#include "supgauss/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "supgauss/errors.hpp"
#include "supgauss/quadrature.hpp"

namespace supgauss {

double PowerRule::at(std::size_t n) const {
  require(n >= 1, "rule evaluated at n = 0");
  require(scale > 0.0 && std::isfinite(scale) && std::isfinite(exponent), "rule needs a positive scale");
  return scale * std::pow(static_cast<double>(n), -exponent);
}

namespace {

std::vector<double> axis_grid(double lo, double hi, std::size_t m) {
  if (m == 1) return {0.5 * (lo + hi)};
  std::vector<double> g(m);
  for (std::size_t i = 0; i < m; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(m - 1);
  g.back() = hi;
  return g;
}

/// Row-major tensor grid, first axis slowest.
std::vector<std::vector<double>> tensor_grid(const std::vector<std::vector<double>>& axes) {
  std::vector<std::vector<double>> out;
  if (axes.size() == 1) {
    for (double a : axes[0]) out.push_back({a});
  } else {
    for (double a : axes[0])
      for (double b : axes[1]) out.push_back({a, b});
  }
  return out;
}

struct Node {
  double t[2];
  double w;
};

/// Tensor Gauss-Legendre nodes on a box, with `panels` equal panels per axis.
std::vector<Node> box_rule(const QuadratureRule& unit, std::size_t d, const double* lo, const double* hi,
                           std::size_t panels = 1) {
  std::vector<std::vector<double>> nodes(d), weights(d);
  for (std::size_t a = 0; a < d; ++a) {
    const double width = (hi[a] - lo[a]) / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
      const QuadratureRule r = rescale(unit, lo[a] + width * static_cast<double>(p),
                                       p + 1 == panels ? hi[a] : lo[a] + width * static_cast<double>(p + 1));
      nodes[a].insert(nodes[a].end(), r.nodes.begin(), r.nodes.end());
      weights[a].insert(weights[a].end(), r.weights.begin(), r.weights.end());
    }
  }
  std::vector<Node> out;
  if (d == 1) {
    out.reserve(nodes[0].size());
    for (std::size_t i = 0; i < nodes[0].size(); ++i) out.push_back({{nodes[0][i], 0.0}, weights[0][i]});
  } else {
    out.reserve(nodes[0].size() * nodes[1].size());
    for (std::size_t i = 0; i < nodes[0].size(); ++i)
      for (std::size_t k = 0; k < nodes[1].size(); ++k)
        out.push_back({{nodes[0][i], nodes[1][k]}, weights[0][i] * weights[1][k]});
  }
  return out;
}

double kernel_max(KernelType k) {
  return k == KernelType::epanechnikov ? 0.75 : 1.0 / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

double regression_value(RegressionFunction m, std::span<const double> x) {
  switch (m) {
    case RegressionFunction::zero:
      return 0.0;
    case RegressionFunction::linear: {
      double s = 0.0;
      for (double v : x) s += v;
      return s;
    }
    case RegressionFunction::sine:
      return std::sin(2.0 * std::numbers::pi * x[0]);
  }
  return 0.0;
}

double kernel_1d(KernelType k, double u) {
  if (k == KernelType::epanechnikov) return std::abs(u) < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
  return std::abs(u) < 8.0 ? normal_pdf(u) : 0.0;
}

double kernel_reach(KernelType k) { return k == KernelType::epanechnikov ? 1.0 : 8.0; }

double kernel_l2_squared(KernelType k) {
  return k == KernelType::epanechnikov ? 0.6 : 1.0 / (2.0 * std::sqrt(std::numbers::pi));
}

// ---------------------------------------------------------------- kernel

void KernelScenario::validate() const {
  require(d == 1 || d == 2, "kernel scenarios support d = 1 or d = 2");
  require(region_lo.size() == d && region_hi.size() == d, "region bounds need one entry per dimension");
  for (std::size_t a = 0; a < d; ++a)
    require(std::isfinite(region_lo[a]) && std::isfinite(region_hi[a]) && region_lo[a] <= region_hi[a],
            "region bounds must be finite with lo <= hi");
  require(grid_points >= 1, "x grid must be nonempty");
  require(grid_points == 1 || std::equal(region_lo.begin(), region_lo.end(), region_hi.begin(),
                                         [](double a, double b) { return a < b; }),
          "a grid with more than one point needs lo < hi on every axis");
  require(bandwidth.scale > 0.0, "bandwidth scale must be positive");
  require(bandwidth.exponent > 0.0, "bandwidth must shrink with n (positive exponent)");
  if (family == KernelFamily::cond_cdf) require(!y_grid.empty(), "cond_cdf needs a nonempty y grid");
  require(noise_sd >= 0.0 && std::isfinite(noise_sd), "noise_sd must be finite and nonnegative");
  if (x_law) {
    require(x_law->dim() == d, "data law dimension differs from d");
    require(x_law->has_density(), "data law must have an evaluable density");
  }
}

std::vector<std::vector<double>> KernelScenario::x_grid() const {
  std::vector<std::vector<double>> axes;
  for (std::size_t a = 0; a < d; ++a) axes.push_back(axis_grid(region_lo[a], region_hi[a], grid_points));
  return tensor_grid(axes);
}

std::size_t KernelScenario::g_count() const { return family == KernelFamily::cond_cdf ? y_grid.size() : 1; }

std::size_t KernelScenario::nodes() const {
  if (quad_nodes) return quad_nodes;
  return d == 1 ? 256 : 32;
}

KernelFunctions::KernelFunctions(const KernelScenario& s, double h, std::vector<double> scale,
                                 std::vector<double> mu)
    : d_(s.d),
      grid_points_(s.grid_points),
      g_count_(s.g_count()),
      kernel_(s.kernel),
      family_(s.family),
      y_grid_(s.y_grid),
      lo_(s.d),
      step_(s.d),
      h_(h),
      reach_(kernel_reach(s.kernel) * h),
      scale_(std::move(scale)),
      mu_(std::move(mu)) {
  for (std::size_t a = 0; a < d_; ++a) {
    if (grid_points_ == 1) {
      lo_[a] = 0.5 * (s.region_lo[a] + s.region_hi[a]);
      step_[a] = 1.0;
    } else {
      lo_[a] = s.region_lo[a];
      step_[a] = (s.region_hi[a] - s.region_lo[a]) / static_cast<double>(grid_points_ - 1);
    }
  }
  offsets_.resize(scale_.size());
  max_scale_ = 0.0;
  max_abs_mu_ = 0.0;
  for (std::size_t j = 0; j < scale_.size(); ++j) {
    offsets_[j] = -scale_[j] * mu_[j];
    max_scale_ = std::max(max_scale_, scale_[j]);
    max_abs_mu_ = std::max(max_abs_mu_, std::abs(mu_[j]));
  }
}

double KernelFunctions::g_value(std::size_t g_index, double y) const {
  switch (family_) {
    case KernelFamily::density:
      return 1.0;
    case KernelFamily::regression:
      return y;
    case KernelFamily::cond_cdf:
      return y <= y_grid_[g_index] ? 1.0 : 0.0;
  }
  return 0.0;
}

void KernelFunctions::evaluate(std::span<const double> x, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  accumulate(x, out);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += offsets_[j];
}

double KernelFunctions::envelope(std::span<const double> x) const {
  const double kmax = std::pow(kernel_max(kernel_), static_cast<double>(d_));
  if (family_ == KernelFamily::regression) return max_scale_ * (std::abs(x[0]) * kmax + max_abs_mu_);
  return max_scale_ * std::max(kmax, max_abs_mu_);
}

void KernelFunctions::accumulate(std::span<const double> x, std::span<double> sums) const {
  const double y = x[0];
  // Grid indices within reach on each axis.
  std::size_t first[2] = {0, 0}, last[2] = {0, 0};
  for (std::size_t a = 0; a < d_; ++a) {
    const double t = x[a + 1];
    if (grid_points_ == 1) {
      if (std::abs(t - lo_[a]) >= reach_) return;
      continue;
    }
    const double top = static_cast<double>(grid_points_ - 1);
    const double lo_idx = std::ceil((t - reach_ - lo_[a]) / step_[a]);
    const double hi_idx = std::floor((t + reach_ - lo_[a]) / step_[a]);
    if (hi_idx < 0.0 || lo_idx > top) return;
    first[a] = static_cast<std::size_t>(std::max(0.0, lo_idx));
    last[a] = static_cast<std::size_t>(std::min(top, hi_idx));
    if (first[a] > last[a]) return;
  }
  auto add = [&](std::size_t xi, double k) {
    if (k == 0.0) return;
    const std::size_t base = xi * g_count_;
    for (std::size_t g = 0; g < g_count_; ++g) {
      const double gv = g_value(g, y);
      if (gv != 0.0) sums[base + g] += scale_[base + g] * gv * k;
    }
  };
  const double inv_h = 1.0 / h_;
  if (d_ == 1) {
    for (std::size_t i = first[0]; i <= last[0]; ++i) {
      const double xg = grid_points_ == 1 ? lo_[0] : lo_[0] + step_[0] * static_cast<double>(i);
      add(i, kernel_1d(kernel_, (x[1] - xg) * inv_h));
    }
    return;
  }
  for (std::size_t i = first[0]; i <= last[0]; ++i) {
    const double x0 = grid_points_ == 1 ? lo_[0] : lo_[0] + step_[0] * static_cast<double>(i);
    const double k0 = kernel_1d(kernel_, (x[1] - x0) * inv_h);
    if (k0 == 0.0) continue;
    for (std::size_t k = first[1]; k <= last[1]; ++k) {
      const double x1 = grid_points_ == 1 ? lo_[1] : lo_[1] + step_[1] * static_cast<double>(k);
      add(i * grid_points_ + k, k0 * kernel_1d(kernel_, (x[2] - x1) * inv_h));
    }
  }
}

namespace {

/// E[g_a(Y) | X = t] and E[g_a(Y) g_b(Y) | X = t] for Y = m(t) + s N(0,1).
struct CondMoments {
  KernelFamily family;
  const std::vector<double>* y_grid;
  double s;

  double cdf(double y, double m) const {
    if (s == 0.0) return m <= y ? 1.0 : 0.0;
    return normal_cdf((y - m) / s);
  }
  double first(std::size_t a, double m) const {
    switch (family) {
      case KernelFamily::density:
        return 1.0;
      case KernelFamily::regression:
        return m;
      case KernelFamily::cond_cdf:
        return cdf((*y_grid)[a], m);
    }
    return 0.0;
  }
  double second(std::size_t a, std::size_t b, double m) const {
    switch (family) {
      case KernelFamily::density:
        return 1.0;
      case KernelFamily::regression:
        return m * m + s * s;
      case KernelFamily::cond_cdf:
        return cdf(std::min((*y_grid)[a], (*y_grid)[b]), m);
    }
    return 0.0;
  }
};

}  // namespace

KernelClass build_kernel_class(const KernelScenario& scenario, std::size_t n) {
  scenario.validate();
  require(n >= 3, "n must be at least 3");
  KernelScenario s = scenario;
  if (!s.x_law) s.x_law = iid_law(std::make_shared<UniformLaw>(0.0, 1.0), s.d);
  const double h = s.bandwidth.at(n);
  require(h > 0.0 && std::isfinite(h), "bandwidth must be positive at n");

  const std::size_t d = s.d, G = s.g_count();
  const auto grid = s.x_grid();
  const std::size_t X = grid.size(), N = X * G;
  const double reach = kernel_reach(s.kernel) * h;
  const QuadratureRule unit = gauss_legendre(s.nodes());
  const CondMoments cm{s.family, &s.y_grid, s.noise_sd};
  const DataLaw& law = *s.x_law;

  auto kern = [&](const std::vector<double>& xg, const double* t) {
    double k = 1.0;
    for (std::size_t a = 0; a < d; ++a) k *= kernel_1d(s.kernel, (t[a] - xg[a]) / h);
    return k;
  };
  // Box on which both kernels and the density can be nonzero; false if empty.
  auto overlap = [&](const std::vector<double>& xa, const std::vector<double>& xb, double* lo, double* hi) {
    for (std::size_t a = 0; a < d; ++a) {
      lo[a] = std::max({xa[a] - reach, xb[a] - reach, law.support_lo(a)});
      hi[a] = std::min({xa[a] + reach, xb[a] + reach, law.support_hi(a)});
      if (!(lo[a] < hi[a])) return false;
    }
    return true;
  };

  // First moments mu and cross moments M = E[g g' k k'].
  std::vector<double> mu(N, 0.0);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  double lo[2], hi[2];
  for (std::size_t a = 0; a < X; ++a) {
    if (!overlap(grid[a], grid[a], lo, hi)) continue;
    for (const Node& nd : box_rule(unit, d, lo, hi)) {
      const std::span<const double> t(nd.t, d);
      const double wk = nd.w * kern(grid[a], nd.t) * law.density(t);
      if (wk == 0.0) continue;
      const double m = regression_value(s.m, t);
      for (std::size_t g = 0; g < G; ++g) mu[a * G + g] += wk * cm.first(g, m);
    }
  }
  for (std::size_t a = 0; a < X; ++a) {
    for (std::size_t b = a; b < X; ++b) {
      if (!overlap(grid[a], grid[b], lo, hi)) continue;
      for (const Node& nd : box_rule(unit, d, lo, hi)) {
        const std::span<const double> t(nd.t, d);
        const double wk = nd.w * kern(grid[a], nd.t) * kern(grid[b], nd.t) * law.density(t);
        if (wk == 0.0) continue;
        const double m = regression_value(s.m, t);
        for (std::size_t ga = 0; ga < G; ++ga)
          for (std::size_t gb = 0; gb < G; ++gb)
            M(static_cast<Eigen::Index>(a * G + ga), static_cast<Eigen::Index>(b * G + gb)) +=
                wk * cm.second(ga, gb, m);
      }
      if (b != a)
        for (std::size_t ga = 0; ga < G; ++ga)
          for (std::size_t gb = 0; gb < G; ++gb)
            M(static_cast<Eigen::Index>(b * G + gb), static_cast<Eigen::Index>(a * G + ga)) =
                M(static_cast<Eigen::Index>(a * G + ga), static_cast<Eigen::Index>(b * G + gb));
    }
  }

  const double hd = std::pow(h, static_cast<double>(d));
  const double dn = static_cast<double>(n);
  std::vector<double> raw_var(N);
  double max_var = 0.0;
  for (std::size_t j = 0; j < N; ++j) {
    raw_var[j] = std::max(0.0, M(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) - mu[j] * mu[j]);
    max_var = std::max(max_var, raw_var[j]);
  }

  KernelClass kc;
  kc.h = h;
  kc.n = n;
  kc.x_grid = grid;
  kc.mu = mu;
  kc.scale.resize(N);
  kc.sigma_n.resize(N);
  kc.expected.resize(N);
  for (std::size_t j = 0; j < N; ++j) {
    if (s.normalization == Normalization::studentized) {
      if (!(raw_var[j] > 1e-14 * max_var) || raw_var[j] == 0.0)
        throw InvalidArgument("σ̲ = 0 at grid point " + std::to_string(j / G));
      kc.scale[j] = 1.0 / std::sqrt(raw_var[j]);
    } else {
      kc.scale[j] = 1.0 / std::sqrt(hd);
    }
    kc.sigma_n[j] = std::sqrt(raw_var[j] / dn) / hd;
    kc.expected[j] = mu[j] / hd;
  }

  Eigen::MatrixXd sigma(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  for (std::size_t j = 0; j < N; ++j)
    for (std::size_t k = 0; k < N; ++k) {
      const auto ji = static_cast<Eigen::Index>(j), ki = static_cast<Eigen::Index>(k);
      sigma(ji, ki) = kc.scale[j] * kc.scale[k] * (M(ji, ki) - mu[j] * mu[k]);
    }
  kc.cov = CovarianceModel::from_matrix(std::move(sigma));

  kc.functions = std::make_shared<KernelFunctions>(s, h, kc.scale, mu);
  kc.cls.family = kc.functions;
  kc.cls.centered = true;

  const auto law_ptr = s.x_law;
  const auto family = s.family;
  const auto mfun = s.m;
  const double noise = s.noise_sd;
  kc.sampler = [law_ptr, family, mfun, noise, d](Engine& eng, std::span<double> out) {
    law_ptr->sample(eng, out.subspan(1, d));
    if (family == KernelFamily::density) {
      out[0] = 0.0;
      return;
    }
    std::normal_distribution<double> z;
    out[0] = regression_value(mfun, out.subspan(1, d)) + noise * z(eng);
  };
  return kc;
}

std::vector<double> kernel_estimate(const KernelClass& kc, const Eigen::MatrixXd& points) {
  const std::size_t N = kc.scale.size();
  const std::size_t dim = kc.functions->point_dim();
  require(points.cols() == static_cast<Eigen::Index>(dim), "points have the wrong dimension");
  require(points.rows() > 0, "need at least one point");
  std::vector<double> sums(N, 0.0), x(dim);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (std::size_t c = 0; c < dim; ++c) x[c] = points(i, static_cast<Eigen::Index>(c));
    kc.functions->accumulate(x, sums);
  }
  const double denom = static_cast<double>(points.rows()) * std::pow(kc.h, static_cast<double>(kc.x_grid[0].size()));
  for (std::size_t j = 0; j < N; ++j) sums[j] /= kc.scale[j] * denom;
  return sums;
}

// ---------------------------------------------------------------- series

double noise_scale(NoiseScale s, std::span<const double> x) {
  switch (s) {
    case NoiseScale::homoskedastic:
      return 1.0;
    case NoiseScale::heteroskedastic:
      return 0.5 + x[0];
    case NoiseScale::none:
      return 0.0;
  }
  return 0.0;
}

void basis_1d(Basis basis, std::size_t K, double x, std::span<double> out) {
  switch (basis) {
    case Basis::fourier_trig: {
      const double r2 = std::numbers::sqrt2;
      out[0] = 1.0;
      for (std::size_t k = 1; k < K; ++k) {
        const double freq = 2.0 * std::numbers::pi * static_cast<double>((k + 1) / 2) * x;
        out[k] = r2 * (k % 2 ? std::cos(freq) : std::sin(freq));
      }
      return;
    }
    case Basis::legendre: {
      const double u = 2.0 * x - 1.0;
      double p0 = 1.0, p1 = u;
      for (std::size_t k = 0; k < K; ++k) {
        double pk;
        if (k == 0) {
          pk = 1.0;
        } else if (k == 1) {
          pk = u;
        } else {
          const double kk = static_cast<double>(k);
          pk = ((2.0 * kk - 1.0) * u * p1 - (kk - 1.0) * p0) / kk;
          p0 = p1;
          p1 = pk;
        }
        out[k] = std::sqrt(2.0 * static_cast<double>(k) + 1.0) * pk;
      }
      return;
    }
    case Basis::bspline: {
      // Clamped uniform knots, degree min(3, K - 1).
      const std::size_t p = std::min<std::size_t>(3, K - 1);
      const std::size_t spans = K - p;
      std::vector<double> knots;
      for (std::size_t i = 0; i <= p; ++i) knots.push_back(0.0);
      for (std::size_t i = 1; i < spans; ++i) knots.push_back(static_cast<double>(i) / static_cast<double>(spans));
      for (std::size_t i = 0; i <= p; ++i) knots.push_back(1.0);
      const double xc = std::clamp(x, 0.0, 1.0);
      std::vector<double> b(knots.size() - 1, 0.0);
      for (std::size_t i = 0; i + 1 < knots.size(); ++i)
        if (knots[i] <= xc && xc < knots[i + 1]) b[i] = 1.0;
      if (xc >= 1.0) b[K - 1] = 1.0;  // right end belongs to the last span
      for (std::size_t deg = 1; deg <= p; ++deg) {
        for (std::size_t i = 0; i + deg + 1 < knots.size(); ++i) {
          double v = 0.0;
          const double l = knots[i + deg] - knots[i], r = knots[i + deg + 1] - knots[i + 1];
          if (l > 0.0) v += (xc - knots[i]) / l * b[i];
          if (r > 0.0) v += (knots[i + deg + 1] - xc) / r * b[i + 1];
          b[i] = v;
        }
      }
      for (std::size_t k = 0; k < K; ++k) out[k] = b[k];
      return;
    }
  }
}

void basis_eval(Basis basis, std::size_t K1, std::size_t d, std::span<const double> x, std::span<double> out) {
  if (d == 1) {
    basis_1d(basis, K1, x[0], out);
    return;
  }
  double a[512], b[512];
  require(K1 <= 512, "basis order too large");
  basis_1d(basis, K1, x[0], std::span<double>(a, K1));
  basis_1d(basis, K1, x[1], std::span<double>(b, K1));
  for (std::size_t i = 0; i < K1; ++i)
    for (std::size_t k = 0; k < K1; ++k) out[i * K1 + k] = a[i] * b[k];
}

void SeriesScenario::validate() const {
  require(d == 1 || d == 2, "series scenarios support d = 1 or d = 2");
  require(grid_points >= 1, "x grid must be nonempty");
  require(order.scale > 0.0, "order scale must be positive");
  if (model == SeriesModel::quantile_regression) {
    require(!taus.empty(), "quantile regression needs a nonempty tau grid");
    for (double t : taus) require(t > 0.0 && t < 1.0, "every tau must lie in (0, 1)");
    require(noise != NoiseScale::none, "quantile regression needs a positive noise scale");
  }
  if (x_law) {
    require(x_law->dim() == d, "data law dimension differs from d");
    require(x_law->has_density(), "data law must have an evaluable density");
    for (std::size_t a = 0; a < d; ++a)
      require(x_law->support_lo(a) >= 0.0 && x_law->support_hi(a) <= 1.0, "series data law must live in [0,1]^d");
  }
}

std::size_t SeriesScenario::order_at(std::size_t n) const {
  const double v = order.at(n);
  require(std::isfinite(v) && v < 1e6, "basis order is not finite");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(v - 1e-9)));
}

std::vector<std::vector<double>> SeriesScenario::x_grid() const {
  std::vector<std::vector<double>> axes(d, axis_grid(0.0, 1.0, grid_points));
  return tensor_grid(axes);
}

SeriesFunctions::SeriesFunctions(const SeriesScenario& s, std::size_t K1, Eigen::MatrixXd coefficients,
                                 double envelope_bound)
    : basis_(s.basis),
      d_(s.d),
      K1_(K1),
      K_(s.d == 1 ? K1 : K1 * K1),
      model_(s.model),
      taus_(s.taus),
      coef_(std::move(coefficients)),
      envelope_bound_(envelope_bound) {}

void SeriesFunctions::features(std::span<const double> x, std::span<double> out) const {
  basis_eval(basis_, K1_, d_, x.subspan(1, d_), out.subspan(0, K_));
  if (model_ == SeriesModel::mean_regression) {
    for (std::size_t k = 0; k < K_; ++k) out[k] *= x[0];
    return;
  }
  for (std::size_t m = taus_.size(); m-- > 0;) {
    const double g = taus_[m] - (x[0] <= taus_[m] ? 1.0 : 0.0);
    for (std::size_t k = 0; k < K_; ++k) out[m * K_ + k] = g * out[k];
  }
}

void SeriesFunctions::evaluate(std::span<const double> x, std::span<double> out) const {
  Eigen::VectorXd f(coef_.cols());
  features(x, std::span<double>(f.data(), static_cast<std::size_t>(f.size())));
  Eigen::Map<Eigen::VectorXd>(out.data(), coef_.rows()) = coef_ * f;
}

double SeriesFunctions::envelope(std::span<const double> x) const {
  std::vector<double> psi(K_);
  basis_eval(basis_, K1_, d_, x.subspan(1, d_), psi);
  double norm = 0.0;
  for (double v : psi) norm += v * v;
  const double g = model_ == SeriesModel::mean_regression ? std::abs(x[0]) : 1.0;
  return envelope_bound_ * std::sqrt(norm) * g;
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

SeriesClass build_series_class(const SeriesScenario& scenario, std::size_t n) {
  scenario.validate();
  require(n >= 3, "n must be at least 3");
  SeriesScenario s = scenario;
  if (!s.x_law) s.x_law = iid_law(std::make_shared<UniformLaw>(0.0, 1.0), s.d);
  const std::size_t K1 = s.order_at(n);
  require(K1 >= 1, "basis order must be at least 1");
  const std::size_t d = s.d, K = d == 1 ? K1 : K1 * K1;
  const auto Ki = static_cast<Eigen::Index>(K);

  // Quadrature moments: G = E[psi psi'], W = E[s^2 psi psi'], J = E[psi psi' / s].
  const std::size_t nodes = s.quad_nodes ? s.quad_nodes : (d == 1 ? 256 : 48);
  std::size_t panels = 1;
  if (s.basis == Basis::bspline) panels = K1 - std::min<std::size_t>(3, K1 - 1);
  const QuadratureRule unit = gauss_legendre(std::max<std::size_t>(16, nodes / panels));
  double lo[2], hi[2];
  for (std::size_t a = 0; a < d; ++a) {
    lo[a] = s.x_law->support_lo(a);
    hi[a] = s.x_law->support_hi(a);
  }
  // Panels follow the knots only when the law covers [0,1]; otherwise they are just a composite rule.
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(Ki, Ki), W = G, J = G;
  Eigen::VectorXd psi(Ki);
  for (const Node& nd : box_rule(unit, d, lo, hi, panels)) {
    const std::span<const double> t(nd.t, d);
    const double w = nd.w * s.x_law->density(t);
    if (w == 0.0) continue;
    basis_eval(s.basis, K1, d, t, std::span<double>(psi.data(), K));
    const Eigen::MatrixXd outer = psi * psi.transpose();
    const double sc = noise_scale(s.noise, t);
    G += w * outer;
    W += w * sc * sc * outer;
    if (sc > 0.0) J += (w / sc) * outer;
  }
  G = 0.5 * (G + G.transpose());

  SeriesClass sc;
  sc.K = K;
  sc.n = n;
  sc.x_grid = s.x_grid();
  const std::size_t X = sc.x_grid.size(), T = s.tau_count();

  const Eigen::FullPivLU<Eigen::MatrixXd> g_lu(G);
  if (!g_lu.isInvertible()) throw NumericalError("E[psi psi'] is singular");

  // Feature covariance and the per-tau normalizing matrices.
  Eigen::MatrixXd feat_cov;
  std::vector<Eigen::MatrixXd> A1(T), A2(T);
  if (s.model == SeriesModel::mean_regression) {
    feat_cov = W;
    A1[0] = g_lu.inverse();
    A2[0] = psd_sqrt(W) * A1[0];
  } else {
    const Eigen::FullPivLU<Eigen::MatrixXd> j_lu(J);
    if (!j_lu.isInvertible()) throw NumericalError("E[psi psi' / s] is singular");
    const Eigen::MatrixXd Jinv = j_lu.inverse();
    const Eigen::MatrixXd Gh = psd_sqrt(G);
    Eigen::MatrixXd CT(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(T));
    for (std::size_t a = 0; a < T; ++a) {
      for (std::size_t b = 0; b < T; ++b)
        CT(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
            std::min(s.taus[a], s.taus[b]) - s.taus[a] * s.taus[b];
      // The density factor phi(Phi^{-1}(tau)) of the Jacobian cancels in alpha.
      const double dens = normal_pdf(normal_quantile(s.taus[a]));
      A1[a] = Jinv / dens;
      A2[a] = std::sqrt(s.taus[a] * (1.0 - s.taus[a])) * Gh * A1[a];
    }
    feat_cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(T * K), static_cast<Eigen::Index>(T * K));
    for (std::size_t a = 0; a < T; ++a)
      for (std::size_t b = 0; b < T; ++b)
        feat_cov.block(static_cast<Eigen::Index>(a * K), static_cast<Eigen::Index>(b * K), Ki, Ki) =
            CT(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * G;
  }
  sc.A1 = A1[0];
  sc.A2 = A2[0];
  sc.Omega = feat_cov;

  // alpha rows, one per (x, tau), and the coefficient matrix over features.
  const auto rows = static_cast<Eigen::Index>(X * T);
  sc.alpha = Eigen::MatrixXd::Zero(rows, Ki);
  Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(T * K));
  std::vector<double> denom(X * T);
  double max_denom = 0.0;
  for (std::size_t xi = 0; xi < X; ++xi) {
    basis_eval(s.basis, K1, d, sc.x_grid[xi], std::span<double>(psi.data(), K));
    for (std::size_t m = 0; m < T; ++m) {
      denom[xi * T + m] = (A2[m] * psi).norm();
      max_denom = std::max(max_denom, denom[xi * T + m]);
    }
  }
  std::size_t zero_count = 0;
  for (std::size_t xi = 0; xi < X; ++xi) {
    basis_eval(s.basis, K1, d, sc.x_grid[xi], std::span<double>(psi.data(), K));
    for (std::size_t m = 0; m < T; ++m) {
      const auto r = static_cast<Eigen::Index>(xi * T + m);
      const double den = denom[xi * T + m];
      if (den == 0.0 || den <= 1e-12 * max_denom) {
        ++zero_count;  // 0/0 = 0
        continue;
      }
      sc.alpha.row(r) = (A1[m] * psi / den).transpose();
      coef.block(r, static_cast<Eigen::Index>(m * K), 1, Ki) = sc.alpha.row(r);
    }
  }
  if (zero_count)
    sc.warnings.push_back("|A2 psi(x)| = 0 at " + std::to_string(zero_count) +
                          " grid point(s); alpha set to 0 there (0/0 = 0)");

  double env = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) env = std::max(env, sc.alpha.row(r).norm());

  Eigen::MatrixXd factor = coef * psd_sqrt(feat_cov);
  sc.cov = CovarianceModel::from_factor(std::move(factor));

  sc.cls.family = std::make_shared<SeriesFunctions>(s, K1, std::move(coef), env);
  sc.cls.centered = true;

  const auto law_ptr = s.x_law;
  const auto model = s.model;
  const auto noise = s.noise;
  sc.sampler = [law_ptr, model, noise, d](Engine& eng, std::span<double> out) {
    law_ptr->sample(eng, out.subspan(1, d));
    if (model == SeriesModel::quantile_regression) {
      out[0] = std::uniform_real_distribution<double>(0.0, 1.0)(eng);
    } else {
      const double z = std::normal_distribution<double>()(eng);
      out[0] = noise_scale(noise, out.subspan(1, d)) * z;
    }
  };
  return sc;
}

double series_linear_statistic(const SeriesClass& sc, std::size_t n, const RngPolicy& rng) {
  require(n >= 3, "n must be at least 3");
  const FunctionFamily& fam = *sc.cls.family;
  const Eigen::MatrixXd& coef = *fam.coefficients();
  Engine eng = rng.engine(0);
  std::vector<double> x(fam.point_dim());
  Eigen::VectorXd f(coef.cols()), total = Eigen::VectorXd::Zero(coef.cols());
  for (std::size_t i = 0; i < n; ++i) {
    sc.sampler(eng, x);
    fam.features(x, std::span<double>(f.data(), static_cast<std::size_t>(f.size())));
    total += f;
  }
  return (coef * total).maxCoeff() / std::sqrt(static_cast<double>(n));
}

double series_linear_statistic(const SeriesScenario& scenario, std::size_t n, const RngPolicy& rng) {
  return series_linear_statistic(build_series_class(scenario, n), n, rng);
}

double xi_n(const SeriesScenario& scenario, std::size_t K1) {
  require(K1 >= 1, "K must be at least 1");
  std::vector<double> psi(K1);
  double best = 0.0;
  for (std::size_t i = 0; i <= 1000; ++i) {
    basis_1d(scenario.basis, K1, static_cast<double>(i) / 1000.0, psi);
    double norm = 0.0;
    for (double v : psi) norm += v * v;
    best = std::max(best, norm);
  }
  // |psi(x)|^2 factorizes over axes for tensor products.
  return std::max(1.0, std::pow(std::sqrt(best), static_cast<double>(scenario.d)));
}

// ---------------------------------------------------------------- rates

double predicted_rate_kernel(std::size_t n, double h, std::size_t d) {
  const double dn = static_cast<double>(n);
  return std::pow(dn * std::pow(h, static_cast<double>(d)), -1.0 / 6.0) * std::log(dn);
}

double predicted_rate_series(std::size_t n, double xi) {
  const double dn = static_cast<double>(n);
  return std::pow(dn, -1.0 / 6.0) * std::cbrt(xi) * std::log(dn);
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "slope needs at least two paired points");
  const std::size_t m = x.size();
  double mx = 0.0, my = 0.0;
  std::vector<double> lx(m), ly(m);
  for (std::size_t i = 0; i < m; ++i) {
    require(x[i] > 0.0, "log-log slope needs positive abscissae");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(std::max(y[i], std::numeric_limits<double>::min()));
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  require(sxx > 0.0, "slope needs distinct abscissae");
  return sxy / sxx;
}

namespace {

void check_n_list(std::span<const std::size_t> n_list, std::size_t R) {
  require(n_list.size() >= 3, "n_list needs at least three sizes");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    require(n_list[i] >= 3, "n must be at least 3");
    if (i) require(n_list[i] > n_list[i - 1], "n_list must be increasing");
  }
  require(R >= 2, "need at least two replications");
}

template <class Build, class Rate>
RateTable run_rates(std::span<const std::size_t> n_list, std::size_t R, const RngPolicy& rng,
                    const RateOptions& options, Build&& build, Rate&& rate) {
  RateTable table;
  std::vector<double> ns, ks;
  for (std::size_t n : n_list) {
    const auto built = build(n);
    const RngPolicy sub = rng.child(static_cast<std::uint64_t>(n));
    EmpiricalOptions eo;
    eo.abs_max = options.abs_max;
    eo.exec = options.exec;
    GaussianOptions go;
    go.abs_max = options.abs_max;
    go.exec = options.exec;
    const SupSample emp = empirical_sup_sample(built.cls, built.sampler, n, R, sub.child("empirical"), eo);
    const SupSample gau = gaussian_sup_sample(built.cov, R, sub.child("gauss"), go);
    const KsResult k = ks_distance(emp, gau);
    RateRow row;
    row.n = n;
    row.ks = k.estimate;
    row.ks_conf = k.conf_radius;
    rate(n, built, row);
    table.rows.push_back(row);
    ns.push_back(static_cast<double>(n));
    ks.push_back(k.estimate);
  }
  table.slope_fit = loglog_slope(ns, ks);
  return table;
}

}  // namespace

RateTable rate_experiment(const KernelScenario& scenario, std::span<const std::size_t> n_list, std::size_t R,
                          const RngPolicy& rng, const RateOptions& options) {
  check_n_list(n_list, R);
  scenario.validate();
  return run_rates(
      n_list, R, rng, options, [&](std::size_t n) { return build_kernel_class(scenario, n); },
      [&](std::size_t n, const KernelClass& kc, RateRow& row) {
        row.tuning = kc.h;
        row.predicted_rate = predicted_rate_kernel(n, kc.h, scenario.d);
      });
}

RateTable rate_experiment(const SeriesScenario& scenario, std::span<const std::size_t> n_list, std::size_t R,
                          const RngPolicy& rng, const RateOptions& options) {
  check_n_list(n_list, R);
  scenario.validate();
  return run_rates(
      n_list, R, rng, options, [&](std::size_t n) { return build_series_class(scenario, n); },
      [&](std::size_t n, const SeriesClass& sc, RateRow& row) {
        row.tuning = xi_n(scenario, scenario.order_at(n));
        row.predicted_rate = predicted_rate_series(n, row.tuning);
        (void)sc;
      });
}

}  // namespace supgauss
