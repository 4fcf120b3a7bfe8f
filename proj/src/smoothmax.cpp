#include "supgauss/smoothmax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "supgauss/errors.hpp"

namespace supgauss {

namespace {

void check_input(std::span<const double> x, double beta) {
  require(!x.empty(), "smooth max of an empty vector");
  require(beta > 0.0 && std::isfinite(beta), "smooth max needs beta > 0");
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

// P(a < N(0,1) <= b) without cancellation in either tail.
double normal_mass(double a, double b) {
  if (a >= 0.0) return 0.5 * (std::erfc(a / std::numbers::sqrt2) - std::erfc(b / std::numbers::sqrt2));
  if (b <= 0.0) return 0.5 * (std::erfc(-b / std::numbers::sqrt2) - std::erfc(-a / std::numbers::sqrt2));
  return 1.0 - 0.5 * std::erfc(-a / std::numbers::sqrt2) - 0.5 * std::erfc(b / std::numbers::sqrt2);
}

}  // namespace

double smooth_max(std::span<const double> x, double beta) {
  check_input(x, beta);
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(beta * (v - m));
  return m + std::log(s) / beta;
}

double third_derivative_abs_sum(const Eigen::VectorXd& pi) {
  // Diagonal j=k=l terms are pi(1-pi)(1-2pi); the three "two indices equal"
  // patterns each contribute pi_j pi_l |1 - 2 pi_j| summed over l != j; all
  // distinct triples contribute 2 pi_j pi_k pi_l.
  double s = 0.0, p2 = 0.0, p3 = 0.0;
  for (Eigen::Index j = 0; j < pi.size(); ++j) {
    const double v = pi(j);
    s += v * (1.0 - v) * std::abs(1.0 - 2.0 * v);
    p2 += v * v;
    p3 += v * v * v;
  }
  const double distinct = std::max(0.0, 1.0 - 3.0 * p2 + 2.0 * p3);
  return 4.0 * s + 2.0 * distinct;
}

SmoothMaxDerivs smooth_max_derivs(std::span<const double> x, double beta) {
  check_input(x, beta);
  const auto p = static_cast<Eigen::Index>(x.size());
  const double m = *std::max_element(x.begin(), x.end());
  SmoothMaxDerivs d;
  d.pi.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) d.pi(j) = std::exp(beta * (x[static_cast<std::size_t>(j)] - m));
  d.pi /= d.pi.sum();
  d.w = -d.pi * d.pi.transpose();
  d.w.diagonal() += d.pi;
  d.q_sum = third_derivative_abs_sum(d.pi);
  return d;
}

double epsilon_beta_delta(double beta, double delta) {
  require(beta > 0.0 && delta > 0.0, "beta and delta must be positive");
  require(beta * delta > 1.0, "alpha must be positive: beta*delta must exceed 1");
  const double a = beta * beta * delta * delta - 1.0;
  return std::sqrt(std::exp(-a) * (1.0 + a));
}

std::vector<Interval> merge_intervals(std::vector<Interval> set) {
  for (const auto& iv : set)
    require(std::isfinite(iv.lo) && std::isfinite(iv.hi) && iv.lo <= iv.hi, "interval must satisfy lo <= hi");
  std::sort(set.begin(), set.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  for (const auto& iv : set) {
    if (!out.empty() && iv.lo <= out.back().hi)
      out.back().hi = std::max(out.back().hi, iv.hi);
    else
      out.push_back(iv);
  }
  return out;
}

double distance_to_set(std::span<const Interval> set, double t) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& iv : set) {
    if (t < iv.lo)
      d = std::min(d, iv.lo - t);
    else if (t > iv.hi)
      d = std::min(d, t - iv.hi);
    else
      return 0.0;
  }
  return d;
}

IndicatorSmoothing::IndicatorSmoothing(std::vector<Interval> set, double delta, double beta)
    : set_(merge_intervals(std::move(set))), delta_(delta), beta_(beta), epsilon_(0.0) {
  require(!set_.empty(), "smoothed indicator needs a nonempty set");
  epsilon_ = epsilon_beta_delta(beta, delta);

  std::vector<Interval> grown;
  for (const auto& iv : set_) grown.push_back({iv.lo - delta_, iv.hi + delta_});
  grown = merge_intervals(std::move(grown));

  // h rises on [c - delta, c], is flat on each component [c, d] of A^delta and
  // falls on [d, d + delta]; ramps of close components meet at the midpoint.
  auto up = [&](double c, double from, double to) {  // h = 1 - (c - s)/delta
    segments_.push_back({from, to, 1.0 - c / delta_, 1.0 / delta_});
  };
  auto down = [&](double d, double from, double to) {  // h = 1 - (s - d)/delta
    segments_.push_back({from, to, 1.0 + d / delta_, -1.0 / delta_});
  };
  up(grown.front().lo, grown.front().lo - delta_, grown.front().lo);
  for (std::size_t i = 0; i < grown.size(); ++i) {
    segments_.push_back({grown[i].lo, grown[i].hi, 1.0, 0.0});
    if (i + 1 == grown.size()) break;
    const double d = grown[i].hi, c = grown[i + 1].lo;
    if (c - d >= 2.0 * delta_) {
      down(d, d, d + delta_);
      up(c, c - delta_, c);
    } else {
      const double mid = 0.5 * (d + c);
      down(d, d, mid);
      up(c, mid, c);
    }
  }
  down(grown.back().hi, grown.back().hi, grown.back().hi + delta_);
}

double IndicatorSmoothing::ramp(double t) const {
  std::vector<Interval> grown;
  for (const auto& iv : set_) grown.push_back({iv.lo - delta_, iv.hi + delta_});
  return std::max(0.0, 1.0 - distance_to_set(grown, t) / delta_);
}

double IndicatorSmoothing::operator()(double t) const {
  double g = 0.0;
  for (const auto& s : segments_) {
    if (s.v <= s.u) continue;
    const double zu = beta_ * (s.u - t), zv = beta_ * (s.v - t);
    g += (s.a + s.b * t) * normal_mass(zu, zv) + (s.b / beta_) * (normal_pdf(zu) - normal_pdf(zv));
  }
  return std::clamp(g, 0.0, 1.0);
}

double smoothed_indicator(const IndicatorSmoothing& smoothing, double t) { return smoothing(t); }

}  // namespace supgauss
