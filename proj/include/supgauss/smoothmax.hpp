#pragma once

// Log-sum-exp smooth maximum, its derivatives, and the Gaussian-smoothed
// interval indicator used to pass from smooth functionals to probabilities.

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace supgauss {

/// beta^{-1} log sum_j exp(beta x_j), evaluated after subtracting max x.
double smooth_max(std::span<const double> x, double beta);

struct SmoothMaxDerivs {
  Eigen::VectorXd pi;  // softmax weights
  Eigen::MatrixXd w;   // pi_j delta_jk - pi_j pi_k
  double q_sum = 0.0;  // sum_{jkl} |q_jkl|, never materialized
};

SmoothMaxDerivs smooth_max_derivs(std::span<const double> x, double beta);

/// sum_{jkl} |q_jkl| from the softmax weights alone, in O(p).
double third_derivative_abs_sum(const Eigen::VectorXd& pi);

/// sqrt(e^{-a}(1 + a)) with a = beta^2 delta^2 - 1; requires beta * delta > 1.
double epsilon_beta_delta(double beta, double delta);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Sorts and merges overlapping intervals.
std::vector<Interval> merge_intervals(std::vector<Interval> set);

/// Distance from t to a finite union of closed intervals.
double distance_to_set(std::span<const Interval> set, double t);

class IndicatorSmoothing {
 public:
  /// Rejects beta * delta <= 1 and empty or malformed sets.
  IndicatorSmoothing(std::vector<Interval> set, double delta, double beta);

  const std::vector<Interval>& set() const { return set_; }
  double delta() const { return delta_; }
  double beta() const { return beta_; }
  double epsilon() const { return epsilon_; }

  /// h(t) = (1 - dist(t, A^delta) / delta)_+.
  double ramp(double t) const;
  /// h convolved with the N(0, beta^{-2}) density, in closed form.
  double operator()(double t) const;

 private:
  struct Segment {
    double u, v;  // h(s) = a + b s on [u, v]
    double a, b;
  };

  std::vector<Interval> set_;
  double delta_;
  double beta_;
  double epsilon_;
  std::vector<Segment> segments_;
};

double smoothed_indicator(const IndicatorSmoothing& smoothing, double t);

}  // namespace supgauss
