#pragma once

// Closed-form coupling, deviation and maximal-inequality bounds. Every
// universal constant that the bounds leave unspecified is a parameter with
// default 1 and is echoed back in the returned report.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "supgauss/parallel.hpp"
#include "supgauss/rng.hpp"

namespace supgauss {

struct Provenance {
  enum class Kind { analytic, monte_carlo };
  Kind kind = Kind::analytic;
  std::uint64_t seed = 0;
  std::size_t reps = 0;

  static Provenance analytic() { return {}; }
  static Provenance monte_carlo(std::uint64_t seed, std::size_t reps) { return {Kind::monte_carlo, seed, reps}; }
};

std::string to_string(const Provenance& p);

/// Inputs of the general coupling budget.
struct MomentInputs {
  std::size_t n = 0;
  std::size_t p_or_N = 0;
  double sigma = 0.0;
  double b = 0.0;
  double q = 4.0;       // +inf allowed
  double F_P2 = 0.0;    // ||F||_{P,2}
  std::map<double, double> M_norms;  // order k -> ||max_i F(X_i)||_{P,k}
  double kappa = 0.0;
  double EG_FF = 0.0;   // E sup over the product class of |G_n|
  std::function<double(double)> H_profile;    // eps -> log(N(eps) v n)
  std::function<double(double)> phi_profile;  // eps -> phi_n(eps)
  std::function<double(double)> tail_fn;      // u -> P{(F/kappa)^3 1(F/kappa > u)}
  std::map<std::string, Provenance> provenance;

  double M_norm(double k) const;
};

struct BudgetTerm {
  std::string name;
  double value = 0.0;
};

struct CouplingBudget {
  std::vector<BudgetTerm> terms;  // phi, eps_term, Mq_term, M2_term, FF_term, kappa_term
  double Delta_n = 0.0;           // left-to-right sum of terms
  double coupling_radius = 0.0;   // K_q * Delta_n
  double delta_n_tail = 0.0;
  double prob_bound = 0.0;        // raw, may exceed 1
  double epsilon = 0.0;
  double gamma = 0.0;
  double H = 0.0;
  std::map<std::string, double> constants_used;

  double term(const std::string& name) const;
  double prob_bound_clamped() const;
};

CouplingBudget coupling_budget(const MomentInputs& inputs, double epsilon, double gamma, double K_q = 1.0,
                                   double c_const = 1.0, double C = 1.0);

struct VcBudget {
  double K_n = 0.0;
  double term1 = 0.0, term2 = 0.0, term3 = 0.0;
  double total = 0.0;
  double prob_bound = 0.0;
  std::map<std::string, double> constants_used;
};

VcBudget vc_class_budget(std::size_t n, double gamma, double q, double b, double sigma, double A, double v,
                         double c_const = 1.0, double C = 1.0);

// ---- maxima of sums of independent vectors ----

/// Fills X (n x p, row i = X_i) with one independent draw of the whole sample.
using RowSampler = std::function<void(Engine&, Eigen::MatrixXd&)>;

/// Monte Carlo (or exact) summaries behind B1..B4. Row maxima
/// m_i = max_j |X_ij| are kept so B3 and B4 can be evaluated at any threshold.
struct SteinMoments {
  std::size_t n = 0, p = 0;
  double B1 = 0.0, B1_se = 0.0;
  double B2 = 0.0, B2_se = 0.0;
  std::vector<double> row_max;     // sorted ascending, all reps pooled
  std::vector<double> cube_suffix; // cube_suffix[k] = sum_{i >= k} row_max[i]^3
  std::size_t reps = 0;
  Provenance provenance;

  /// sum_i E[m_i^3 1(m_i > threshold)].
  double tail(double threshold) const;
};

/// sum_cov (p x p) is sum_i E[X_i X_i^T]; when absent it is estimated by the
/// pooled average over replications.
SteinMoments estimate_stein_moments(const RowSampler& sampler, std::size_t n, std::size_t p, std::size_t reps,
                                    const RngPolicy& rng, const std::optional<Eigen::MatrixXd>& sum_cov = std::nullopt,
                                    const Execution& exec = Execution::parallel());

struct SteinCouplingTerms {
  double B1 = 0.0, B2 = 0.0, B3 = 0.0, B4 = 0.0;
  double beta = 0.0, delta = 0.0, epsilon = 0.0;
  std::size_t n = 0, p = 0;
  double radius_smooth = 0.0;  // 2 log(p)/beta + 3 delta
  double radius_simplified = 0.0;  // 16 delta
  double prob_bound_smooth = 0.0;  // raw
  double prob_bound_simplified = 0.0;  // raw
  double C = 1.0;
  Provenance provenance;

  double smooth_clamped() const;
  double simplified_clamped() const;
};

/// log(p v n).
double log_pn(std::size_t p, std::size_t n);

/// The smooth-max coupling bound for a given beta (beta * delta > 1).
double smooth_max_coupling_bound(double beta, double delta, double B1, double B2, double B3, double C = 1.0);
double simplified_coupling_bound(double delta, std::size_t n, std::size_t p, double B1, double B2, double B4, double C = 1.0);

/// beta defaults to 2 log(p v n) / delta.
SteinCouplingTerms stein_coupling_terms(const SteinMoments& moments, double delta,
                                        std::optional<double> beta = std::nullopt, double C = 1.0);
SteinCouplingTerms stein_coupling_terms(double B1, double B2, double B3, double B4, std::size_t n, std::size_t p,
                                        double delta, std::optional<double> beta = std::nullopt, double C = 1.0);

/// B0 (1 + |log(1/B0)| / p) with B0 = p delta^{-3} sum_i E|X_i|^3.
double yurinskii_bound(double p, double delta, double sum_third_moments);

struct CrossoverRow {
  std::size_t n = 0, p = 0;
  double B1 = 0.0, B2 = 0.0, B4 = 0.0, sum_third = 0.0;
  double simplified = 0.0;
  double yurinskii = 0.0;
};

struct CrossoverReport {
  std::vector<CrossoverRow> rows;
  std::optional<std::size_t> crossover_n;  // first n with simplified < yurinskii
  double exponent = 0.2, b = 1.0, delta = 1.0, C = 1.0;
};

/// Bounded-coordinate profile X_ij = x_ij / sqrt(n), |x_ij| <= b, with
/// p_n = ceil(exp(n^exponent)).
CrossoverReport coupling_crossover(std::span<const std::size_t> n_list, double exponent = 0.2, double b = 1.0,
                                   double delta = 1.0, double C = 1.0);

// ---- deviation, maximal and Kolmogorov-distance conversions ----

double deviation_bound(double EGn, double sigma, double M2, double Mq, double t, double alpha, double q,
                       std::size_t n, double K_q = 1.0);

/// Level 1 - t^{-q/2} attached to a deviation bound.
double deviation_level(double t, double q);

double maximal_bound(double J_delta, double F_P2, double M2, double delta, std::size_t n);
double maximal_bound_vc(double v, double A, double sigma, double F_P2, double M2, std::size_t n);

double kolmogorov_conversion(double r1, double r2, double E_Ztilde, double sigma_low, double C_sigma = 1.0);

}  // namespace supgauss
