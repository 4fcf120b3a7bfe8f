#include "supgauss/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "supgauss/errors.hpp"
#include "supgauss/smoothmax.hpp"

namespace supgauss {

namespace {

double inv_q(double q) { return std::isinf(q) ? 0.0 : 1.0 / q; }

std::pair<double, double> mean_and_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace

std::string to_string(const Provenance& p) {
  if (p.kind == Provenance::Kind::analytic) return "analytic";
  return "monte_carlo(seed=" + std::to_string(p.seed) + ", reps=" + std::to_string(p.reps) + ")";
}

double MomentInputs::M_norm(double k) const {
  if (auto it = M_norms.find(k); it != M_norms.end()) return it->second;
  throw InvalidArgument("moment inputs lack ||M||_" + std::to_string(k));
}

double CouplingBudget::term(const std::string& name) const {
  for (const auto& t : terms)
    if (t.name == name) return t.value;
  throw InvalidArgument("no budget term named " + name);
}

double CouplingBudget::prob_bound_clamped() const { return std::clamp(prob_bound, 0.0, 1.0); }

CouplingBudget coupling_budget(const MomentInputs& in, double epsilon, double gamma, double K_q, double c_const,
                                   double C) {
  require(in.q >= 3.0, "q must be at least 3 for the coupling budget");
  require(in.n >= 3, "n must be at least 3");
  require(epsilon > 0.0 && epsilon <= 1.0, "epsilon must lie in (0, 1]");
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  require(in.sigma <= in.b, "sigma must not exceed b");
  require(in.kappa >= 0.0 && in.EG_FF >= 0.0 && in.F_P2 >= 0.0, "moment inputs must be nonnegative");
  require(static_cast<bool>(in.H_profile) && static_cast<bool>(in.phi_profile) && static_cast<bool>(in.tail_fn),
          "H, phi and tail profiles are required");
  const double Mq = std::isinf(in.q) ? in.M_norm(std::numeric_limits<double>::infinity()) : in.M_norm(in.q);
  const double M2 = in.M_norm(2.0);
  require(M2 <= Mq * (1.0 + 1e-12), "||M||_2 must not exceed ||M||_q");

  const double n = static_cast<double>(in.n);
  const double H = in.H_profile(epsilon);
  require(H >= std::log(n) * (1.0 - 1e-12), "H_n(eps) must be at least log n");
  const double phi = in.phi_profile(epsilon);
  require(phi >= 0.0, "phi_n(eps) must be nonnegative");
  const double iq = inv_q(in.q);

  CouplingBudget out;
  out.epsilon = epsilon;
  out.gamma = gamma;
  out.H = H;
  out.terms = {
      {"phi", phi},
      {"eps_term", std::pow(gamma, -iq) * epsilon * in.F_P2},
      {"Mq_term", std::pow(n, -0.5) * std::pow(gamma, -iq) * Mq},
      {"M2_term", std::pow(n, -0.5) * std::pow(gamma, -2.0 * iq) * M2},
      {"FF_term", std::pow(n, -0.25) * std::pow(gamma, -0.5) * std::sqrt(in.EG_FF) * std::sqrt(H)},
      {"kappa_term", std::pow(n, -1.0 / 6.0) * std::pow(gamma, -1.0 / 3.0) * in.kappa * std::pow(H, 2.0 / 3.0)},
  };
  out.Delta_n = 0.0;
  for (const auto& t : out.terms) out.Delta_n += t.value;
  out.coupling_radius = K_q * out.Delta_n;
  const double u = c_const * std::pow(gamma, -1.0 / 3.0) * std::cbrt(n) * std::pow(H, -1.0 / 3.0);
  out.delta_n_tail = 0.25 * in.tail_fn(u);
  out.prob_bound = gamma * (1.0 + out.delta_n_tail) + C * std::log(n) / n;
  out.constants_used = {{"C", C}, {"K_q", K_q}, {"c", c_const}};
  return out;
}

VcBudget vc_class_budget(std::size_t n, double gamma, double q, double b, double sigma, double A, double v,
                         double c_const, double C) {
  require(n >= 3, "n must be at least 3");
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  require(q >= 4.0, "q must be at least 4 for VC-type budgets");
  require(sigma > 0.0, "sigma must be positive");
  require(sigma <= b, "sigma must not exceed b");
  require(A >= std::exp(1.0) && v >= 1.0, "VC constants need A >= e and v >= 1");
  require(A * b / sigma >= std::exp(1.0), "A b / sigma must be at least e");
  const double dn = static_cast<double>(n);
  VcBudget out;
  out.K_n = c_const * v * std::max(std::log(dn), std::log(A * b / sigma));
  const double iq = inv_q(q);
  out.term1 = b * out.K_n / (std::sqrt(gamma) * std::pow(dn, 0.5 - iq));
  out.term2 = std::sqrt(b * sigma) * std::pow(out.K_n, 0.75) / (std::sqrt(gamma) * std::pow(dn, 0.25));
  out.term3 = std::cbrt(b * sigma * sigma * out.K_n * out.K_n) / (std::cbrt(gamma) * std::pow(dn, 1.0 / 6.0));
  out.total = out.term1 + out.term2 + out.term3;
  out.prob_bound = C * (gamma + std::log(dn) / dn);
  out.constants_used = {{"C", C}, {"c", c_const}};
  return out;
}

double SteinMoments::tail(double threshold) const {
  if (reps == 0 || row_max.empty()) return 0.0;
  const auto it = std::upper_bound(row_max.begin(), row_max.end(), threshold);
  const auto k = static_cast<std::size_t>(it - row_max.begin());
  return cube_suffix[k] / static_cast<double>(reps);
}

SteinMoments estimate_stein_moments(const RowSampler& sampler, std::size_t n, std::size_t p, std::size_t reps,
                                    const RngPolicy& rng, const std::optional<Eigen::MatrixXd>& sum_cov,
                                    const Execution& exec) {
  require(n >= 1 && p >= 1, "need n >= 1 and p >= 1");
  require(reps >= 1, "need at least one replication");
  if (sum_cov)
    require(sum_cov->rows() == static_cast<Eigen::Index>(p) && sum_cov->cols() == static_cast<Eigen::Index>(p),
            "covariance must be p x p");
  const auto N = static_cast<Eigen::Index>(n), P = static_cast<Eigen::Index>(p);

  std::vector<Eigen::MatrixXd> gram(sum_cov ? 0 : reps);
  std::vector<double> b1(reps), b2(reps);
  std::vector<double> row_max(reps * n);
  for_each_replication(
      reps, exec, [&] { return Eigen::MatrixXd(N, P); },
      [&](std::size_t r, Eigen::MatrixXd& X) {
        Engine eng = rng.engine(r);
        X.setZero();
        sampler(eng, X);
        const Eigen::MatrixXd S = X.transpose() * X;
        if (sum_cov)
          b1[r] = (S - *sum_cov).cwiseAbs().maxCoeff();
        else
          gram[r] = S;
        b2[r] = X.cwiseAbs().array().cube().colwise().sum().maxCoeff();
        for (Eigen::Index i = 0; i < N; ++i) row_max[r * n + static_cast<std::size_t>(i)] = X.row(i).cwiseAbs().maxCoeff();
      });
  if (!sum_cov) {
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(P, P);
    for (const auto& S : gram) mean += S;
    mean /= static_cast<double>(reps);
    for (std::size_t r = 0; r < reps; ++r) b1[r] = (gram[r] - mean).cwiseAbs().maxCoeff();
  }

  SteinMoments out;
  out.n = n;
  out.p = p;
  out.reps = reps;
  out.provenance = Provenance::monte_carlo(rng.master_seed(), reps);
  std::tie(out.B1, out.B1_se) = mean_and_se(b1);
  std::tie(out.B2, out.B2_se) = mean_and_se(b2);
  std::sort(row_max.begin(), row_max.end());
  out.cube_suffix.assign(row_max.size() + 1, 0.0);
  for (std::size_t k = row_max.size(); k-- > 0;) out.cube_suffix[k] = out.cube_suffix[k + 1] + std::pow(row_max[k], 3);
  out.row_max = std::move(row_max);
  return out;
}

double SteinCouplingTerms::smooth_clamped() const { return std::clamp(prob_bound_smooth, 0.0, 1.0); }
double SteinCouplingTerms::simplified_clamped() const { return std::clamp(prob_bound_simplified, 0.0, 1.0); }

double log_pn(std::size_t p, std::size_t n) { return std::log(static_cast<double>(std::max(p, n))); }

double smooth_max_coupling_bound(double beta, double delta, double B1, double B2, double B3, double C) {
  const double eps = epsilon_beta_delta(beta, delta);
  return (eps + C * beta / delta * (B1 + beta * (B2 + B3))) / (1.0 - eps);
}

double simplified_coupling_bound(double delta, std::size_t n, std::size_t p, double B1, double B2, double B4, double C) {
  require(delta > 0.0, "delta must be positive");
  require(std::max(p, n) >= 3 && n >= 3, "need n >= 3");
  const double L = log_pn(p, n);
  const double dn = static_cast<double>(n);
  return C * ((B1 + (B2 + B4) * L / delta) * L / (delta * delta) + std::log(dn) / dn);
}

namespace {

SteinCouplingTerms assemble(double B1, double B2, double B3, double B4, std::size_t n, std::size_t p, double delta,
                            double beta, double C) {
  SteinCouplingTerms t;
  t.B1 = B1;
  t.B2 = B2;
  t.B3 = B3;
  t.B4 = B4;
  t.n = n;
  t.p = p;
  t.delta = delta;
  t.beta = beta;
  t.C = C;
  t.epsilon = epsilon_beta_delta(beta, delta);
  t.radius_smooth = 2.0 * std::log(static_cast<double>(p)) / beta + 3.0 * delta;
  t.radius_simplified = 16.0 * delta;
  t.prob_bound_smooth = smooth_max_coupling_bound(beta, delta, B1, B2, B3, C);
  t.prob_bound_simplified = simplified_coupling_bound(delta, n, p, B1, B2, B4, C);
  return t;
}

double default_beta(std::size_t n, std::size_t p, double delta) { return 2.0 * log_pn(p, n) / delta; }

void check_stein_args(std::size_t n, std::size_t p, double delta) {
  require(delta > 0.0, "delta must be positive");
  require(p >= 1, "need p >= 1");
  require(n >= 3 && std::max(p, n) >= 3, "need n >= 3");
}

}  // namespace

SteinCouplingTerms stein_coupling_terms(const SteinMoments& m, double delta, std::optional<double> beta, double C) {
  check_stein_args(m.n, m.p, delta);
  const double b = beta.value_or(default_beta(m.n, m.p, delta));
  auto t = assemble(m.B1, m.B2, m.tail(0.5 / b), m.tail(delta / log_pn(m.p, m.n)), m.n, m.p, delta, b, C);
  t.provenance = m.provenance;
  return t;
}

SteinCouplingTerms stein_coupling_terms(double B1, double B2, double B3, double B4, std::size_t n, std::size_t p,
                                        double delta, std::optional<double> beta, double C) {
  check_stein_args(n, p, delta);
  require(B1 >= 0 && B2 >= 0 && B3 >= 0 && B4 >= 0, "B terms must be nonnegative");
  return assemble(B1, B2, B3, B4, n, p, delta, beta.value_or(default_beta(n, p, delta)), C);
}

double yurinskii_bound(double p, double delta, double sum_third_moments) {
  require(p > 0.0 && delta > 0.0 && sum_third_moments > 0.0, "Yurinskii bound needs positive inputs");
  const double B0 = p * sum_third_moments / (delta * delta * delta);
  return B0 * (1.0 + std::abs(std::log(1.0 / B0)) / p);
}

CrossoverReport coupling_crossover(std::span<const std::size_t> n_list, double exponent, double b, double delta,
                                   double C) {
  require(!n_list.empty(), "crossover needs at least one n");
  require(b > 0.0 && delta > 0.0 && exponent > 0.0, "crossover needs positive b, delta and exponent");
  CrossoverReport rep;
  rep.exponent = exponent;
  rep.b = b;
  rep.delta = delta;
  rep.C = C;
  for (std::size_t n : n_list) {
    require(n >= 3, "need n >= 3");
    const double dn = static_cast<double>(n);
    CrossoverRow row;
    row.n = n;
    row.p = static_cast<std::size_t>(std::ceil(std::exp(std::pow(dn, exponent))));
    const double dp = static_cast<double>(row.p);
    // Hoeffding maximal bound over the p^2 products x_ij x_ik / n, each in [-b^2/n, b^2/n].
    row.B1 = b * b * std::sqrt(2.0 * std::log(2.0 * dp * dp) / dn);
    row.B2 = b * b * b / std::sqrt(dn);
    row.B4 = (b / std::sqrt(dn) > delta / log_pn(row.p, n)) ? row.B2 : 0.0;
    row.sum_third = std::pow(dp, 1.5) * b * b * b / std::sqrt(dn);
    row.simplified = simplified_coupling_bound(delta, n, row.p, row.B1, row.B2, row.B4, C);
    row.yurinskii = C * yurinskii_bound(dp, delta, row.sum_third);
    if (!rep.crossover_n && row.simplified < row.yurinskii) rep.crossover_n = n;
    rep.rows.push_back(row);
  }
  return rep;
}

double deviation_bound(double EGn, double sigma, double M2, double Mq, double t, double alpha, double q,
                       std::size_t n, double K_q) {
  require(t >= 1.0, "deviation bound needs t >= 1");
  require(alpha > 0.0, "deviation bound needs alpha > 0");
  require(q >= 2.0, "deviation bound needs q >= 2");
  require(n >= 1, "need n >= 1");
  const double rn = 1.0 / std::sqrt(static_cast<double>(n));
  return (1.0 + alpha) * EGn + K_q * ((sigma + rn * Mq) * std::sqrt(t) + rn * M2 * t / alpha);
}

double deviation_level(double t, double q) {
  require(t >= 1.0, "deviation level needs t >= 1");
  return 1.0 - std::pow(t, -q / 2.0);
}

double maximal_bound(double J_delta, double F_P2, double M2, double delta, std::size_t n) {
  require(delta > 0.0 && delta <= 1.0, "maximal bound needs delta in (0, 1]");
  require(n >= 1, "need n >= 1");
  return J_delta * F_P2 + M2 * J_delta * J_delta / (delta * delta * std::sqrt(static_cast<double>(n)));
}

double maximal_bound_vc(double v, double A, double sigma, double F_P2, double M2, std::size_t n) {
  require(sigma > 0.0 && sigma <= F_P2, "VC maximal bound needs 0 < sigma <= ||F||_{P,2}");
  require(A >= std::exp(1.0) && v >= 1.0, "VC constants need A >= e and v >= 1");
  const double lg = std::log(A * F_P2 / sigma);
  return std::sqrt(v * sigma * sigma * lg) + v * M2 * lg / std::sqrt(static_cast<double>(n));
}

double kolmogorov_conversion(double r1, double r2, double E_Ztilde, double sigma_low, double C_sigma) {
  require(r1 > 0.0 && sigma_low > 0.0, "Kolmogorov conversion needs r1 > 0 and sigma > 0");
  require(r2 >= 0.0 && r2 <= 1.0, "r2 must lie in [0, 1]");
  return C_sigma * r1 * (E_Ztilde + std::sqrt(std::max(1.0, std::log(sigma_low / r1)))) + r2;
}

}  // namespace supgauss
