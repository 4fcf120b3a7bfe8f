// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Each criterion returns a digest of its numeric outputs; the last criterion
// re-runs all of them under another thread cap and compares digests byte for byte.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "supgauss/bands.hpp"
#include "supgauss/bounds.hpp"
#include "supgauss/checks.hpp"
#include "supgauss/funcclass.hpp"
#include "supgauss/numfmt.hpp"
#include "supgauss/parallel.hpp"
#include "supgauss/scenarios.hpp"
#include "supgauss/simulate.hpp"

using namespace supgauss;

namespace {

constexpr std::uint64_t kSeed = 20240611;

struct Outcome {
  bool pass = false;
  std::string detail;
  std::string digest;
};

class Digest {
 public:
  Digest& operator<<(double x) {
    s_ << format_double(x) << ';';
    return *this;
  }
  Digest& operator<<(std::size_t x) {
    s_ << x << ';';
    return *this;
  }
  Digest& operator<<(const std::vector<double>& v) {
    for (double x : v) *this << x;
    return *this;
  }
  std::string str() const { return s_.str(); }

 private:
  std::ostringstream s_;
};

std::string f3(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

RngPolicy stream(int criterion) { return RngPolicy(kSeed).child(static_cast<std::uint64_t>(criterion)); }

Outcome c1_sandwich() {
  const auto r = smooth_max_sandwich(100000, 1000, stream(1));
  Digest d;
  d << r.violations << r.max_slack_ratio;
  return {r.violations == 0,
          std::to_string(r.vectors) + " vectors, " + std::to_string(r.violations) + " violations, max slack ratio " +
              f3(r.max_slack_ratio),
          d.str()};
}

Outcome c2_derivatives() {
  const auto r = derivative_suite(10000, 100, 200, 6, stream(2));
  const bool ok = r.max_pi_sum_error <= 1e-12 && r.max_w_abs_sum <= 2.0 && r.max_q_abs_sum <= 6.0 &&
                  r.max_fd_error_pi < 1e-6 && r.max_fd_error_w < 1e-4;
  Digest d;
  d << r.max_pi_sum_error << r.max_w_abs_sum << r.max_q_abs_sum << r.max_fd_error_pi << r.max_fd_error_w;
  return {ok,
          "|sum pi - 1| " + f3(r.max_pi_sum_error) + ", sum|w| " + f3(r.max_w_abs_sum) + ", sum|q| " +
              f3(r.max_q_abs_sum) + ", fd pi " + f3(r.max_fd_error_pi) + ", fd beta*w " + f3(r.max_fd_error_w),
          d.str()};
}

Outcome c3_indicator() {
  const auto r = indicator_sandwich(0.0, 1.0, 0.2, 10.0, 10000);
  Digest d;
  d << r.violations << r.epsilon;
  return {r.violations == 0,
          std::to_string(r.points) + " points, eps " + f3(r.epsilon) + ", " + std::to_string(r.violations) +
              " violations",
          d.str()};
}

// Smallest subset of columns within e_Q distance < r of every column.
std::size_t exhaustive_cover(const Eigen::MatrixXd& v, const Eigen::VectorXd& w, double r) {
  const auto N = v.cols();
  Eigen::MatrixXd dist(N, N);
  for (Eigen::Index a = 0; a < N; ++a)
    for (Eigen::Index b = 0; b < N; ++b)
      dist(a, b) = std::sqrt((w.array() * (v.col(a) - v.col(b)).array().square()).sum());
  std::size_t best = static_cast<std::size_t>(N);
  for (unsigned mask = 1; mask < (1u << N); ++mask) {
    const auto k = static_cast<std::size_t>(__builtin_popcount(mask));
    if (k >= best) continue;
    bool ok = true;
    for (Eigen::Index j = 0; j < N && ok; ++j) {
      bool hit = false;
      for (Eigen::Index c = 0; c < N && !hit; ++c) hit = ((mask >> c) & 1u) && dist(j, c) < r;
      ok = hit;
    }
    if (ok) best = k;
  }
  return best;
}

DiscretizedClass tabulated(const Eigen::MatrixXd& v) {
  DiscretizedClass c;
  c.family = std::make_shared<MatrixFamily>(v, v.cwiseAbs().rowwise().maxCoeff().array() + 0.05);
  return c;
}

Outcome c4_covering() {
  std::mt19937_64 eng(kSeed + 4);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::size_t bracket_fail = 0, product_fail = 0, comparisons = 0;
  Digest d;
  for (int trial = 0; trial < 100; ++trial) {
    const int N = 2 + trial % 11, m = 1 + trial % 6;
    Eigen::MatrixXd v(m, N);
    for (int a = 0; a < m; ++a)
      for (int j = 0; j < N; ++j) v(a, j) = U(eng);
    const auto cls = tabulated(v);
    const auto Q = DiscreteMeasure::over_atom_indices(static_cast<std::size_t>(m));
    const Eigen::VectorXd env = v.cwiseAbs().rowwise().maxCoeff().array() + 0.05;
    const double Fn = std::sqrt((Q.weights.array() * env.array().square()).sum());
    for (int k = 1; k <= 10; ++k) {
      const double e = k / 10.0;
      const std::size_t greedy = covering_number(cls, Q, e);
      const std::size_t lo = exhaustive_cover(v, Q.weights, e * Fn), hi = exhaustive_cover(v, Q.weights, e * Fn / 2);
      if (greedy < lo || greedy > hi) ++bracket_fail;
      ++comparisons;
      d << greedy;
    }

    // Product class of two random classes on the same atoms.
    const int nf = 1 + trial % 4, ng = 1 + (trial / 4) % 3;
    Eigen::MatrixXd f(m, nf), g(m, ng);
    for (int a = 0; a < m; ++a) {
      for (int j = 0; j < nf; ++j) f(a, j) = U(eng);
      for (int j = 0; j < ng; ++j) g(a, j) = U(eng);
    }
    const auto F = tabulated(f), G = tabulated(g);
    const auto FG = product_class(F, G);
    const auto [R1, R2] = product_reweighted_measures(F, G, Q);
    bool ok = true;
    for (int k = 1; k <= 20; ++k) {
      const double e = k / 20.0;
      const std::size_t lhs = covering_number(FG, Q, std::min(1.0, std::sqrt(2.0) * e));
      std::size_t nF = 0, nG = 0;
      for (const auto* M : {&Q, &R1, &R2}) {
        nF = std::max(nF, covering_number(F, *M, e));
        nG = std::max(nG, covering_number(G, *M, e));
      }
      ok = ok && lhs <= nF * nG;
    }
    if (!ok) ++product_fail;
  }
  return {bracket_fail == 0 && product_fail == 0,
          std::to_string(comparisons - bracket_fail) + "/" + std::to_string(comparisons) +
              " greedy counts within exhaustive nets, product bound held in " + std::to_string(100 - product_fail) +
              "/100 trials",
          d.str()};
}

Outcome c5_gaussian() {
  const std::size_t R = 20000;
  const auto id = CovarianceModel::from_matrix(Eigen::MatrixXd::Identity(2, 2));
  const auto s = gaussian_sup_sample(id, R, stream(5).child("identity"));
  double mean = 0.0, sq = 0.0;
  for (double v : s.values) {
    mean += v;
    sq += v * v;
  }
  mean /= static_cast<double>(R);
  const double se = std::sqrt((sq / static_cast<double>(R) - mean * mean) / static_cast<double>(R));
  const double target = 1.0 / std::sqrt(std::numbers::pi);

  Eigen::Matrix2d rank1;
  rank1 << 1.0, 1.0, 1.0, 1.0;
  const auto deg = gaussian_sup_sample(CovarianceModel::from_matrix(rank1), R, stream(5).child("rank1"));
  // One-dimensional law drawn directly.
  std::mt19937_64 eng(kSeed + 5);
  std::normal_distribution<double> N;
  std::vector<double> one(R);
  for (auto& v : one) v = N(eng);
  std::sort(one.begin(), one.end());
  const double ks = ks_distance(deg.values, one).estimate;

  const bool ok = std::abs(mean - target) <= 3.0 * se && ks <= 0.02;
  Digest d;
  d << mean << se << ks;
  return {ok,
          "E[max] " + f3(mean) + " vs " + f3(target) + " (3 se = " + f3(3 * se) + "), rank-1 KS " + f3(ks), d.str()};
}

Outcome c6_crossover() {
  std::vector<std::size_t> ns;
  for (int k = 8; k <= 16; ++k) ns.push_back(std::size_t{1} << k);
  const auto r = coupling_crossover(ns, 0.2, 1.0, 1.0, 1.0);
  bool dec = true, inc = true;
  Digest d;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    d << r.rows[i].simplified << r.rows[i].yurinskii;
    if (i) {
      dec = dec && r.rows[i].simplified < r.rows[i - 1].simplified;
      inc = inc && r.rows[i].yurinskii > r.rows[i - 1].yurinskii;
    }
  }
  const bool ok = dec && inc && r.crossover_n.has_value();
  std::string detail = std::string("smooth-max bound ") + (dec ? "decreasing" : "NOT decreasing") +
                       ", Yurinskii bound " + (inc ? "increasing" : "NOT increasing") + ", crossover at n = " +
                       (r.crossover_n ? std::to_string(*r.crossover_n) : "none");
  return {ok, detail, d.str()};
}

std::string rate_detail(const RateTable& t) {
  std::string s;
  for (const auto& row : t.rows)
    s += "KS(" + std::to_string(row.n) + ") " + f3(row.ks) + "+-" + f3(row.ks_conf) + ", ";
  return s;
}

bool monotone_ks(const RateTable& t) {
  const auto& a = t.rows.front();
  const auto& b = t.rows.back();
  return b.ks < a.ks && a.ks - b.ks > a.ks_conf + b.ks_conf && b.ks <= 0.1;
}

Outcome c7_kernel_rate() {
  KernelScenario s;
  s.x_law = iid_law(std::make_shared<BetaLaw>(2.0, 2.0), 1);
  s.bandwidth = {1.0, 0.2};
  s.grid_points = 64;
  const std::vector<std::size_t> ns{500, 2000, 8000};
  const auto t = rate_experiment(s, ns, 5000, stream(7));
  Digest d;
  for (const auto& row : t.rows) d << row.ks << row.predicted_rate;
  d << t.slope_fit;
  return {monotone_ks(t), rate_detail(t) + "gap needs to exceed the summed radii", d.str()};
}

Outcome c8_series_rate() {
  SeriesScenario s;
  s.basis = Basis::fourier_trig;
  s.model = SeriesModel::mean_regression;
  s.noise = NoiseScale::homoskedastic;
  s.order = {1.0, -1.0 / 3.0};
  const std::vector<std::size_t> ns{500, 2000, 8000};

  // Rank of the analogue covariance, from its spectrum.
  bool rank_ok = true;
  std::string ranks;
  for (std::size_t n : ns) {
    const auto sc = build_series_class(s, n);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sc.cov.sigma, Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues().maxCoeff();
    const auto rank = (es.eigenvalues().array() > 1e-9 * top).count();
    const auto K = static_cast<std::size_t>(std::ceil(std::cbrt(static_cast<double>(n)) - 1e-9));
    rank_ok = rank_ok && sc.K == K && static_cast<std::size_t>(rank) <= K;
    ranks += (ranks.empty() ? "" : " ") + std::to_string(rank) + "<=" + std::to_string(K);
  }
  const auto t = rate_experiment(s, ns, 5000, stream(8));
  Digest d;
  for (const auto& row : t.rows) d << row.ks << row.predicted_rate;
  d << t.slope_fit;
  return {monotone_ks(t) && rank_ok, rate_detail(t) + "covariance ranks " + ranks, d.str()};
}

Outcome c9_coverage() {
  KernelScenario s;
  s.x_law = iid_law(std::make_shared<BetaLaw>(2.0, 2.0), 1);
  s.bandwidth = {1.0, 1.0 / 3.0};
  CoverageOptions opt;
  opt.side = BandSide::two_sided;
  opt.target = CoverageTarget::exact_centered;
  const auto r = coverage_experiment(s, 0.05, 2000, 500, 4000, stream(9), opt);
  Digest d;
  d << r.empirical << r.c_alpha;
  return {r.empirical >= 0.92 && r.empirical <= 0.975,
          "coverage " + f3(r.empirical) + " (se " + f3(r.binomial_se) + "), c_alpha " + f3(r.c_alpha), d.str()};
}

// Max over sample points x of the fraction of values in [x - eps, x + eps], by two pointers.
double levy_oracle(const std::vector<double>& sorted, double eps) {
  std::size_t best = 0, lo = 0, hi = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    while (sorted[lo] < sorted[i] - eps) ++lo;
    if (hi < i) hi = i;
    while (hi + 1 < sorted.size() && sorted[hi + 1] <= sorted[i] + eps) ++hi;
    best = std::max(best, hi - lo + 1);
  }
  return static_cast<double>(best) / static_cast<double>(sorted.size());
}

Outcome c10_anticoncentration() {
  KernelScenario s;
  s.x_law = iid_law(std::make_shared<BetaLaw>(2.0, 2.0), 1);
  const auto kc = build_kernel_class(s, 2000);
  const double diag_err = (kc.cov.sigma.diagonal().array() - 1.0).abs().maxCoeff();
  const auto sample = gaussian_sup_sample(kc.cov, 100000, stream(10));
  const std::vector<double> eps{0.01, 0.02, 0.05, 0.1, 0.2};
  const auto rows = anticoncentration_table(sample, eps);
  double mean = 0.0;
  for (double v : sample.values) mean += v;
  mean /= static_cast<double>(sample.size());
  bool ok = diag_err < 1e-9;
  std::string detail = "unit diagonal to " + f3(diag_err) + "; ";
  Digest d;
  for (const auto& r : rows) {
    const double levy = levy_oracle(sample.values, r.epsilon);
    const double bound = 3.0 * r.epsilon * (mean + std::sqrt(std::max(1.0, std::log(1.0 / r.epsilon))));
    ok = ok && levy <= bound && std::abs(levy - r.levy) < 1e-12;
    detail += "L(" + f3(r.epsilon) + ") " + f3(levy) + "<=" + f3(bound) + " ";
    d << levy << bound;
  }
  return {ok, detail, d.str()};
}

struct Criterion {
  int id;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, 5, c1_sandwich},    {2, 10, c2_derivatives},      {3, 5, c3_indicator},
      {4, 60, c4_covering},   {5, 10, c5_gaussian},         {6, 5, c6_crossover},
      {7, 600, c7_kernel_rate}, {8, 600, c8_series_rate},   {9, 600, c9_coverage},
      {10, 60, c10_anticoncentration},
  };

  bool all = true;
  std::vector<std::string> digests;
  set_default_thread_cap(1);
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    const Outcome o = c.run();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && secs < c.limit_seconds;
    all = all && pass;
    digests.push_back(o.digest);
    std::printf("%s criterion %d: %s [%.2f s, limit %.0f s]\n", pass ? "PASS" : "FAIL", c.id, o.detail.c_str(), secs,
                c.limit_seconds);
    std::fflush(stdout);
  }

  // Same seed, different thread cap.
  set_default_thread_cap(3);
  std::string mismatched;
  for (std::size_t i = 0; i < criteria.size(); ++i)
    if (criteria[i].run().digest != digests[i]) mismatched += " " + std::to_string(criteria[i].id);
  const bool det = mismatched.empty();
  all = all && det;
  std::printf("%s criterion 11: re-run of criteria 1-10 with thread cap 3 instead of 1 %s\n", det ? "PASS" : "FAIL",
              det ? "reproduced every output byte for byte" : ("differed in criteria" + mismatched).c_str());
  return all ? 0 : 1;
}
