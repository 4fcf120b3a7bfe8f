#include "supgauss/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "supgauss/errors.hpp"
#include "supgauss/numfmt.hpp"
#include "supgauss/reference.hpp"

namespace supgauss {

SupSample make_sup_sample(std::vector<double> values, std::string statistic_id, const RngPolicy& rng,
                          std::size_t n) {
  require(!values.empty(), "a sup sample needs at least one value");
  std::sort(values.begin(), values.end());
  return SupSample{std::move(values), std::move(statistic_id), rng, n};
}

std::vector<double> centering_means(const DiscretizedClass& cls, const PointSampler& sampler, std::size_t n,
                                    const RngPolicy& rng, const EmpiricalOptions& options) {
  const std::size_t N = cls.size();
  if (options.centering == Centering::analytic_means) {
    if (cls.centered && cls.means.empty()) return std::vector<double>(N, 0.0);
    require(cls.means.size() == N, "analytic centering needs one mean per function (or a centered class)");
    return cls.means;
  }
  const std::size_t pilot = options.pilot_n ? options.pilot_n : 20 * n;
  Engine eng = rng.child("pilot").engine(0);
  std::vector<double> x(cls.point_dim()), sums(N, 0.0);
  for (std::size_t i = 0; i < pilot; ++i) {
    sampler(eng, x);
    cls.family->accumulate(x, sums);
  }
  const auto off = cls.family->offsets();
  std::vector<double> means(N);
  for (std::size_t j = 0; j < N; ++j)
    means[j] = sums[j] / static_cast<double>(pilot) + (off.empty() ? 0.0 : off[j]);
  return means;
}

namespace {

struct EmpiricalWorkspace {
  std::vector<double> x, sums, feat, feat_sum;
  Eigen::VectorXd projected;
};

}  // namespace

SupSample empirical_sup_sample(const DiscretizedClass& cls, const PointSampler& sampler, std::size_t n,
                               std::size_t R, const RngPolicy& rng, const EmpiricalOptions& options) {
  require(n >= 3, "n must be at least 3");
  require(R >= 1, "need at least one replication");
  require(static_cast<bool>(sampler), "a sampler is required");
  const auto means = centering_means(cls, sampler, n, rng, options);
  const FunctionFamily& fam = *cls.family;
  const std::size_t N = fam.size(), d = fam.point_dim();
  const double dn = static_cast<double>(n), root_n = std::sqrt(dn);

  // Per-function constant: n * (offset_j - mean_j).
  std::vector<double> shift(N);
  const auto off = fam.offsets();
  for (std::size_t j = 0; j < N; ++j) shift[j] = dn * ((off.empty() ? 0.0 : off[j]) - means[j]);

  const Eigen::MatrixXd* coef = fam.coefficients();
  const std::size_t K = coef ? fam.feature_dim() : 0;
  if (coef)
    require(coef->rows() == static_cast<Eigen::Index>(N) && coef->cols() == static_cast<Eigen::Index>(K),
            "coefficient matrix has the wrong shape");

  std::vector<double> out(R);
  for_each_replication(
      R, options.exec,
      [&] {
        EmpiricalWorkspace ws;
        ws.x.resize(d);
        ws.sums.resize(N);
        ws.feat.resize(K);
        ws.feat_sum.resize(K);
        return ws;
      },
      [&](std::size_t r, EmpiricalWorkspace& ws) {
        Engine eng = rng.engine(r);
        if (coef) {
          std::fill(ws.feat_sum.begin(), ws.feat_sum.end(), 0.0);
          for (std::size_t i = 0; i < n; ++i) {
            sampler(eng, ws.x);
            fam.features(ws.x, ws.feat);
            for (std::size_t k = 0; k < K; ++k) ws.feat_sum[k] += ws.feat[k];
          }
          ws.projected = *coef * Eigen::Map<const Eigen::VectorXd>(ws.feat_sum.data(), static_cast<Eigen::Index>(K));
          for (std::size_t j = 0; j < N; ++j) ws.sums[j] = ws.projected(static_cast<Eigen::Index>(j));
        } else {
          std::fill(ws.sums.begin(), ws.sums.end(), 0.0);
          for (std::size_t i = 0; i < n; ++i) {
            sampler(eng, ws.x);
            fam.accumulate(ws.x, ws.sums);
          }
        }
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < N; ++j) {
          const double g = (ws.sums[j] + shift[j]) / root_n;
          best = std::max(best, options.abs_max ? std::abs(g) : g);
        }
        out[r] = best;
      });
  return make_sup_sample(std::move(out), options.statistic_id, rng, n);
}

CovarianceModel CovarianceModel::from_matrix(Eigen::MatrixXd sigma) {
  require(sigma.rows() == sigma.cols() && sigma.rows() > 0, "covariance must be a nonempty square matrix");
  require(sigma.allFinite(), "covariance has non-finite entries");
  const double scale = std::max(sigma.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  require((sigma - sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale, "covariance is not symmetric");
  sigma = 0.5 * (sigma + sigma.transpose()).eval();

  CovarianceModel m;
  const double max_diag = sigma.diagonal().maxCoeff();
  m.sigma = std::move(sigma);
  if (max_diag <= 0.0) {
    require(m.sigma.cwiseAbs().maxCoeff() == 0.0, "covariance has a nonpositive diagonal");
    m.factor = Eigen::MatrixXd::Zero(m.sigma.rows(), m.sigma.cols());
    return m;
  }
  const auto I = Eigen::MatrixXd::Identity(m.sigma.rows(), m.sigma.cols());
  for (double r : {0.0, 1e-12, 1e-10, 1e-8, 1e-6}) {
    const Eigen::MatrixXd shifted = m.sigma + r * max_diag * I;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() != Eigen::Success) continue;
    Eigen::MatrixXd L = llt.matrixL();
    if (!L.allFinite()) continue;
    const double err = (L * L.transpose() - shifted).norm() / shifted.norm();
    if (err > 1e-8) continue;
    m.factor = std::move(L);
    m.repair_shift = r * max_diag;
    return m;
  }
  throw NumericalError("covariance badly conditioned");
}

CovarianceModel CovarianceModel::from_factor(Eigen::MatrixXd factor) {
  require(factor.rows() > 0 && factor.cols() > 0 && factor.allFinite(), "factor must be a finite nonempty matrix");
  CovarianceModel m;
  m.sigma = factor * factor.transpose();
  m.factor = std::move(factor);
  return m;
}

CovarianceModel gaussian_covariance(const DiscretizedClass& cls, const DiscreteMeasure& rule) {
  const EvaluationTable t = tabulate(cls, rule);
  const Eigen::VectorXd mean = t.values * rule.weights;
  Eigen::MatrixXd sigma = t.values * rule.weights.asDiagonal() * t.values.transpose();
  sigma -= mean * mean.transpose();
  return CovarianceModel::from_matrix(std::move(sigma));
}

CovarianceModel gaussian_covariance_mc(const DiscretizedClass& cls, const PointSampler& sampler, std::size_t reps,
                                       const RngPolicy& rng) {
  require(reps >= 2, "Monte Carlo covariance needs at least two draws");
  Eigen::MatrixXd atoms(static_cast<Eigen::Index>(reps), static_cast<Eigen::Index>(cls.point_dim()));
  Engine eng = rng.engine(0);
  std::vector<double> x(cls.point_dim());
  for (std::size_t i = 0; i < reps; ++i) {
    sampler(eng, x);
    for (std::size_t c = 0; c < x.size(); ++c) atoms(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = x[c];
  }
  return gaussian_covariance(cls, DiscreteMeasure::uniform(std::move(atoms), "monte_carlo"));
}

SupSample gaussian_sup_sample(const CovarianceModel& cov, std::size_t R, const RngPolicy& rng,
                              const GaussianOptions& options) {
  require(R >= 1, "need at least one replication");
  const Eigen::MatrixXd& L = cov.factor;
  require(L.rows() > 0 && L.cols() > 0, "covariance model has no factor");
  const Eigen::Index N = L.rows(), r = L.cols();
  // Cholesky factors are lower triangular; skip the zero upper part.
  const bool lower = (r == N) && L.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().isZero(0.0);
  std::vector<double> out(R);
  for_each_replication(
      R, options.exec, [&] { return std::pair<Eigen::VectorXd, Eigen::VectorXd>(Eigen::VectorXd(r), Eigen::VectorXd(N)); },
      [&](std::size_t rep, std::pair<Eigen::VectorXd, Eigen::VectorXd>& ws) {
        Engine eng = rng.engine(rep);
        std::normal_distribution<double> normal;
        for (Eigen::Index k = 0; k < r; ++k) ws.first(k) = normal(eng);
        if (lower)
          ws.second.noalias() = L.triangularView<Eigen::Lower>() * ws.first;
        else
          ws.second.noalias() = L * ws.first;
        out[rep] = options.abs_max ? ws.second.cwiseAbs().maxCoeff() : ws.second.maxCoeff();
      });
  return make_sup_sample(std::move(out), options.statistic_id, rng, 0);
}

KsResult ks_distance(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), "KS distance needs nonempty samples");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() || j < b.size()) {
    double t;
    if (j == b.size() || (i < a.size() && a[i] <= b[j]))
      t = a[i];
    else
      t = b[j];
    while (i < a.size() && a[i] == t) ++i;
    while (j < b.size() && b[j] == t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double m = std::min(na, nb);
  return {d, std::sqrt(std::log(2.0 / 0.05) / (2.0 * m))};
}

KsResult ks_distance(const SupSample& a, const SupSample& b) { return ks_distance(a.values, b.values); }

double quantile_coupling(const SupSample& a, const SupSample& b, double delta) {
  require(!a.values.empty() && !b.values.empty(), "coupling needs nonempty samples");
  require(delta >= 0.0, "coupling tolerance must be nonnegative");
  const std::size_t Ra = a.size(), Rb = b.size();
  std::size_t exceed = 0;
  for (std::size_t i = 1; i <= Ra; ++i) {
    // 1-based rank ceil(i Rb / Ra) in b.
    const std::size_t k = (i * Rb + Ra - 1) / Ra;
    if (std::abs(a.values[i - 1] - b.values[k - 1]) > delta) ++exceed;
  }
  return static_cast<double>(exceed) / static_cast<double>(Ra);
}

double levy_concentration(const SupSample& a, double epsilon) {
  require(!a.values.empty(), "Levy concentration needs a nonempty sample");
  require(epsilon > 0.0, "epsilon must be positive");
  const auto& v = a.values;
  std::size_t lo = 0, hi = 0, best = 0;
  for (std::size_t c = 0; c < v.size(); ++c) {
    while (v[lo] < v[c] - epsilon) ++lo;
    if (hi < c) hi = c;
    while (hi + 1 < v.size() && v[hi + 1] <= v[c] + epsilon) ++hi;
    best = std::max(best, hi - lo + 1);
  }
  return static_cast<double>(best) / static_cast<double>(v.size());
}

double sup_quantile(const SupSample& a, double alpha) {
  require(!a.values.empty(), "quantile of an empty sample");
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
  const double pos = (1.0 - alpha) * static_cast<double>(a.size() - 1);
  // Guard against 0.95 * 99 = 94.05000000000001 style rounding.
  const auto idx = static_cast<std::size_t>(std::ceil(pos - 1e-9));
  return a.values[std::min(idx, a.size() - 1)];
}

void write_sup_sample(std::ostream& out, const SupSample& s) {
  out << "statistic_id,seed,n,R\n";
  out << s.statistic_id << ',' << s.rng.master_seed() << ',' << s.n << ',' << s.size() << '\n';
  out << "value\n";
  for (double v : s.values) out << format_double(v) << '\n';
}

SupSample read_sup_sample(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "statistic_id,seed,n,R") throw InvalidArgument("sup sample: bad header");
  if (!std::getline(in, line)) throw InvalidArgument("sup sample: missing metadata row");
  std::istringstream meta(line);
  std::string id, seed, n, R;
  if (!std::getline(meta, id, ',') || !std::getline(meta, seed, ',') || !std::getline(meta, n, ',') ||
      !std::getline(meta, R))
    throw InvalidArgument("sup sample: malformed metadata row");
  if (!std::getline(in, line) || line != "value") throw InvalidArgument("sup sample: missing value header");
  SupSample s;
  s.statistic_id = id;
  s.rng = RngPolicy(std::stoull(seed));
  s.n = std::stoull(n);
  while (std::getline(in, line))
    if (!line.empty()) s.values.push_back(parse_double(line));
  if (s.values.size() != std::stoull(R)) throw InvalidArgument("sup sample: row count does not match R");
  require(std::is_sorted(s.values.begin(), s.values.end()), "sup sample: values must be sorted");
  return s;
}

namespace reference {

SupSample empirical_sup_sample(const DiscretizedClass& cls, const PointSampler& sampler, std::size_t n,
                               std::size_t R, const RngPolicy& rng, std::span<const double> means, bool abs_max) {
  require(n >= 3, "n must be at least 3");
  const std::size_t N = cls.size();
  require(means.size() == N, "one mean per function is required");
  std::vector<double> x(cls.point_dim()), f(N), sums(N), out(R);
  for (std::size_t r = 0; r < R; ++r) {
    Engine eng = rng.engine(r);
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      sampler(eng, x);
      cls.family->evaluate(x, f);
      for (std::size_t j = 0; j < N; ++j) sums[j] += f[j] - means[j];
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < N; ++j) {
      const double g = sums[j] / std::sqrt(static_cast<double>(n));
      best = std::max(best, abs_max ? std::abs(g) : g);
    }
    out[r] = best;
  }
  return make_sup_sample(std::move(out), "Z_n", rng, n);
}

SupSample gaussian_sup_sample(const CovarianceModel& cov, std::size_t R, const RngPolicy& rng, bool abs_max) {
  const auto N = static_cast<std::size_t>(cov.factor.rows()), r = static_cast<std::size_t>(cov.factor.cols());
  std::vector<double> xi(r), out(R);
  for (std::size_t rep = 0; rep < R; ++rep) {
    Engine eng = rng.engine(rep);
    std::normal_distribution<double> normal;
    for (auto& z : xi) z = normal(eng);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < N; ++j) {
      double y = 0.0;
      for (std::size_t k = 0; k < r; ++k)
        y += cov.factor(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) * xi[k];
      best = std::max(best, abs_max ? std::abs(y) : y);
    }
    out[rep] = best;
  }
  return make_sup_sample(std::move(out), "Z_tilde", rng, 0);
}

}  // namespace reference

}  // namespace supgauss
