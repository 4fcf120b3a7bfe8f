#include "supgauss/laws.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/special_functions/erf.hpp>

#include "supgauss/errors.hpp"

namespace supgauss {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, "normal quantile needs p in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

namespace {

std::string fmt(double v) {
  std::string s = std::to_string(v);
  s.erase(s.find_last_not_of('0') + 1);
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

}  // namespace

UniformLaw::UniformLaw(double lo, double hi) : lo_(lo), hi_(hi) {
  require(lo < hi, "uniform law needs lo < hi");
}
double UniformLaw::sample(Engine& eng) const { return std::uniform_real_distribution<double>(lo_, hi_)(eng); }
double UniformLaw::density(double x) const { return (x >= lo_ && x <= hi_) ? 1.0 / (hi_ - lo_) : 0.0; }
std::string UniformLaw::name() const { return "uniform(" + fmt(lo_) + "," + fmt(hi_) + ")"; }

BetaLaw::BetaLaw(double a, double b) : a_(a), b_(b) {
  require(a > 0.0 && b > 0.0, "beta law needs positive shapes");
  log_norm_ = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  integer_shapes_ = a == std::floor(a) && b == std::floor(b) && a + b <= 64;
}

double BetaLaw::sample(Engine& eng) const {
  if (integer_shapes_) {
    // a-th smallest of a + b - 1 uniforms.
    const auto m = static_cast<std::size_t>(a_ + b_ - 1);
    double u[64];
    std::uniform_real_distribution<double> U;
    for (std::size_t i = 0; i < m; ++i) u[i] = U(eng);
    const auto k = static_cast<std::size_t>(a_) - 1;
    std::nth_element(u, u + k, u + m);
    return u[k];
  }
  const double x = std::gamma_distribution<double>(a_, 1.0)(eng);
  const double y = std::gamma_distribution<double>(b_, 1.0)(eng);
  return x / (x + y);
}

double BetaLaw::density(double x) const {
  if (x < 0.0 || x > 1.0) return 0.0;
  if ((x == 0.0 && a_ < 1.0) || (x == 1.0 && b_ < 1.0)) return INFINITY;
  if ((x == 0.0 && a_ > 1.0) || (x == 1.0 && b_ > 1.0)) return 0.0;
  return std::exp(log_norm_ + (a_ - 1.0) * std::log(x) + (b_ - 1.0) * std::log1p(-x));
}
std::string BetaLaw::name() const { return "beta(" + fmt(a_) + "," + fmt(b_) + ")"; }

TruncatedNormalLaw::TruncatedNormalLaw(double mu, double sd, double lo, double hi)
    : mu_(mu), sd_(sd), lo_(lo), hi_(hi) {
  require(sd > 0.0 && lo < hi, "truncated normal needs sd > 0 and lo < hi");
  cdf_lo_ = normal_cdf((lo - mu) / sd);
  mass_ = normal_cdf((hi - mu) / sd) - cdf_lo_;
  require(mass_ > 1e-12, "truncation interval carries no mass");
}
double TruncatedNormalLaw::sample(Engine& eng) const {
  const double u = std::uniform_real_distribution<double>()(eng);
  const double p = std::clamp(cdf_lo_ + u * mass_, 1e-300, 1.0 - 1e-16);
  return std::clamp(mu_ + sd_ * normal_quantile(p), lo_, hi_);
}
double TruncatedNormalLaw::density(double x) const {
  if (x < lo_ || x > hi_) return 0.0;
  return normal_pdf((x - mu_) / sd_) / (sd_ * mass_);
}
std::string TruncatedNormalLaw::name() const {
  return "truncated_normal(" + fmt(mu_) + "," + fmt(sd_) + "," + fmt(lo_) + "," + fmt(hi_) + ")";
}

ProductLaw::ProductLaw(std::vector<std::shared_ptr<const Law1D>> marginals) : marginals_(std::move(marginals)) {
  require(!marginals_.empty(), "product law needs at least one marginal");
}
void ProductLaw::sample(Engine& eng, std::span<double> x) const {
  for (std::size_t i = 0; i < marginals_.size(); ++i) x[i] = marginals_[i]->sample(eng);
}
double ProductLaw::density(std::span<const double> x) const {
  double p = 1.0;
  for (std::size_t i = 0; i < marginals_.size(); ++i) p *= marginals_[i]->density(x[i]);
  return p;
}
std::string ProductLaw::name() const {
  std::string s = marginals_[0]->name();
  for (std::size_t i = 1; i < marginals_.size(); ++i) s += " x " + marginals_[i]->name();
  return s;
}

std::shared_ptr<const DataLaw> iid_law(std::shared_ptr<const Law1D> marginal, std::size_t d) {
  require(d >= 1, "dimension must be at least 1");
  return std::make_shared<ProductLaw>(std::vector<std::shared_ptr<const Law1D>>(d, std::move(marginal)));
}

}  // namespace supgauss
