#include "supgauss/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "supgauss/bands.hpp"
#include "supgauss/bounds.hpp"
#include "supgauss/checks.hpp"
#include "supgauss/errors.hpp"
#include "supgauss/numfmt.hpp"
#include "supgauss/scenarios.hpp"

namespace supgauss::cli {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

const char* const kRuleN = "n must be at least 3 (the bounds involve log n and need n >= 3)";
const char* const kRuleAlpha = "alpha must lie in (0, 1) (a band level needs 0 < alpha < 1)";
const char* const kRuleBetaDelta =
    "beta * delta must exceed 1 (the smoothing slack alpha = beta * delta - 1 must be positive)";
const char* const kRuleSigma = "sigma must not exceed b (sigma^2 bounds P f^2, which is at most b^2)";

std::size_t line_at(std::string_view text, std::size_t pos) {
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class Validator {
 public:
  explicit Validator(std::string_view text) : text_(text) {}

  void error(const std::string& path, std::string message) {
    errors.push_back({line_of(path), path, std::move(message)});
  }
  void check(bool ok, const std::string& path, const std::string& message) {
    if (!ok) error(path, message);
  }

  /// Line of the last key of a dotted path, searching each key after its parent.
  std::size_t line_of(const std::string& path) const {
    std::size_t pos = 0, found = std::string::npos;
    std::stringstream ss(path);
    std::string key;
    while (std::getline(ss, key, '.')) {
      key = key.substr(0, key.find('['));
      const std::size_t at = text_.find("\"" + key + "\"", pos);
      if (at == std::string_view::npos) break;
      found = pos = at;
    }
    return found == std::string::npos ? 0 : line_at(text_, found);
  }

  std::vector<ConfigError> errors;

 private:
  std::string_view text_;
};

/// Typed reader over one JSON object. Every value read (or defaulted) is
/// copied into `echo`; keys never read are reported as unknown.
class Obj {
 public:
  Obj(Validator& v, const json* j, std::string path) : v_(v), j_(j), path_(std::move(path)) {
    if (j_ && !j_->is_object()) {
      v_.error(path_.empty() ? "(root)" : path_, "must be a JSON object");
      j_ = nullptr;
    }
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_ && j_->contains(key); }
  Validator& validator() { return v_; }

  const json* raw(const std::string& key) {
    known_.insert(key);
    return has(key) ? &(*j_)[key] : nullptr;
  }

  double num(const std::string& key, double def) {
    const json* x = raw(key);
    double out = def;
    if (x) {
      if (x->is_number()) {
        out = x->get<double>();
      } else if (x->is_string() && (x->get<std::string>() == "inf" || x->get<std::string>() == "infinity")) {
        out = std::numeric_limits<double>::infinity();
      } else {
        v_.error(at(key), "must be a number");
      }
    }
    put(key, out);
    return out;
  }

  std::optional<double> opt_num(const std::string& key) {
    if (!has(key)) {
      known_.insert(key);
      return std::nullopt;
    }
    return num(key, 0.0);
  }

  std::size_t count(const std::string& key, std::size_t def) {
    const json* x = raw(key);
    std::size_t out = def;
    if (x) {
      if (x->is_number_integer() && x->get<long long>() >= 0)
        out = x->get<std::size_t>();
      else
        v_.error(at(key), "must be a nonnegative integer");
    }
    echo[key] = out;
    return out;
  }

  std::uint64_t u64(const std::string& key, std::uint64_t def) {
    const json* x = raw(key);
    std::uint64_t out = def;
    if (x) {
      if (x->is_number_unsigned() || (x->is_number_integer() && x->get<long long>() >= 0))
        out = x->get<std::uint64_t>();
      else
        v_.error(at(key), "must be an unsigned 64-bit integer");
    }
    echo[key] = out;
    return out;
  }

  bool flag(const std::string& key, bool def) {
    const json* x = raw(key);
    bool out = def;
    if (x) {
      if (x->is_boolean())
        out = x->get<bool>();
      else
        v_.error(at(key), "must be true or false");
    }
    echo[key] = out;
    return out;
  }

  std::string choice(const std::string& key, const std::string& def, const std::vector<std::string>& allowed) {
    const json* x = raw(key);
    std::string out = def;
    if (x) {
      if (x->is_string() && std::find(allowed.begin(), allowed.end(), x->get<std::string>()) != allowed.end()) {
        out = x->get<std::string>();
      } else {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        v_.error(at(key), "must be one of: " + list);
      }
    }
    echo[key] = out;
    return out;
  }

  std::vector<double> nums(const std::string& key, std::vector<double> def) {
    const json* x = raw(key);
    std::vector<double> out = std::move(def);
    if (x) {
      bool ok = x->is_array();
      if (ok)
        for (const auto& e : *x) ok = ok && e.is_number();
      if (ok)
        out = x->get<std::vector<double>>();
      else
        v_.error(at(key), "must be an array of numbers");
    }
    echo[key] = out;
    return out;
  }

  std::vector<std::size_t> counts(const std::string& key, std::vector<std::size_t> def) {
    const json* x = raw(key);
    std::vector<std::size_t> out = std::move(def);
    if (x) {
      bool ok = x->is_array();
      if (ok)
        for (const auto& e : *x) ok = ok && e.is_number_integer() && e.get<long long>() >= 0;
      if (ok)
        out = x->get<std::vector<std::size_t>>();
      else
        v_.error(at(key), "must be an array of nonnegative integers");
    }
    echo[key] = out;
    return out;
  }

  Obj sub(const std::string& key) { return Obj(v_, raw(key), at(key)); }

  void adopt(const std::string& key, Obj& child) {
    child.finish();
    echo[key] = child.echo;
  }

  void finish() {
    if (!j_) return;
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!known_.count(it.key())) v_.error(at(it.key()), "unknown field");
  }

  ojson echo = ojson::object();

 private:
  void put(const std::string& key, double value) {
    if (std::isinf(value))
      echo[key] = value > 0 ? "inf" : "-inf";
    else
      echo[key] = value;
  }

  Validator& v_;
  const json* j_;
  std::string path_;
  std::set<std::string> known_;
};

// ---------------------------------------------------------------- scenario specs

std::shared_ptr<const Law1D> read_marginal(Obj& o, const std::string& default_type) {
  Validator& v = o.validator();
  const std::string type = o.choice("type", default_type, {"uniform", "beta", "truncated_normal"});
  try {
    if (type == "uniform") {
      const double lo = o.num("lo", 0.0), hi = o.num("hi", 1.0);
      return std::make_shared<UniformLaw>(lo, hi);
    }
    if (type == "beta") {
      const double a = o.num("a", 2.0), b = o.num("b", 2.0);
      return std::make_shared<BetaLaw>(a, b);
    }
    const double mu = o.num("mu", 0.5), sd = o.num("sd", 0.25), lo = o.num("lo", 0.0), hi = o.num("hi", 1.0);
    return std::make_shared<TruncatedNormalLaw>(mu, sd, lo, hi);
  } catch (const InvalidArgument& e) {
    v.error(o.at("type"), e.what());
  }
  return std::make_shared<UniformLaw>(0.0, 1.0);
}

KernelScenario read_kernel(Obj& o) {
  Validator& v = o.validator();
  KernelScenario s;
  s.d = o.count("d", 1);
  v.check(s.d == 1 || s.d == 2, o.at("d"), "d must be 1 or 2 (quadrature is tensor Gauss-Legendre in d <= 2)");
  const std::size_t d = (s.d == 1 || s.d == 2) ? s.d : 1;
  s.kernel = o.choice("kernel", "epanechnikov", {"epanechnikov", "gaussian"}) == "gaussian" ? KernelType::gaussian
                                                                                             : KernelType::epanechnikov;
  Obj bw = o.sub("bandwidth");
  s.bandwidth.scale = bw.num("scale", 1.0);
  s.bandwidth.exponent = bw.num("exponent", 0.2);
  v.check(s.bandwidth.scale > 0.0 && std::isfinite(s.bandwidth.scale), bw.at("scale"), "bandwidth scale must be positive");
  v.check(s.bandwidth.exponent > 0.0 && std::isfinite(s.bandwidth.exponent), bw.at("exponent"),
          "bandwidth exponent must be positive so that h_n -> 0");
  o.adopt("bandwidth", bw);
  Obj region = o.sub("region");
  s.region_lo = region.nums("lo", std::vector<double>(d, 0.0));
  s.region_hi = region.nums("hi", std::vector<double>(d, 1.0));
  v.check(s.region_lo.size() == d && s.region_hi.size() == d, o.at("region"), "region needs one lo and hi per axis");
  o.adopt("region", region);
  s.grid_points = o.count("grid_points", 64);
  v.check(s.grid_points >= 1, o.at("grid_points"), "grid_points must be at least 1");
  const std::string fam = o.choice("family", "density", {"density", "regression", "cond_cdf"});
  s.family = fam == "density" ? KernelFamily::density
             : fam == "regression" ? KernelFamily::regression
                                   : KernelFamily::cond_cdf;
  s.y_grid = o.nums("y_grid", {});
  if (s.family == KernelFamily::cond_cdf) v.check(!s.y_grid.empty(), o.at("y_grid"), "cond_cdf needs a nonempty y_grid");
  Obj law = o.sub("law");
  s.x_law = iid_law(read_marginal(law, "beta"), d);
  o.adopt("law", law);
  const std::string m = o.choice("regression", "zero", {"zero", "linear", "sine"});
  s.m = m == "zero" ? RegressionFunction::zero : m == "linear" ? RegressionFunction::linear : RegressionFunction::sine;
  s.noise_sd = o.num("noise_sd", 1.0);
  v.check(s.noise_sd >= 0.0 && std::isfinite(s.noise_sd), o.at("noise_sd"), "noise_sd must be finite and nonnegative");
  s.normalization = o.choice("normalization", "studentized", {"studentized", "unit"}) == "unit"
                        ? Normalization::unit
                        : Normalization::studentized;
  s.quad_nodes = o.count("quad_nodes", 0);
  return s;
}

SeriesScenario read_series(Obj& o) {
  Validator& v = o.validator();
  SeriesScenario s;
  const std::string basis = o.choice("basis", "fourier_trig", {"fourier_trig", "legendre", "bspline"});
  s.basis = basis == "fourier_trig" ? Basis::fourier_trig : basis == "legendre" ? Basis::legendre : Basis::bspline;
  s.d = o.count("d", 1);
  v.check(s.d == 1 || s.d == 2, o.at("d"), "d must be 1 or 2 (quadrature is tensor Gauss-Legendre in d <= 2)");
  const std::size_t d = (s.d == 1 || s.d == 2) ? s.d : 1;
  Obj order = o.sub("order");
  s.order.scale = order.num("scale", 1.0);
  s.order.exponent = -order.num("power", 1.0 / 3.0);
  v.check(s.order.scale > 0.0 && std::isfinite(s.order.scale), order.at("scale"), "order scale must be positive");
  v.check(s.order.exponent <= 0.0, order.at("power"), "order power must be nonnegative so that K_n >= 1 grows");
  o.adopt("order", order);
  s.grid_points = o.count("grid_points", 64);
  v.check(s.grid_points >= 1, o.at("grid_points"), "grid_points must be at least 1");
  s.model = o.choice("model", "mean_regression", {"mean_regression", "quantile_regression"}) == "quantile_regression"
                ? SeriesModel::quantile_regression
                : SeriesModel::mean_regression;
  const std::string noise = o.choice("noise", "homoskedastic", {"homoskedastic", "heteroskedastic", "none"});
  s.noise = noise == "homoskedastic" ? NoiseScale::homoskedastic
            : noise == "heteroskedastic" ? NoiseScale::heteroskedastic
                                         : NoiseScale::none;
  s.taus = o.nums("taus", {0.5});
  for (double t : s.taus) v.check(t > 0.0 && t < 1.0, o.at("taus"), "every tau must lie in (0, 1)");
  Obj law = o.sub("law");
  const auto marginal = read_marginal(law, "uniform");
  v.check(marginal->lo() >= 0.0 && marginal->hi() <= 1.0, o.at("law"),
          "series designs must live in [0, 1]^d, where the bases are defined");
  s.x_law = iid_law(marginal, d);
  o.adopt("law", law);
  s.quad_nodes = o.count("quad_nodes", 0);
  return s;
}

struct ScenarioSpec {
  std::optional<KernelScenario> kernel;
  std::optional<SeriesScenario> series;
};

ScenarioSpec read_scenario(Obj& parent, bool kernel_only) {
  Obj o = parent.sub("scenario");
  Validator& v = parent.validator();
  ScenarioSpec spec;
  const std::string type = kernel_only ? o.choice("type", "kernel", {"kernel"})
                                       : o.choice("type", "kernel", {"kernel", "series"});
  try {
    if (type == "kernel") {
      spec.kernel = read_kernel(o);
      spec.kernel->validate();
    } else {
      spec.series = read_series(o);
      spec.series->validate();
    }
  } catch (const InvalidArgument& e) {
    v.error(parent.at("scenario"), e.what());
  }
  parent.adopt("scenario", o);
  return spec;
}

void check_n(Validator& v, const std::string& path, std::size_t n) { v.check(n >= 3, path, kRuleN); }

// ---------------------------------------------------------------- per-subcommand schemas

void schema_smoothmax(Obj& root, Validator& v) {
  Obj s = root.sub("sandwich");
  v.check(s.count("vectors", 100000) >= 1, s.at("vectors"), "vectors must be at least 1");
  v.check(s.count("max_p", 1000) >= 1, s.at("max_p"), "max_p must be at least 1");
  root.adopt("sandwich", s);
  Obj d = root.sub("derivatives");
  d.count("draws", 10000);
  v.check(d.count("max_p", 100) >= 1, d.at("max_p"), "max_p must be at least 1");
  d.count("fd_draws", 200);
  v.check(d.count("fd_max_p", 6) >= 2, d.at("fd_max_p"), "fd_max_p must be at least 2");
  root.adopt("derivatives", d);
  Obj ind = root.sub("indicator");
  const double lo = ind.num("lo", 0.0), hi = ind.num("hi", 1.0);
  const double delta = ind.num("delta", 0.2), beta = ind.num("beta", 10.0);
  v.check(lo <= hi, ind.at("hi"), "the set [lo, hi] needs lo <= hi");
  v.check(delta > 0.0, ind.at("delta"), "delta must be positive");
  v.check(beta * delta > 1.0, ind.at("beta"), kRuleBetaDelta);
  v.check(ind.count("points", 10000) >= 2, ind.at("points"), "points must be at least 2");
  root.adopt("indicator", ind);
}

void schema_coupling_bounds(Obj& root, Validator& v) {
  bool any = false;
  if (root.has("budget")) {
    any = true;
    Obj b = root.sub("budget");
    const std::size_t n = b.count("n", 1000);
    check_n(v, b.at("n"), n);
    b.count("p", 1);
    const double sigma = b.num("sigma", 1.0), bb = b.num("b", 1.0);
    v.check(sigma >= 0.0, b.at("sigma"), "sigma must be nonnegative");
    v.check(sigma <= bb, b.at("sigma"), kRuleSigma);
    const double q = b.num("q", 4.0);
    v.check(q >= 3.0, b.at("q"), "q must be at least 3 (the coupling budget uses third moments)");
    for (const char* k : {"F_P2", "M2", "Mq", "kappa", "EG_FF", "phi", "tail"}) {
      const double x = b.num(k, k == std::string("phi") || k == std::string("tail") || k == std::string("EG_FF") ? 0.0 : 1.0);
      v.check(x >= 0.0, b.at(k), std::string(k) + " must be nonnegative");
    }
    const double H = b.num("H", std::log(static_cast<double>(std::max<std::size_t>(n, 3))));
    v.check(H >= std::log(static_cast<double>(std::max<std::size_t>(n, 1))) * (1 - 1e-12), b.at("H"),
            "H must be at least log n (H(eps) = log(N(eps) v n))");
    const double eps = b.num("epsilon", 0.1), gamma = b.num("gamma", 0.05);
    v.check(eps > 0.0 && eps <= 1.0, b.at("epsilon"), "epsilon must lie in (0, 1]");
    v.check(gamma > 0.0 && gamma < 1.0, b.at("gamma"), "gamma must lie in (0, 1)");
    for (const char* k : {"K_q", "c", "C"}) v.check(b.num(k, 1.0) > 0.0, b.at(k), std::string(k) + " must be positive");
    root.adopt("budget", b);
  }
  if (root.has("vc")) {
    any = true;
    Obj c = root.sub("vc");
    check_n(v, c.at("n"), c.count("n", 1000));
    const double gamma = c.num("gamma", 0.05);
    v.check(gamma > 0.0 && gamma < 1.0, c.at("gamma"), "gamma must lie in (0, 1)");
    v.check(c.num("q", 4.0) >= 4.0, c.at("q"), "q must be at least 4 for VC-type budgets");
    const double b = c.num("b", 1.0), sigma = c.num("sigma", 0.5);
    v.check(sigma > 0.0, c.at("sigma"), "sigma must be positive");
    v.check(sigma <= b, c.at("sigma"), kRuleSigma);
    v.check(c.num("A", std::exp(1.0)) >= std::exp(1.0), c.at("A"), "A must be at least e");
    v.check(c.num("v", 1.0) >= 1.0, c.at("v"), "v must be at least 1");
    c.num("c", 1.0);
    c.num("C", 1.0);
    root.adopt("vc", c);
  }
  if (root.has("stein")) {
    any = true;
    Obj s = root.sub("stein");
    check_n(v, s.at("n"), s.count("n", 256));
    v.check(s.count("p", 64) >= 1, s.at("p"), "p must be at least 1");
    const double delta = s.num("delta", 1.0);
    v.check(delta > 0.0, s.at("delta"), "delta must be positive");
    if (const auto beta = s.opt_num("beta")) v.check(*beta * delta > 1.0, s.at("beta"), kRuleBetaDelta);
    v.check(s.count("reps", 200) >= 2, s.at("reps"), "reps must be at least 2");
    s.choice("law", "rademacher", {"rademacher", "uniform"});
    v.check(s.num("b", 1.0) > 0.0, s.at("b"), "b must be positive");
    s.num("C", 1.0);
    root.adopt("stein", s);
  }
  if (!any) v.error("budget", "coupling-bounds needs at least one of budget, vc, stein");
}

void schema_crossover(Obj& root, Validator& v) {
  std::vector<std::size_t> def;
  for (int k = 8; k <= 16; ++k) def.push_back(std::size_t{1} << k);
  const auto ns = root.counts("n_list", def);
  v.check(!ns.empty(), root.at("n_list"), "n_list must be nonempty");
  for (std::size_t i = 0; i < ns.size(); ++i) check_n(v, root.at("n_list[" + std::to_string(i) + "]"), ns[i]);
  v.check(root.num("exponent", 0.2) > 0.0, root.at("exponent"), "exponent must be positive");
  v.check(root.num("b", 1.0) > 0.0, root.at("b"), "b must be positive");
  v.check(root.num("delta", 1.0) > 0.0, root.at("delta"), "delta must be positive");
  root.num("C", 1.0);
}

void schema_rate(Obj& root, Validator& v) {
  read_scenario(root, false);
  const auto ns = root.counts("n_list", {500, 2000, 8000});
  v.check(ns.size() >= 3, root.at("n_list"), "n_list needs at least three sizes");
  for (std::size_t i = 0; i < ns.size(); ++i) {
    check_n(v, root.at("n_list"), ns[i]);
    if (i) v.check(ns[i] > ns[i - 1], root.at("n_list"), "n_list must be increasing");
  }
  v.check(root.count("R", 5000) >= 2, root.at("R"), "R must be at least 2");
  root.flag("abs_max", false);
}

void schema_bands(Obj& root, Validator& v) {
  read_scenario(root, true);
  check_n(v, root.at("n"), root.count("n", 2000));
  const double alpha = root.num("alpha", 0.05);
  v.check(alpha > 0.0 && alpha < 1.0, root.at("alpha"), kRuleAlpha);
  v.check(root.count("R_outer", 500) >= 1, root.at("R_outer"), "R_outer must be at least 1");
  v.check(root.count("R_inner", 4000) >= 1, root.at("R_inner"), "R_inner must be at least 1");
  root.choice("side", "two_sided", {"two_sided", "one_sided_lower"});
  root.choice("target", "exact_centered", {"exact_centered", "true_function"});
  if (const auto c = root.opt_num("c_alpha")) v.check(*c >= 0.0, root.at("c_alpha"), "c_alpha must be nonnegative");
}

void schema_anticoncentration(Obj& root, Validator& v) {
  const auto spec = read_scenario(root, true);
  if (spec.kernel)
    v.check(spec.kernel->normalization == Normalization::studentized, root.at("scenario.normalization"),
            "normalization must be studentized (the bound assumes unit variances)");
  check_n(v, root.at("n"), root.count("n", 1000));
  v.check(root.count("R", 100000) >= 1, root.at("R"), "R must be at least 1");
  const auto eps = root.nums("epsilons", {0.01, 0.02, 0.05, 0.1, 0.2});
  v.check(!eps.empty(), root.at("epsilons"), "epsilons must be nonempty");
  for (double e : eps) v.check(e > 0.0, root.at("epsilons"), "every epsilon must be positive");
}

// ---------------------------------------------------------------- execution helpers

std::string fmt(double x) { return format_double(x); }

class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) { row_strings(header); }
  template <class... T>
  void row(const T&... cells) {
    std::vector<std::string> v{cell(cells)...};
    row_strings(v);
  }
  std::string str() const { return out_.str(); }

 private:
  static std::string cell(double x) { return fmt(x); }
  static std::string cell(std::size_t x) { return std::to_string(x); }
  static std::string cell(const std::string& x) { return x; }
  static std::string cell(const char* x) { return x; }
  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }
  std::ostringstream out_;
};

/// Reads a config back through the same schema, for execution.
struct Params {
  const ojson& j;
  double num(const std::string& k) const {
    const auto& x = j.at(k);
    if (x.is_string()) return x.get<std::string>()[0] == '-' ? -std::numeric_limits<double>::infinity()
                                                             : std::numeric_limits<double>::infinity();
    return x.get<double>();
  }
  std::size_t count(const std::string& k) const { return j.at(k).get<std::size_t>(); }
  std::string str(const std::string& k) const { return j.at(k).get<std::string>(); }
  Params sub(const std::string& k) const { return Params{j.at(k)}; }
  bool has(const std::string& k) const { return j.contains(k); }
};

ScenarioSpec scenario_from_echo(const ojson& echo) {
  // Re-run the schema on the echoed scenario; it is already valid.
  const std::string text = json(echo).dump();
  const json parsed = json::parse(text);
  Validator v(text);
  Obj root(v, &parsed, "");
  ScenarioSpec spec = read_scenario(root, false);
  if (!v.errors.empty()) throw InvalidArgument(v.errors.front().str());
  return spec;
}

RunOutput run_smoothmax(const RunConfig& c, const RngPolicy& rng) {
  const Params p{c.echo};
  const auto sw = p.sub("sandwich"), dv = p.sub("derivatives"), ind = p.sub("indicator");
  const auto s = smooth_max_sandwich(sw.count("vectors"), sw.count("max_p"), rng.child("sandwich"));
  const auto d = derivative_suite(dv.count("draws"), dv.count("max_p"), dv.count("fd_draws"), dv.count("fd_max_p"),
                                  rng.child("derivatives"));
  const auto g = indicator_sandwich(ind.num("lo"), ind.num("hi"), ind.num("delta"), ind.num("beta"), ind.count("points"));

  const bool ok_s = s.violations == 0;
  const bool ok_d = d.violations == 0 && d.max_fd_error_pi < 1e-6 && d.max_fd_error_w < 1e-4;
  const bool ok_g = g.violations == 0;
  Csv csv({"suite", "metric", "value"});
  csv.row("sandwich", "vectors", s.vectors);
  csv.row("sandwich", "violations", s.violations);
  csv.row("sandwich", "max_slack_ratio", s.max_slack_ratio);
  csv.row("derivatives", "draws", d.draws);
  csv.row("derivatives", "max_pi_sum_error", d.max_pi_sum_error);
  csv.row("derivatives", "max_w_abs_sum", d.max_w_abs_sum);
  csv.row("derivatives", "max_q_abs_sum", d.max_q_abs_sum);
  csv.row("derivatives", "fd_draws", d.fd_draws);
  csv.row("derivatives", "max_fd_error_pi", d.max_fd_error_pi);
  csv.row("derivatives", "max_fd_error_w", d.max_fd_error_w);
  csv.row("derivatives", "violations", d.violations);
  csv.row("indicator", "points", g.points);
  csv.row("indicator", "epsilon", g.epsilon);
  csv.row("indicator", "violations", g.violations);

  RunOutput out;
  out.files["smoothmax_check.csv"] = csv.str();
  out.checks_passed = ok_s && ok_d && ok_g;
  std::ostringstream sum;
  sum << "smooth-max sandwich: " << s.violations << " violations in " << s.vectors << " vectors ("
      << (ok_s ? "pass" : "FAIL") << ")\n";
  sum << "derivative identities: " << d.violations << " violations in " << d.draws + d.fd_draws
      << " draws; finite-difference error of pi " << fmt(d.max_fd_error_pi) << " (relative), of the Hessian "
      << fmt(d.max_fd_error_w) << " (per unit beta)"
      << " (" << (ok_d ? "pass" : "FAIL") << ")\n";
  sum << "indicator sandwich: " << g.violations << " violations at " << g.points << " points, epsilon "
      << fmt(g.epsilon) << " (" << (ok_g ? "pass" : "FAIL") << ")\n";
  out.summary = sum.str();
  return out;
}

RunOutput run_coupling_bounds(const RunConfig& c, const RngPolicy& rng) {
  const Params p{c.echo};
  RunOutput out;
  std::ostringstream sum;
  if (p.has("budget")) {
    const auto b = p.sub("budget");
    MomentInputs in;
    in.n = b.count("n");
    in.p_or_N = b.count("p");
    in.sigma = b.num("sigma");
    in.b = b.num("b");
    in.q = b.num("q");
    in.F_P2 = b.num("F_P2");
    in.M_norms = {{2.0, b.num("M2")}, {in.q, b.num("Mq")}};
    in.kappa = b.num("kappa");
    in.EG_FF = b.num("EG_FF");
    const double H = b.num("H"), phi = b.num("phi"), tail = b.num("tail");
    in.H_profile = [H](double) { return H; };
    in.phi_profile = [phi](double) { return phi; };
    in.tail_fn = [tail](double) { return tail; };
    const auto r = coupling_budget(in, b.num("epsilon"), b.num("gamma"), b.num("K_q"), b.num("c"), b.num("C"));
    Csv csv({"quantity", "value"});
    for (const auto& t : r.terms) csv.row(t.name, t.value);
    csv.row("Delta_n", r.Delta_n);
    csv.row("coupling_radius", r.coupling_radius);
    csv.row("delta_n_tail", r.delta_n_tail);
    csv.row("prob_bound", r.prob_bound);
    csv.row("prob_bound_clamped", r.prob_bound_clamped());
    for (const auto& [k, v] : r.constants_used) csv.row("constant_" + k, v);
    out.files["budget.csv"] = csv.str();
    sum << "coupling budget: radius " << fmt(r.coupling_radius) << " with probability bound "
        << fmt(r.prob_bound_clamped()) << "\n";
  }
  if (p.has("vc")) {
    const auto v = p.sub("vc");
    const auto r = vc_class_budget(v.count("n"), v.num("gamma"), v.num("q"), v.num("b"), v.num("sigma"), v.num("A"),
                                   v.num("v"), v.num("c"), v.num("C"));
    Csv csv({"quantity", "value"});
    csv.row("K_n", r.K_n);
    csv.row("term1", r.term1);
    csv.row("term2", r.term2);
    csv.row("term3", r.term3);
    csv.row("total", r.total);
    csv.row("prob_bound", r.prob_bound);
    for (const auto& [k, val] : r.constants_used) csv.row("constant_" + k, val);
    out.files["vc_budget.csv"] = csv.str();
    sum << "VC-type budget: total " << fmt(r.total) << "\n";
  }
  if (p.has("stein")) {
    const auto s = p.sub("stein");
    const std::size_t n = s.count("n"), dim = s.count("p"), reps = s.count("reps");
    const double b = s.num("b");
    const bool rad = s.str("law") == "rademacher";
    const double scale = b / std::sqrt(static_cast<double>(n));
    const RowSampler sampler = [rad, scale](Engine& eng, Eigen::MatrixXd& X) {
      std::uniform_real_distribution<double> U(-1.0, 1.0);
      for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
          const double u = U(eng);
          X(i, j) = scale * (rad ? (u < 0.0 ? -1.0 : 1.0) : u);
        }
    };
    const double var = b * b * (rad ? 1.0 : 1.0 / 3.0);
    const Eigen::MatrixXd sum_cov = var * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim),
                                                                     static_cast<Eigen::Index>(dim));
    const auto m = estimate_stein_moments(sampler, n, dim, reps, rng.child("stein"), sum_cov);
    std::optional<double> beta;
    if (s.has("beta")) beta = s.num("beta");
    const auto t = stein_coupling_terms(m, s.num("delta"), beta, s.num("C"));
    Csv csv({"quantity", "value"});
    csv.row("B1", t.B1);
    csv.row("B1_se", m.B1_se);
    csv.row("B2", t.B2);
    csv.row("B2_se", m.B2_se);
    csv.row("B3", t.B3);
    csv.row("B4", t.B4);
    csv.row("beta", t.beta);
    csv.row("delta", t.delta);
    csv.row("epsilon", t.epsilon);
    csv.row("radius_smooth", t.radius_smooth);
    csv.row("radius_simplified", t.radius_simplified);
    csv.row("prob_bound_smooth", t.prob_bound_smooth);
    csv.row("prob_bound_simplified", t.prob_bound_simplified);
    csv.row("constant_C", t.C);
    out.files["stein_terms.csv"] = csv.str();
    sum << "maxima of sums (" << to_string(t.provenance) << "): smooth-max bound " << fmt(t.smooth_clamped())
        << ", simplified bound " << fmt(t.simplified_clamped()) << "\n";
  }
  out.summary = sum.str();
  return out;
}

RunOutput run_crossover(const RunConfig& c) {
  const Params p{c.echo};
  const auto ns = c.echo.at("n_list").get<std::vector<std::size_t>>();
  const auto r = coupling_crossover(ns, p.num("exponent"), p.num("b"), p.num("delta"), p.num("C"));
  Csv csv({"n", "p", "B1", "B2", "B4", "sum_third", "simplified", "yurinskii"});
  for (const auto& row : r.rows)
    csv.row(row.n, row.p, row.B1, row.B2, row.B4, row.sum_third, row.simplified, row.yurinskii);
  RunOutput out;
  out.files["crossover.csv"] = csv.str();
  out.summary = r.crossover_n ? "crossover at n = " + std::to_string(*r.crossover_n) + "\n"
                              : std::string("no crossover in the n list\n");
  return out;
}

RunOutput run_rate(const RunConfig& c, const RngPolicy& rng) {
  const Params p{c.echo};
  const auto spec = scenario_from_echo(c.echo);
  const auto ns = c.echo.at("n_list").get<std::vector<std::size_t>>();
  RateOptions opt;
  opt.abs_max = c.echo.at("abs_max").get<bool>();
  const RateTable t = spec.kernel ? rate_experiment(*spec.kernel, ns, p.count("R"), rng, opt)
                                  : rate_experiment(*spec.series, ns, p.count("R"), rng, opt);
  Csv csv({"n", "ks", "ks_conf", "predicted_rate", "slope_fit"});
  for (const auto& r : t.rows) csv.row(r.n, r.ks, r.ks_conf, r.predicted_rate, t.slope_fit);
  RunOutput out;
  out.files["rate.csv"] = csv.str();
  std::ostringstream sum;
  sum << (spec.kernel ? "kernel" : "series") << " rate experiment, R = " << p.count("R") << "\n";
  for (const auto& r : t.rows)
    sum << "  n = " << r.n << ": ks " << fmt(r.ks) << " +- " << fmt(r.ks_conf) << ", predicted rate "
        << fmt(r.predicted_rate) << "\n";
  sum << "log-log slope of ks against n: " << fmt(t.slope_fit) << "\n";
  out.summary = sum.str();
  return out;
}

RunOutput run_bands(const RunConfig& c, const RngPolicy& rng) {
  const Params p{c.echo};
  const auto spec = scenario_from_echo(c.echo);
  const KernelScenario& ks = *spec.kernel;
  const std::size_t n = p.count("n");
  const double alpha = p.num("alpha");
  CoverageOptions opt;
  opt.side = p.str("side") == "two_sided" ? BandSide::two_sided : BandSide::one_sided_lower;
  opt.target = p.str("target") == "exact_centered" ? CoverageTarget::exact_centered : CoverageTarget::true_function;
  if (p.has("c_alpha")) opt.c_alpha_override = p.num("c_alpha");
  const auto rep = coverage_experiment(ks, alpha, n, p.count("R_outer"), p.count("R_inner"), rng, opt);

  // One illustrative band on a fresh data set.
  const KernelClass kc = build_kernel_class(ks, n);
  Engine eng = rng.child("band").engine(0);
  const std::size_t dim = kc.functions->point_dim();
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  std::vector<double> x(dim);
  for (std::size_t i = 0; i < n; ++i) {
    kc.sampler(eng, x);
    for (std::size_t k = 0; k < dim; ++k) pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = x[k];
  }
  const BandResult band = kernel_band(kc, pts, rep.c_alpha, opt.side, alpha);

  std::vector<std::string> header = ks.d == 1 ? std::vector<std::string>{"x"} : std::vector<std::string>{"x1", "x2"};
  const bool has_g = ks.family == KernelFamily::cond_cdf;
  if (has_g) header.push_back("y");
  for (const char* h : {"estimate", "sigma_n", "lower", "upper"}) header.push_back(h);
  Csv csv(header);
  const std::size_t G = ks.g_count();
  for (std::size_t j = 0; j < band.size(); ++j) {
    std::ostringstream line;
    const auto& xg = kc.x_grid[j / G];
    std::string row;
    for (std::size_t a = 0; a < xg.size(); ++a) row += (a ? "," : "") + fmt(xg[a]);
    if (has_g) row += "," + fmt(ks.y_grid[j % G]);
    row += "," + fmt(band.estimate[j]) + "," + fmt(band.sigma_n[j]) + "," + fmt(band.lower[j]) + "," +
           fmt(band.upper[j]);
    csv.row(row);
  }
  ojson cov = ojson::object();
  cov["nominal"] = rep.nominal;
  cov["empirical"] = rep.empirical;
  cov["binomial_se"] = rep.binomial_se;
  cov["replications"] = rep.replications;
  cov["c_alpha"] = std::isinf(rep.c_alpha) ? ojson("inf") : ojson(rep.c_alpha);
  RunOutput out;
  out.files["band.csv"] = csv.str();
  out.files["coverage.json"] = cov.dump(2) + "\n";
  std::ostringstream sum;
  sum << "coverage " << fmt(rep.empirical) << " (binomial se " << fmt(rep.binomial_se) << ") at nominal "
      << fmt(rep.nominal) << " over " << rep.replications << " replications, c_alpha " << fmt(rep.c_alpha) << "\n";
  out.summary = sum.str();
  return out;
}

RunOutput run_anticoncentration(const RunConfig& c, const RngPolicy& rng) {
  const Params p{c.echo};
  const auto spec = scenario_from_echo(c.echo);
  const KernelClass kc = build_kernel_class(*spec.kernel, p.count("n"));
  const auto sample = gaussian_sup_sample(kc.cov, p.count("R"), rng.child("gauss"));
  const auto eps = c.echo.at("epsilons").get<std::vector<double>>();
  const auto rows = anticoncentration_table(sample, eps);
  Csv csv({"epsilon", "levy", "bound", "holds"});
  bool all = true;
  for (const auto& r : rows) {
    const bool ok = r.levy <= r.bound;
    all = all && ok;
    csv.row(r.epsilon, r.levy, r.bound, std::string(ok ? "1" : "0"));
  }
  RunOutput out;
  out.files["anticoncentration.csv"] = csv.str();
  out.summary = all ? "anti-concentration bound holds at every epsilon\n"
                    : "anti-concentration bound fails at some epsilon\n";
  return out;
}

}  // namespace

std::string ConfigError::str() const {
  std::string s = line ? "line " + std::to_string(line) + ": " : std::string("(no line): ");
  return s + field + ": " + message;
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"smoothmax-check", "coupling-bounds", "coupling-crossover",
                                              "rate",            "bands",           "anticoncentration"};
  return names;
}

ParseResult validate(std::string_view text) {
  ParseResult result;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t pos = std::min<std::size_t>(e.byte ? e.byte - 1 : 0, text.size());
    result.errors.push_back({line_at(text, pos), "(syntax)", "invalid JSON"});
    return result;
  }
  if (doc.is_object() && doc.contains("manifest_version") && doc.contains("config")) doc = doc["config"];

  Validator v(text);
  Obj root(v, &doc, "");
  RunConfig cfg;
  const json* sub = root.raw("subcommand");
  if (!sub || !sub->is_string()) {
    v.error("subcommand", "a subcommand string is required");
  } else {
    cfg.subcommand = sub->get<std::string>();
    const auto& names = subcommands();
    if (std::find(names.begin(), names.end(), cfg.subcommand) == names.end()) {
      std::string list;
      for (const auto& nme : names) list += (list.empty() ? "" : ", ") + nme;
      v.error("subcommand", "unknown subcommand '" + cfg.subcommand + "' (expected one of: " + list + ")");
    }
  }
  root.echo["subcommand"] = cfg.subcommand;
  cfg.seed = root.u64("seed", 1);
  const auto threads = root.count("threads", 0);
  cfg.threads = static_cast<int>(std::min<std::size_t>(threads, 4096));
  if (root.has("output_dir")) {
    const json* od = root.raw("output_dir");
    if (od->is_string())
      cfg.output_dir = od->get<std::string>();
    else
      v.error("output_dir", "must be a string");
  } else {
    root.raw("output_dir");
  }

  if (v.errors.empty()) {
    if (cfg.subcommand == "smoothmax-check") schema_smoothmax(root, v);
    if (cfg.subcommand == "coupling-bounds") schema_coupling_bounds(root, v);
    if (cfg.subcommand == "coupling-crossover") schema_crossover(root, v);
    if (cfg.subcommand == "rate") schema_rate(root, v);
    if (cfg.subcommand == "bands") schema_bands(root, v);
    if (cfg.subcommand == "anticoncentration") schema_anticoncentration(root, v);
  }
  root.finish();
  result.errors = std::move(v.errors);
  if (result.errors.empty()) {
    cfg.echo = std::move(root.echo);
    result.config = std::move(cfg);
  }
  return result;
}

RunOutput execute(const RunConfig& config) {
  const RngPolicy rng(config.seed);
  const std::string& s = config.subcommand;
  if (s == "smoothmax-check") return run_smoothmax(config, rng);
  if (s == "coupling-bounds") return run_coupling_bounds(config, rng);
  if (s == "coupling-crossover") return run_crossover(config);
  if (s == "rate") return run_rate(config, rng);
  if (s == "bands") return run_bands(config, rng);
  if (s == "anticoncentration") return run_anticoncentration(config, rng);
  throw InvalidArgument("unknown subcommand '" + s + "'");
}

int run(const RunConfig& config, const std::filesystem::path& dir, std::ostream& err) {
  if (config.threads > 0) set_default_thread_cap(config.threads);
  const auto t0 = std::chrono::steady_clock::now();
  RunOutput out;
  try {
    out = execute(config);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    err << "error: cannot create output directory " << dir << ": " << ec.message() << "\n";
    return 2;
  }
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream f(dir / name, std::ios::binary);
    f << body;
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
  };
  ojson manifest = ojson::object();
  manifest["manifest_version"] = 1;
  manifest["config"] = config.echo;
  manifest["seed"] = config.seed;
  manifest["threads"] = config.threads;
  manifest["versions"] = {{"supgauss", kVersion},
                          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                        "." + std::to_string(EIGEN_MINOR_VERSION)},
                          {"compiler", __VERSION__},
                          {"cplusplus", __cplusplus}};
  manifest["wall_time_seconds"] = wall;
  ojson files = ojson::array();
  for (const auto& [name, body] : out.files) files.push_back(name);
  files.push_back("summary.txt");
  manifest["files"] = files;
  try {
    for (const auto& [name, body] : out.files) write(name, body);
    write("summary.txt", out.summary);
    write("manifest.json", manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  if (!out.checks_passed) {
    err << "self-test failed:\n" << out.summary;
    return 3;
  }
  return 0;
}

int main(int argc, char** argv) {
  CLI::App app{"Gaussian approximation of suprema of empirical processes: experiment runner"};
  std::string config_path, output;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  app.add_option("--config", config_path, "JSON run config (or a manifest.json from an earlier run)")->required();
  app.add_option("--seed", seed, "master seed, overrides the config");
  app.add_option("--threads", threads, "cap on worker threads (results do not depend on it)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--output", output, "output directory, overrides the config");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::ifstream in(config_path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read config " << config_path << "\n";
    return 2;
  }
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  ParseResult parsed = validate(text);
  if (!parsed.ok()) {
    for (const auto& e : parsed.errors) std::cerr << config_path << ":" << e.str() << "\n";
    return 2;
  }
  RunConfig cfg = std::move(*parsed.config);
  if (seed) {
    cfg.seed = *seed;
    cfg.echo["seed"] = *seed;
  }
  if (threads) {
    cfg.threads = *threads;
    cfg.echo["threads"] = *threads;
  }
  if (!output.empty()) cfg.output_dir = output;
  cfg.echo["output_dir"] = cfg.output_dir;
  const int status = run(cfg, cfg.output_dir, std::cerr);
  if (status == 0) {
    std::ifstream s(std::filesystem::path(cfg.output_dir) / "summary.txt");
    std::cout << s.rdbuf();
  }
  return status;
}

}  // namespace supgauss::cli
