#include "supgauss/funcclass.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "supgauss/errors.hpp"
#include "supgauss/numfmt.hpp"

namespace supgauss {

void FunctionFamily::accumulate(std::span<const double> x, std::span<double> sums) const {
  std::vector<double> tmp(size());
  evaluate(x, tmp);
  for (std::size_t j = 0; j < tmp.size(); ++j) sums[j] += tmp[j];
}

CallableFamily::CallableFamily(std::vector<Fn> functions, Fn envelope, std::size_t point_dim)
    : functions_(std::move(functions)), envelope_(std::move(envelope)), point_dim_(point_dim) {
  require(!functions_.empty(), "function class must contain at least one function");
  require(static_cast<bool>(envelope_), "envelope function is required");
}

void CallableFamily::evaluate(std::span<const double> x, std::span<double> out) const {
  for (std::size_t j = 0; j < functions_.size(); ++j) out[j] = functions_[j](x);
}

MatrixFamily::MatrixFamily(Eigen::MatrixXd values, Eigen::VectorXd envelope, std::vector<std::string> names)
    : values_(std::move(values)), envelope_(std::move(envelope)), names_(std::move(names)) {
  require(values_.rows() > 0 && values_.cols() > 0, "matrix class needs at least one atom and one function");
  require(envelope_.size() == values_.rows(), "envelope must have one value per atom");
  if (names_.empty()) {
    for (Eigen::Index j = 0; j < values_.cols(); ++j) names_.push_back("f" + std::to_string(j + 1));
    names_.push_back("envelope");
  }
}

std::size_t MatrixFamily::atom_of(std::span<const double> x) const {
  const double idx = x[0];
  require(idx >= 0 && idx < static_cast<double>(values_.rows()) && idx == std::floor(idx),
          "matrix class evaluated at a point that is not an atom index");
  return static_cast<std::size_t>(idx);
}

void MatrixFamily::evaluate(std::span<const double> x, std::span<double> out) const {
  const auto a = static_cast<Eigen::Index>(atom_of(x));
  for (Eigen::Index j = 0; j < values_.cols(); ++j) out[static_cast<std::size_t>(j)] = values_(a, j);
}

double MatrixFamily::envelope(std::span<const double> x) const {
  return envelope_(static_cast<Eigen::Index>(atom_of(x)));
}

ProductFamily::ProductFamily(std::shared_ptr<const FunctionFamily> left, std::shared_ptr<const FunctionFamily> right)
    : left_(std::move(left)), right_(std::move(right)) {
  require(left_ && right_, "product of null classes");
  require(left_->point_dim() == right_->point_dim(), "product classes must share the sample space");
}

void ProductFamily::evaluate(std::span<const double> x, std::span<double> out) const {
  std::vector<double> a(left_->size()), b(right_->size());
  left_->evaluate(x, a);
  right_->evaluate(x, b);
  std::size_t k = 0;
  for (double fa : a)
    for (double gb : b) out[k++] = fa * gb;
}

double ProductFamily::envelope(std::span<const double> x) const {
  return left_->envelope(x) * right_->envelope(x);
}

namespace {

std::vector<double> point_of(const Eigen::MatrixXd& atoms, std::size_t i) {
  std::vector<double> p(static_cast<std::size_t>(atoms.cols()));
  for (Eigen::Index c = 0; c < atoms.cols(); ++c) p[static_cast<std::size_t>(c)] = atoms(static_cast<Eigen::Index>(i), c);
  return p;
}

}  // namespace

DiscreteMeasure DiscreteMeasure::uniform(Eigen::MatrixXd atoms, std::string id) {
  require(atoms.rows() > 0, "measure needs at least one atom");
  DiscreteMeasure m;
  m.weights = Eigen::VectorXd::Constant(atoms.rows(), 1.0 / static_cast<double>(atoms.rows()));
  m.atoms = std::move(atoms);
  m.id = std::move(id);
  return m;
}

DiscreteMeasure DiscreteMeasure::over_atom_indices(std::size_t m, std::string id) {
  Eigen::MatrixXd atoms(static_cast<Eigen::Index>(m), 1);
  for (std::size_t i = 0; i < m; ++i) atoms(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
  return uniform(std::move(atoms), std::move(id));
}

void validate_measure(const DiscreteMeasure& measure, std::size_t point_dim) {
  require(measure.weights.size() > 0, "measure has no atoms");
  require(measure.atoms.rows() == measure.weights.size(), "measure atoms and weights differ in length");
  require(static_cast<std::size_t>(measure.atoms.cols()) == point_dim, "measure atoms have the wrong dimension");
  double total = 0.0;
  for (Eigen::Index i = 0; i < measure.weights.size(); ++i) {
    require(measure.weights(i) > 0.0 && std::isfinite(measure.weights(i)), "measure weights must be positive");
    total += measure.weights(i);
  }
  require(std::abs(total - 1.0) <= 1e-10, "measure weights must sum to 1");
}

EvaluationTable tabulate(const DiscretizedClass& cls, const DiscreteMeasure& measure) {
  validate_measure(measure, cls.point_dim());
  const auto m = static_cast<Eigen::Index>(measure.size());
  const auto n = static_cast<Eigen::Index>(cls.size());
  EvaluationTable t{Eigen::MatrixXd(n, m), Eigen::VectorXd(m)};
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Eigen::Index a = 0; a < m; ++a) {
    const auto p = point_of(measure.atoms, static_cast<std::size_t>(a));
    cls.family->evaluate(p, out);
    for (Eigen::Index j = 0; j < n; ++j) t.values(j, a) = out[static_cast<std::size_t>(j)];
    t.envelope(a) = cls.family->envelope(p);
  }
  return t;
}

double envelope_norm(const EvaluationTable& table, const Eigen::VectorXd& weights) {
  return std::sqrt((weights.array() * table.envelope.array().square()).sum());
}

std::size_t Traversal::net_size(double radius) const {
  if (order.empty()) return 0;
  // radii[1..] is non-increasing.
  auto first = radii.begin() + 1;
  auto it = std::partition_point(first, radii.end(), [radius](double r) { return r >= radius; });
  return 1 + static_cast<std::size_t>(it - first);
}

Traversal farthest_first(const DiscretizedClass& cls, const DiscreteMeasure& measure) {
  const EvaluationTable table = tabulate(cls, measure);
  Traversal tr;
  tr.envelope_norm = envelope_norm(table, measure.weights);
  if (tr.envelope_norm <= 0.0) throw InvalidArgument("degenerate envelope: ||F||_{Q,2} = 0");

  const auto n = table.values.rows();
  // Scale columns by sqrt(weight) so e_Q is the Euclidean row distance.
  const Eigen::MatrixXd scaled = table.values * measure.weights.cwiseSqrt().asDiagonal();
  std::vector<double> min_dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);

  std::size_t next = 0;
  double next_radius = std::numeric_limits<double>::infinity();
  while (true) {
    tr.order.push_back(next);
    tr.radii.push_back(next_radius);
    chosen[next] = true;
    const auto c = static_cast<Eigen::Index>(next);
    next_radius = -1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      if (chosen[uj]) continue;
      const double d = (scaled.row(j) - scaled.row(c)).norm();
      min_dist[uj] = std::min(min_dist[uj], d);
      if (min_dist[uj] > next_radius) {
        next_radius = min_dist[uj];
        next = uj;
      }
    }
    if (next_radius <= 0.0) break;  // everything left duplicates a center
  }
  return tr;
}

std::size_t covering_number(const DiscretizedClass& cls, const DiscreteMeasure& measure, double epsilon) {
  require(epsilon > 0.0 && epsilon <= 1.0, "covering_number: epsilon must lie in (0, 1]");
  const Traversal tr = farthest_first(cls, measure);
  return tr.net_size(epsilon * tr.envelope_norm);
}

CoveringReport covering_profile(const DiscretizedClass& cls, const DiscreteMeasure& measure,
                                std::span<const double> epsilons) {
  const Traversal tr = farthest_first(cls, measure);
  CoveringReport rep;
  rep.measure_id = measure.id;
  for (double e : epsilons) {
    require(e > 0.0 && e <= 1.0, "covering_profile: epsilon must lie in (0, 1]");
    rep.epsilons.push_back(e);
    rep.counts.push_back(tr.net_size(e * tr.envelope_norm));
  }
  return rep;
}

std::vector<double> entropy_grid(double delta) {
  require(delta > 0.0, "entropy grid needs delta > 0");
  const double lo = std::min(1e-3, delta / 2.0);
  constexpr int kPoints = 64;
  std::vector<double> grid(kPoints);
  const double ratio = std::log(delta / lo) / (kPoints - 1);
  for (int i = 0; i < kPoints; ++i) grid[i] = lo * std::exp(ratio * i);
  grid.back() = delta;
  return grid;
}

namespace {

double integrate_entropy(const std::vector<Traversal>& traversals, double delta) {
  const auto grid = entropy_grid(delta);
  auto integrand = [&](double eps) {
    double best = 0.0;
    for (const auto& tr : traversals) {
      const double count = static_cast<double>(tr.net_size(eps * tr.envelope_norm));
      best = std::max(best, std::sqrt(1.0 + std::log(count)));
    }
    return best;
  };
  std::vector<double> y(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) y[i] = integrand(grid[i]);
  // N(eps) is finite and non-increasing, so the integrand is flat below grid[0].
  double total = grid[0] * y[0];
  for (std::size_t i = 1; i < grid.size(); ++i) total += 0.5 * (grid[i] - grid[i - 1]) * (y[i] + y[i - 1]);
  return total;
}

std::vector<Traversal> traverse_all(const DiscretizedClass& cls, std::span<const DiscreteMeasure> measures) {
  require(!measures.empty(), "entropy_integral: at least one measure is required");
  std::vector<Traversal> out;
  out.reserve(measures.size());
  for (const auto& m : measures) out.push_back(farthest_first(cls, m));
  return out;
}

}  // namespace

double entropy_integral(const DiscretizedClass& cls, double delta, std::span<const DiscreteMeasure> measures) {
  require(delta > 0.0 && delta <= 1.0, "entropy_integral: delta must lie in (0, 1]");
  return integrate_entropy(traverse_all(cls, measures), delta);
}

EntropyProfile entropy_profile(const DiscretizedClass& cls, std::span<const double> deltas,
                               std::span<const DiscreteMeasure> measures) {
  const auto traversals = traverse_all(cls, measures);
  EntropyProfile p;
  for (double d : deltas) {
    require(d > 0.0 && d <= 1.0, "entropy_profile: delta must lie in (0, 1]");
    p.delta_grid.push_back(d);
    p.values.push_back(integrate_entropy(traversals, d));
  }
  return p;
}

double vc_entropy_bound(double A, double v, double delta) {
  require(A >= std::exp(1.0), "vc_entropy_bound: requires A >= e");
  require(v >= 1.0, "vc_entropy_bound: requires v >= 1");
  require(delta > 0.0 && delta <= 1.0, "vc_entropy_bound: delta must lie in (0, 1]");
  return 2.0 * std::sqrt(2.0 * v) * delta * std::sqrt(std::log(A / delta));
}

EntropyProfile vc_entropy_profile(const VcMeta& meta, std::span<const double> deltas) {
  EntropyProfile p;
  p.source = EntropyProfile::Source::vc_closed_form;
  for (double d : deltas) {
    p.delta_grid.push_back(d);
    p.values.push_back(vc_entropy_bound(meta.A, meta.v, d));
  }
  return p;
}

DiscretizedClass product_class(const DiscretizedClass& left, const DiscretizedClass& right) {
  DiscretizedClass out;
  out.family = std::make_shared<ProductFamily>(left.family, right.family);
  return out;
}

std::pair<DiscreteMeasure, DiscreteMeasure> product_reweighted_measures(const DiscretizedClass& left,
                                                                         const DiscretizedClass& right,
                                                                         const DiscreteMeasure& measure) {
  const auto tl = tabulate(left, measure);
  const auto tr = tabulate(right, measure);
  auto reweight = [&](const Eigen::VectorXd& env, const std::string& tag) {
    Eigen::VectorXd w = measure.weights.array() * env.array().square();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < w.size(); ++i)
      if (w(i) > 0.0) keep.push_back(i);
    if (keep.empty()) throw InvalidArgument("degenerate envelope: reweighting mass is zero");
    DiscreteMeasure m;
    m.atoms.resize(static_cast<Eigen::Index>(keep.size()), measure.atoms.cols());
    m.weights.resize(static_cast<Eigen::Index>(keep.size()));
    const double total = w.sum();
    for (std::size_t k = 0; k < keep.size(); ++k) {
      m.atoms.row(static_cast<Eigen::Index>(k)) = measure.atoms.row(keep[k]);
      m.weights(static_cast<Eigen::Index>(k)) = w(keep[k]) / total;
    }
    m.id = measure.id + tag;
    return m;
  };
  return {reweight(tr.envelope, "*G^2"), reweight(tl.envelope, "*F^2")};
}

double envelope_violation(const DiscretizedClass& cls, const Eigen::MatrixXd& points) {
  double worst = 0.0;
  std::vector<double> out(cls.size());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const auto p = point_of(points, static_cast<std::size_t>(i));
    cls.family->evaluate(p, out);
    double m = 0.0;
    for (double v : out) m = std::max(m, std::abs(v));
    const double env = cls.family->envelope(p);
    if (m == 0.0) continue;
    worst = std::max(worst, env > 0.0 ? m / env : std::numeric_limits<double>::infinity());
  }
  return worst;
}

bool satisfies_vc_meta(const DiscretizedClass& cls, const DiscreteMeasure& measure, std::span<const double> epsilons) {
  require(cls.vc_meta.has_value(), "class carries no VC metadata");
  const auto rep = covering_profile(cls, measure, epsilons);
  for (std::size_t i = 0; i < rep.counts.size(); ++i) {
    const double cap = std::pow(cls.vc_meta->A / rep.epsilons[i], cls.vc_meta->v);
    if (static_cast<double>(rep.counts[i]) > cap) return false;
  }
  return true;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

DiscretizedClass read_matrix_class(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("matrix class: missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);
  require(header.size() >= 2, "matrix class: need at least one function column and the envelope column");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw InvalidArgument("matrix class: line " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " columns, expected " + std::to_string(header.size()));
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        row.push_back(parse_double(c));
      } catch (const std::exception&) {
        throw InvalidArgument("matrix class: line " + std::to_string(line_no) + ": not a number: '" + c + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), "matrix class: no atom rows");

  const auto m = static_cast<Eigen::Index>(rows.size());
  const auto k = static_cast<Eigen::Index>(header.size() - 1);
  Eigen::MatrixXd values(m, k);
  Eigen::VectorXd env(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) values(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    env(i) = rows[static_cast<std::size_t>(i)].back();
    for (Eigen::Index j = 0; j < k; ++j)
      if (std::abs(values(i, j)) > env(i))
        throw InvalidArgument("matrix class: envelope does not dominate |f| on row " + std::to_string(i + 2));
  }
  DiscretizedClass cls;
  cls.family = std::make_shared<MatrixFamily>(std::move(values), std::move(env), header);
  return cls;
}

void write_matrix_class(std::ostream& out, const MatrixFamily& family) {
  const auto& names = family.names();
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  for (Eigen::Index a = 0; a < family.values().rows(); ++a) {
    for (Eigen::Index j = 0; j < family.values().cols(); ++j) out << format_double(family.values()(a, j)) << ',';
    out << format_double(family.envelope_values()(a)) << '\n';
  }
}

}  // namespace supgauss
