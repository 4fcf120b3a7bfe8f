#pragma once

// Discretized function classes, covering numbers and uniform entropy integrals.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace supgauss {

/// VC-type metadata: sup_Q N(F, e_Q, eps ||F||_{Q,2}) <= (A/eps)^v for eps in (0,1].
struct VcMeta {
  double A = 0.0;
  double v = 0.0;
};

/// Moment metadata: sup_f P|f|^k <= sigma^2 b^(k-2), ||F||_{P,q} <= b.
struct MomentMeta {
  double b = 0.0;
  double sigma = 0.0;
  double q = 0.0;
};

/// A finite family f_1..f_N of real functions on a sample space whose points
/// are vectors of fixed dimension, together with an envelope F.
class FunctionFamily {
 public:
  virtual ~FunctionFamily() = default;

  virtual std::size_t size() const = 0;
  virtual std::size_t point_dim() const = 0;

  /// out[j] = f_j(x), out.size() == size().
  virtual void evaluate(std::span<const double> x, std::span<double> out) const = 0;
  virtual double envelope(std::span<const double> x) const = 0;

  /// Adds f_j(x) - offsets()[j] to sums[j]. Families with sparse structure
  /// (compact kernels) override this to touch only the nonzero terms, so that
  /// sum_i f_j(x_i) = sums[j] + n * offsets()[j]. Empty offsets mean zero.
  virtual void accumulate(std::span<const double> x, std::span<double> sums) const;
  virtual std::span<const double> offsets() const { return {}; }

  /// Families of the form f_j(x) = coefficients().row(j) * features(x) expose
  /// that structure so sample sums can be formed in feature space.
  virtual std::size_t feature_dim() const { return 0; }
  virtual void features(std::span<const double> /*x*/, std::span<double> /*out*/) const {}
  virtual const Eigen::MatrixXd* coefficients() const { return nullptr; }
};

/// Functions given as callables; mostly for tests and small hand-built classes.
class CallableFamily final : public FunctionFamily {
 public:
  using Fn = std::function<double(std::span<const double>)>;

  CallableFamily(std::vector<Fn> functions, Fn envelope, std::size_t point_dim);

  std::size_t size() const override { return functions_.size(); }
  std::size_t point_dim() const override { return point_dim_; }
  void evaluate(std::span<const double> x, std::span<double> out) const override;
  double envelope(std::span<const double> x) const override { return envelope_(x); }

 private:
  std::vector<Fn> functions_;
  Fn envelope_;
  std::size_t point_dim_;
};

/// Class tabulated on a finite set of atoms. Points are one-element vectors
/// holding the atom index.
class MatrixFamily final : public FunctionFamily {
 public:
  /// values: atoms x functions; envelope: one value per atom.
  MatrixFamily(Eigen::MatrixXd values, Eigen::VectorXd envelope, std::vector<std::string> names = {});

  std::size_t size() const override { return static_cast<std::size_t>(values_.cols()); }
  std::size_t point_dim() const override { return 1; }
  std::size_t atom_count() const { return static_cast<std::size_t>(values_.rows()); }
  void evaluate(std::span<const double> x, std::span<double> out) const override;
  double envelope(std::span<const double> x) const override;

  const Eigen::MatrixXd& values() const { return values_; }
  const Eigen::VectorXd& envelope_values() const { return envelope_; }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::size_t atom_of(std::span<const double> x) const;

  Eigen::MatrixXd values_;
  Eigen::VectorXd envelope_;
  std::vector<std::string> names_;
};

/// Pointwise products {f g}; index j = a * right.size() + b.
class ProductFamily final : public FunctionFamily {
 public:
  ProductFamily(std::shared_ptr<const FunctionFamily> left, std::shared_ptr<const FunctionFamily> right);

  std::size_t size() const override { return left_->size() * right_->size(); }
  std::size_t point_dim() const override { return left_->point_dim(); }
  void evaluate(std::span<const double> x, std::span<double> out) const override;
  double envelope(std::span<const double> x) const override;

 private:
  std::shared_ptr<const FunctionFamily> left_;
  std::shared_ptr<const FunctionFamily> right_;
};

/// The computational stand-in for a function class: a shared immutable family
/// plus what is known about it.
struct DiscretizedClass {
  std::shared_ptr<const FunctionFamily> family;
  /// True when P f_j = 0 for all j.
  bool centered = false;
  /// Analytic means P f_j when known (empty otherwise).
  std::vector<double> means;
  std::optional<VcMeta> vc_meta;
  std::optional<MomentMeta> moment_meta;

  std::size_t size() const { return family->size(); }
  std::size_t point_dim() const { return family->point_dim(); }
};

/// A finitely discrete probability measure: `atoms` holds one point per row.
struct DiscreteMeasure {
  Eigen::MatrixXd atoms;
  Eigen::VectorXd weights;
  std::string id;

  std::size_t size() const { return static_cast<std::size_t>(weights.size()); }

  /// Equal weights on the given atoms.
  static DiscreteMeasure uniform(Eigen::MatrixXd atoms, std::string id = "uniform");
  /// Equal weights on atoms 0..m-1 of a MatrixFamily.
  static DiscreteMeasure over_atom_indices(std::size_t m, std::string id = "atoms");
};

/// Rejects measures whose weights are not a probability vector.
void validate_measure(const DiscreteMeasure& measure, std::size_t point_dim);

/// Function values and envelope of a class on the atoms of a measure.
struct EvaluationTable {
  Eigen::MatrixXd values;    // functions x atoms
  Eigen::VectorXd envelope;  // atoms
};

EvaluationTable tabulate(const DiscretizedClass& cls, const DiscreteMeasure& measure);

double envelope_norm(const EvaluationTable& table, const Eigen::VectorXd& weights);

/// Farthest-first traversal under e_Q. radii[k] is the e_Q distance of the
/// (k+1)-th chosen center to the earlier ones (radii[0] = +inf); the sequence
/// is non-increasing, so the greedy net at radius r has
/// 1 + #{k >= 1 : radii[k] >= r} centers for every r at once.
struct Traversal {
  std::vector<std::size_t> order;
  std::vector<double> radii;
  double envelope_norm = 0.0;

  std::size_t net_size(double radius) const;
};

Traversal farthest_first(const DiscretizedClass& cls, const DiscreteMeasure& measure);

/// Size of the greedy eps * ||F||_{Q,2} net (a function is covered by a center
/// at distance strictly below the radius). Lies between the minimal covering
/// number at eps and the minimal covering number at eps / 2.
std::size_t covering_number(const DiscretizedClass& cls, const DiscreteMeasure& measure, double epsilon);

struct CoveringReport {
  std::vector<double> epsilons;
  std::vector<std::size_t> counts;
  std::string measure_id;
};

CoveringReport covering_profile(const DiscretizedClass& cls, const DiscreteMeasure& measure,
                                std::span<const double> epsilons);

/// Geometric grid used by entropy_integral: 64 points from min(1e-3, delta/2) to delta.
std::vector<double> entropy_grid(double delta);

/// Quadrature of eps -> max_Q sqrt(1 + log N(F, e_Q, eps ||F||_{Q,2})) over
/// (0, delta]. The max over the supplied measures only approximates the sup
/// over all finitely discrete measures from below.
double entropy_integral(const DiscretizedClass& cls, double delta, std::span<const DiscreteMeasure> measures);

struct EntropyProfile {
  enum class Source { empirical, vc_closed_form };
  std::vector<double> delta_grid;
  std::vector<double> values;
  Source source = Source::empirical;
};

EntropyProfile entropy_profile(const DiscretizedClass& cls, std::span<const double> deltas,
                               std::span<const DiscreteMeasure> measures);
EntropyProfile vc_entropy_profile(const VcMeta& meta, std::span<const double> deltas);

/// 2 sqrt(2v) delta sqrt(log(A/delta)): majorant of J(delta) for VC-type classes.
double vc_entropy_bound(double A, double v, double delta);

/// The product class {f g} with envelope F G.
DiscretizedClass product_class(const DiscretizedClass& left, const DiscretizedClass& right);

/// Measures that reweight `measure` by G^2 (for the left factor) and F^2 (for
/// the right factor); together with `measure` they stand in for the sup over
/// measures on the right-hand side of the product covering bound.
std::pair<DiscreteMeasure, DiscreteMeasure> product_reweighted_measures(const DiscretizedClass& left,
                                                                         const DiscretizedClass& right,
                                                                         const DiscreteMeasure& measure);

/// Largest ratio max_j |f_j(x)| / F(x) over the given points (<= 1 when the
/// envelope dominates).
double envelope_violation(const DiscretizedClass& cls, const Eigen::MatrixXd& points);

/// True when every measured greedy count on the eps grid is <= (A/eps)^v.
bool satisfies_vc_meta(const DiscretizedClass& cls, const DiscreteMeasure& measure, std::span<const double> epsilons);

/// Text matrix format: header row of column names, one row per atom, function
/// values in all but the last column, envelope in the last.
DiscretizedClass read_matrix_class(std::istream& in);
void write_matrix_class(std::ostream& out, const MatrixFamily& family);

}  // namespace supgauss
