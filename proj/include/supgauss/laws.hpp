#pragma once

// Built-in data laws with evaluable densities, so that means and covariances
// of kernel and series classes can be computed by quadrature.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "supgauss/rng.hpp"

namespace supgauss {

/// Law of a d-dimensional design point X.
class DataLaw {
 public:
  virtual ~DataLaw() = default;
  virtual std::size_t dim() const = 0;
  virtual void sample(Engine& eng, std::span<double> x) const = 0;
  virtual bool has_density() const { return false; }
  virtual double density(std::span<const double> /*x*/) const { return 0.0; }
  /// Bounding box of the support (finite for all built-ins).
  virtual double support_lo(std::size_t /*axis*/) const { return 0.0; }
  virtual double support_hi(std::size_t /*axis*/) const { return 1.0; }
  virtual std::string name() const = 0;
};

/// One-dimensional building block.
class Law1D {
 public:
  virtual ~Law1D() = default;
  virtual double sample(Engine& eng) const = 0;
  virtual double density(double x) const = 0;
  virtual double lo() const = 0;
  virtual double hi() const = 0;
  virtual std::string name() const = 0;
};

class UniformLaw final : public Law1D {
 public:
  UniformLaw(double lo = 0.0, double hi = 1.0);
  double sample(Engine& eng) const override;
  double density(double x) const override;
  double lo() const override { return lo_; }
  double hi() const override { return hi_; }
  std::string name() const override;

 private:
  double lo_, hi_;
};

/// Beta(a, b) on [0, 1]. Integer shapes are drawn as order statistics of
/// a + b - 1 uniforms; other shapes through two gamma draws.
class BetaLaw final : public Law1D {
 public:
  BetaLaw(double a, double b);
  double sample(Engine& eng) const override;
  double density(double x) const override;
  double lo() const override { return 0.0; }
  double hi() const override { return 1.0; }
  std::string name() const override;

 private:
  double a_, b_, log_norm_;
  bool integer_shapes_;
};

/// N(mu, sd^2) truncated to [lo, hi], drawn by inversion.
class TruncatedNormalLaw final : public Law1D {
 public:
  TruncatedNormalLaw(double mu, double sd, double lo, double hi);
  double sample(Engine& eng) const override;
  double density(double x) const override;
  double lo() const override { return lo_; }
  double hi() const override { return hi_; }
  std::string name() const override;

 private:
  double mu_, sd_, lo_, hi_, cdf_lo_, mass_;
};

/// Independent coordinates.
class ProductLaw final : public DataLaw {
 public:
  explicit ProductLaw(std::vector<std::shared_ptr<const Law1D>> marginals);
  std::size_t dim() const override { return marginals_.size(); }
  void sample(Engine& eng, std::span<double> x) const override;
  bool has_density() const override { return true; }
  double density(std::span<const double> x) const override;
  double support_lo(std::size_t axis) const override { return marginals_[axis]->lo(); }
  double support_hi(std::size_t axis) const override { return marginals_[axis]->hi(); }
  std::string name() const override;
  const Law1D& marginal(std::size_t axis) const { return *marginals_[axis]; }

 private:
  std::vector<std::shared_ptr<const Law1D>> marginals_;
};

/// Same law on every axis.
std::shared_ptr<const DataLaw> iid_law(std::shared_ptr<const Law1D> marginal, std::size_t d);

double normal_cdf(double z);
double normal_pdf(double z);
double normal_quantile(double p);

}  // namespace supgauss
