#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "supgauss/errors.hpp"
#include "supgauss/funcclass.hpp"

using namespace supgauss;

namespace {

DiscretizedClass matrix_class(const Eigen::MatrixXd& values, const Eigen::VectorXd& env) {
  DiscretizedClass c;
  c.family = std::make_shared<MatrixFamily>(values, env);
  return c;
}

double eq_dist(const Eigen::MatrixXd& v, const Eigen::VectorXd& w, Eigen::Index a, Eigen::Index b) {
  return std::sqrt((w.array() * (v.col(a) - v.col(b)).array().square()).sum());
}

// Smallest subset of functions such that every function is within distance < r
// of a chosen one.
std::size_t exhaustive_cover(const Eigen::MatrixXd& v, const Eigen::VectorXd& w, double r) {
  const auto N = v.cols();
  std::size_t best = static_cast<std::size_t>(N);
  for (unsigned mask = 1; mask < (1u << N); ++mask) {
    const auto k = static_cast<std::size_t>(__builtin_popcount(mask));
    if (k >= best) continue;
    bool ok = true;
    for (Eigen::Index j = 0; j < N && ok; ++j) {
      bool hit = false;
      for (Eigen::Index c = 0; c < N && !hit; ++c)
        if ((mask >> c) & 1u) hit = eq_dist(v, w, j, c) < r;
      ok = hit;
    }
    if (ok) best = k;
  }
  return best;
}

}  // namespace

TEST_CASE("singleton class covers itself") {
  Eigen::MatrixXd v(3, 1);
  v << 0.2, -0.5, 1.0;
  const auto cls = matrix_class(v, Eigen::Vector3d(1, 1, 1));
  const auto Q = DiscreteMeasure::over_atom_indices(3);
  for (double e : {0.01, 0.3, 1.0}) CHECK(covering_number(cls, Q, e) == 1);
  const std::vector<DiscreteMeasure> ms{Q};
  CHECK(entropy_integral(cls, 0.7, ms) == doctest::Approx(0.7).epsilon(1e-14));
}

TEST_CASE("two functions at unit distance") {
  // Single atom, f1 = 0, f2 = 1, F = 1: e_Q(f1, f2) = 1 = ||F||.
  Eigen::MatrixXd v(1, 2);
  v << 0.0, 1.0;
  const auto cls = matrix_class(v, Eigen::VectorXd::Ones(1));
  const auto Q = DiscreteMeasure::over_atom_indices(1);
  CHECK(covering_number(cls, Q, 0.5) == 2);
  CHECK(covering_number(cls, Q, std::nextafter(1.0, 0.0)) == 2);
  CHECK(covering_number(cls, Q, 1.0) == 2);  // distance 1 is not strictly below radius 1

  // Integrand is sqrt(1 + log 2) on all of (0, 1).
  const std::vector<DiscreteMeasure> ms{Q};
  CHECK(entropy_integral(cls, 1.0, ms) == doctest::Approx(std::sqrt(1.0 + std::log(2.0))).epsilon(1e-12));
  CHECK(entropy_integral(cls, 0.5, ms) <= entropy_integral(cls, 1.0, ms));
}

TEST_CASE("cube vertices match exhaustive minimal nets") {
  // 8 functions on 3 atoms: the vertices of {0,1}^3, envelope 1.
  Eigen::MatrixXd v(3, 8);
  for (int j = 0; j < 8; ++j)
    for (int a = 0; a < 3; ++a) v(a, j) = (j >> a) & 1;
  const auto cls = matrix_class(v, Eigen::Vector3d::Ones());
  const auto Q = DiscreteMeasure::over_atom_indices(3);
  for (double e = 0.05; e <= 1.0; e += 0.05) {
    const auto greedy = covering_number(cls, Q, e);
    const auto exact = exhaustive_cover(v, Q.weights, e);
    CHECK(greedy >= exact);
    CHECK(greedy <= exhaustive_cover(v, Q.weights, e / 2));
  }
}

TEST_CASE("random classes: greedy bracketed by minimal nets, counts monotone") {
  std::mt19937_64 eng(7);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int trial = 0; trial < 30; ++trial) {
    const int N = 2 + trial % 9, m = 1 + trial % 5;
    Eigen::MatrixXd v(m, N);
    for (int a = 0; a < m; ++a)
      for (int j = 0; j < N; ++j) v(a, j) = U(eng);
    Eigen::VectorXd env = v.cwiseAbs().rowwise().maxCoeff().array() + 0.1;
    const auto cls = matrix_class(v, env);
    const auto Q = DiscreteMeasure::over_atom_indices(static_cast<std::size_t>(m));
    const double Fn = std::sqrt((Q.weights.array() * env.array().square()).sum());
    std::vector<double> eps;
    for (int k = 1; k <= 20; ++k) eps.push_back(k / 20.0);
    const auto rep = covering_profile(cls, Q, eps);
    for (std::size_t k = 0; k < eps.size(); ++k) {
      CHECK(rep.counts[k] >= exhaustive_cover(v, Q.weights, eps[k] * Fn));
      CHECK(rep.counts[k] <= exhaustive_cover(v, Q.weights, eps[k] * Fn / 2));
      CHECK(rep.counts[k] <= static_cast<std::size_t>(N));
      if (k) CHECK(rep.counts[k] <= rep.counts[k - 1]);
    }
  }
}

TEST_CASE("covering rejects bad inputs") {
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(2, 2);
  const auto cls = matrix_class(v, Eigen::Vector2d::Zero());
  const auto Q = DiscreteMeasure::over_atom_indices(2);
  CHECK_THROWS_WITH_AS(covering_number(cls, Q, 0.5), doctest::Contains("degenerate envelope"), InvalidArgument);

  const auto ok = matrix_class(v, Eigen::Vector2d::Ones());
  DiscreteMeasure bad = Q;
  bad.weights << 0.7, 0.7;
  CHECK_THROWS_AS(covering_number(ok, bad, 0.5), InvalidArgument);
  bad.weights << 1.5, -0.5;
  CHECK_THROWS_AS(covering_number(ok, bad, 0.5), InvalidArgument);
  CHECK_THROWS_AS(covering_number(ok, Q, 0.0), InvalidArgument);
  CHECK_THROWS_AS(entropy_integral(ok, 0.5, std::span<const DiscreteMeasure>{}), InvalidArgument);
}

TEST_CASE("identical functions give N = 1") {
  Eigen::MatrixXd v(4, 5);
  for (int j = 0; j < 5; ++j) v.col(j) << 0.1, 0.2, -0.3, 0.4;
  const auto cls = matrix_class(v, Eigen::Vector4d::Ones());
  const auto Q = DiscreteMeasure::over_atom_indices(4);
  CHECK(covering_number(cls, Q, 1e-6) == 1);
}

TEST_CASE("vc closed form") {
  CHECK(vc_entropy_bound(std::exp(1.0), 1.0, 1.0) == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-14));
  CHECK(vc_entropy_bound(std::exp(2.0), 4.0, 1.0) == doctest::Approx(8.0).epsilon(1e-14));
  for (double d = 0.05; d <= 1.0; d += 0.05)
    CHECK(vc_entropy_bound(3.0, 2.0, d / 2) <= vc_entropy_bound(3.0, 2.0, d));
  CHECK_THROWS_AS(vc_entropy_bound(2.0, 1.0, 0.5), InvalidArgument);
  CHECK_THROWS_AS(vc_entropy_bound(3.0, 0.5, 0.5), InvalidArgument);
}

TEST_CASE("entropy profile shape and VC majorant") {
  // Indicators 1(x <= t) on 40 uniform atoms: VC type with v = 1.
  const int m = 40, N = 25;
  Eigen::MatrixXd v(m, N);
  for (int a = 0; a < m; ++a)
    for (int j = 0; j < N; ++j) v(a, j) = (a + 0.5) / m <= (j + 1.0) / N ? 1.0 : 0.0;
  auto cls = matrix_class(v, Eigen::VectorXd::Ones(m));
  cls.vc_meta = VcMeta{std::exp(1.0) * 2, 2.0};
  const auto Q = DiscreteMeasure::over_atom_indices(m);
  const std::vector<DiscreteMeasure> ms{Q};
  std::vector<double> deltas;
  for (int k = 1; k <= 16; ++k) deltas.push_back(k / 16.0);
  const auto prof = entropy_profile(cls, deltas, ms);
  for (std::size_t k = 1; k < deltas.size(); ++k) {
    CHECK(prof.values[k] >= prof.values[k - 1]);
    CHECK(prof.values[k] / deltas[k] <= prof.values[k - 1] / deltas[k - 1] * (1 + 1e-9));
  }
  for (std::size_t k = 0; k < 4; ++k)
    for (int c : {1, 2, 4}) {
      const std::size_t kc = (k + 1) * static_cast<std::size_t>(c) - 1;
      CHECK(prof.values[kc] <= c * prof.values[k] * (1 + 1e-9));
    }
  const auto vc = vc_entropy_profile(*cls.vc_meta, deltas);
  for (std::size_t k = 0; k < deltas.size(); ++k) CHECK(prof.values[k] <= vc.values[k]);
  CHECK(vc.source == EntropyProfile::Source::vc_closed_form);
  CHECK(satisfies_vc_meta(cls, Q, deltas));
}

TEST_CASE("product class") {
  Eigen::MatrixXd f(3, 1), g(3, 1);
  f << 1, -2, 0.5;
  g << 3, 1, -1;
  const auto F = matrix_class(f, Eigen::Vector3d(1, 2, 1));
  const auto G = matrix_class(g, Eigen::Vector3d(3, 1, 1));
  const auto FG = product_class(F, G);
  CHECK(FG.size() == 1);
  std::vector<double> out(1);
  for (int a = 0; a < 3; ++a) {
    const double x[1] = {static_cast<double>(a)};
    FG.family->evaluate(x, out);
    CHECK(out[0] == f(a) * g(a));
    CHECK(FG.family->envelope(x) == F.family->envelope(x) * G.family->envelope(x));
  }

  // Identity element: class of the constant 1 with envelope 1.
  Eigen::MatrixXd many(3, 4);
  many.setRandom();
  const auto M = matrix_class(many, Eigen::Vector3d::Ones());
  const auto one = matrix_class(Eigen::MatrixXd::Ones(3, 1), Eigen::Vector3d::Ones());
  const auto M1 = product_class(M, one);
  CHECK(M1.size() == 4);
  for (int a = 0; a < 3; ++a) {
    const double x[1] = {static_cast<double>(a)};
    M1.family->evaluate(x, out = std::vector<double>(4));
    for (int j = 0; j < 4; ++j) CHECK(out[static_cast<std::size_t>(j)] == many(a, j));
  }

  CallableFamily::Fn zero = [](std::span<const double>) { return 0.0; };
  DiscretizedClass two_d;
  two_d.family = std::make_shared<CallableFamily>(std::vector<CallableFamily::Fn>{zero}, zero, 2);
  CHECK_THROWS_AS(product_class(M, two_d), InvalidArgument);
}

TEST_CASE("envelope dominance check") {
  CallableFamily::Fn f = [](std::span<const double> x) { return x[0]; };
  CallableFamily::Fn F = [](std::span<const double>) { return 1.0; };
  DiscretizedClass cls;
  cls.family = std::make_shared<CallableFamily>(std::vector<CallableFamily::Fn>{f}, F, 1);
  Eigen::MatrixXd pts(3, 1);
  pts << 0.5, -1.0, 0.25;
  CHECK(envelope_violation(cls, pts) == 1.0);
  pts(0, 0) = 2.0;
  CHECK(envelope_violation(cls, pts) == 2.0);
}

TEST_CASE("matrix text format round trip") {
  std::istringstream in("a,b,F\n0.5,-0.25,1\n0.1,0.2,0.3\n");
  const auto cls = read_matrix_class(in);
  CHECK(cls.size() == 2);
  const auto& mf = dynamic_cast<const MatrixFamily&>(*cls.family);
  CHECK(mf.values()(0, 1) == -0.25);
  CHECK(mf.envelope_values()(1) == 0.3);
  std::ostringstream out;
  write_matrix_class(out, mf);
  CHECK(out.str() == "a,b,F\n0.5,-0.25,1\n0.1,0.2,0.3\n");

  std::istringstream ragged("a,F\n1,2,3\n");
  CHECK_THROWS_WITH_AS(read_matrix_class(ragged), doctest::Contains("line 2"), InvalidArgument);
  std::istringstream dominated("a,F\n2,1\n");
  CHECK_THROWS_AS(read_matrix_class(dominated), InvalidArgument);
  std::istringstream text("a,F\nx,1\n");
  CHECK_THROWS_AS(read_matrix_class(text), InvalidArgument);
}

TEST_CASE("product covering numbers are submultiplicative") {
  std::mt19937_64 eng(2024);
  std::uniform_real_distribution<double> U(-1, 1);
  int failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 1 + trial % 5, nf = 1 + trial % 4, ng = 1 + (trial / 4) % 3;
    Eigen::MatrixXd f(m, nf), g(m, ng);
    for (int a = 0; a < m; ++a) {
      for (int j = 0; j < nf; ++j) f(a, j) = U(eng);
      for (int j = 0; j < ng; ++j) g(a, j) = U(eng);
    }
    const auto F = matrix_class(f, f.cwiseAbs().rowwise().maxCoeff().array() + 0.05);
    const auto G = matrix_class(g, g.cwiseAbs().rowwise().maxCoeff().array() + 0.05);
    const auto FG = product_class(F, G);
    const auto Q = DiscreteMeasure::over_atom_indices(static_cast<std::size_t>(m));
    const auto [R1, R2] = product_reweighted_measures(F, G, Q);
    for (double e = 0.05; e <= 1.0; e += 0.05) {
      const double lhs = static_cast<double>(covering_number(FG, Q, std::min(1.0, std::sqrt(2.0) * e)));
      std::size_t nF = 0, nG = 0;
      for (const auto* M : {&Q, &R1, &R2}) {
        nF = std::max(nF, covering_number(F, *M, e));
        nG = std::max(nG, covering_number(G, *M, e));
      }
      if (lhs > static_cast<double>(nF * nG)) ++failures;
    }
  }
  CHECK(failures == 0);
}
