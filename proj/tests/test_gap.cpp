#include "gapkit/gap.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace gapkit;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Subspace span(const Space& s, const Matrix& B) { return Subspace(s, B); }

Matrix random_basis(Rng& rng, Eigen::Index n, Eigen::Index k) {
  return Matrix::NullaryExpr(n, k, [&] { return gaussian(rng); });
}

void expect_contains(const GapBracket& b, double v, double tol) {
  EXPECT_LE(b.lower, v + tol);
  EXPECT_GE(b.upper, v - tol);
}

}  // namespace

TEST(Gap, IdenticalSubspaces) {
  Rng rng(1);
  for (double p : {1.0, 2.0, 3.0}) {
    const Space s = Space::lp(4, Exponent(p));
    for (Eigen::Index k : {1, 2, 3}) {
      const Matrix B = random_basis(rng, 4, k);
      const GapBracket b = gap(s, span(s, B), span(s, B), 0.05, 4);
      EXPECT_LE(b.lower, 1e-9);
      EXPECT_LE(b.upper, 0.05 + 1e-9) << "p=" << p << " k=" << k;
      EXPECT_EQ(b.upper_method, UpperMethod::net);
    }
  }
}

TEST(Gap, EuclideanLinesInThePlane) {
  const Space s = Space::lp(2, Exponent(2.0));
  for (double deg : {5.0, 30.0, 60.0, 89.0}) {
    const double a = deg * std::numbers::pi / 180;
    const Subspace E = span(s, vec({1, 0}));
    const Subspace F = span(s, vec({std::cos(a), std::sin(a)}));
    const GapBracket d = directed_gap(s, E, F, 0.02, 4);
    expect_contains(d, std::sin(a), 1e-12);
    const GapBracket g = gap(s, E, F, 0.02, 4);
    expect_contains(g, std::sin(a), 1e-12);
    EXPECT_LE(g.upper - g.lower, 1e-9);
  }
}

TEST(Gap, MaxNormDiagonalAgainstAxis) {
  const Space s = Space::lp(2, Exponent::infinity());
  const GapBracket d = directed_gap(s, span(s, vec({1, 1})), span(s, vec({1, 0})), 0.05, 4);
  expect_contains(d, 1.0, 1e-9);
}

TEST(Gap, SymmetricInArguments) {
  Rng rng(3);
  const Space s = Space::lp(5, Exponent(1.0));
  const Subspace E = span(s, random_basis(rng, 5, 2));
  const Subspace F = span(s, random_basis(rng, 5, 2));
  const GapBracket a = gap(s, E, F, 0.05, 3);
  const GapBracket b = gap(s, F, E, 0.05, 3);
  EXPECT_EQ(a.lower, b.lower);
  EXPECT_EQ(a.upper, b.upper);
}

TEST(Gap, RandomEuclideanLinesContainSine) {
  Rng rng(5);
  for (int t = 0; t < 30; ++t) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng() % 5);
    const Space s = Space::lp(n, Exponent(2.0));
    const Vector u = gaussian_vector(rng, n);
    const Vector v = gaussian_vector(rng, n);
    const double cosang = std::abs(u.dot(v)) / (u.norm() * v.norm());
    const double sine = std::sqrt(std::max(0.0, 1 - cosang * cosang));
    const GapBracket b = gap(s, span(s, u), span(s, v), 0.02, 4);
    expect_contains(b, sine, 1e-4);
    EXPECT_LE(b.upper - b.lower, 2 * 0.02 + 1e-4);
  }
}

TEST(Gap, TwoDimensionalEuclideanPlanesContainLargestPrincipalSine) {
  Rng rng(6);
  for (int t = 0; t < 5; ++t) {
    const Space s = Space::lp(4, Exponent(2.0));
    const Matrix A = random_basis(rng, 4, 2);
    const Matrix B = random_basis(rng, 4, 2);
    const Subspace E = span(s, A), F = span(s, B);
    // Largest principal angle from the SVD of Q_E^T Q_F.
    Eigen::JacobiSVD<Matrix> svd(E.orthonormal().transpose() * F.orthonormal());
    const double cmin = svd.singularValues().minCoeff();
    const double sine = std::sqrt(std::max(0.0, 1 - cmin * cmin));
    const GapBracket b = gap(s, E, F, 0.02, 4);
    expect_contains(b, sine, 1e-6);
    EXPECT_LE(b.upper - b.lower, 0.02 + 1e-6);
  }
}

TEST(Gap, GridOracleForPlanes) {
  // sup over a fine sphere parametrization of E of d(x, B_F), with d from a
  // dense grid over B_F.  Outer grid error: Lipschitz constant of the sphere
  // curve times the angular spacing; inner: |B_F| grid step.
  Rng rng(7);
  const int outer = 240;
  const int inner = 60;
  for (Exponent p : {Exponent(1.0), Exponent(2.0), Exponent::infinity()}) {
    const Space s = Space::lp(4, p);
    const Matrix A = random_basis(rng, 4, 2);
    const Matrix Bm = random_basis(rng, 4, 2);
    const Subspace E = span(s, A), F = span(s, Bm);
    double rmax = 0.0;
    for (int i = 0; i < 720; ++i) {
      const double t = 2 * std::numbers::pi * i / 720;
      rmax = std::max(rmax, 1.0 / norm_eval(s, Bm * vec({std::cos(t), std::sin(t)})));
    }
    const double step = 1.05 * rmax / inner;
    const double lipF = norm_eval(s, Bm.col(0)) + norm_eval(s, Bm.col(1));
    std::vector<Vector> ball;
    for (int i = -inner; i <= inner; ++i) {
      for (int j = -inner; j <= inner; ++j) {
        const Vector w = Bm * vec({i * step, j * step});
        if (norm_eval(s, w) <= 1.0) ball.push_back(w);
      }
    }
    const Matrix& Q = E.orthonormal();
    double sup = 0.0, curve_lip = 0.0;
    Vector prev;
    for (int i = 0; i <= outer; ++i) {
      const double t = std::numbers::pi * i / outer;  // x and -x give the same value set for symmetric F
      Vector x = Q * vec({std::cos(t), std::sin(t)});
      x /= norm_eval(s, x);
      if (i > 0) curve_lip = std::max(curve_lip, norm_eval(s, x - prev));
      prev = x;
      double d = norm_eval(s, x);
      for (const Vector& w : ball) d = std::min(d, norm_eval(s, x - w));
      sup = std::max(sup, d);
    }
    const GapBracket b = directed_gap(s, E, F, 0.01, 4);
    const double tol = 2 * (lipF * step + curve_lip);
    EXPECT_LE(b.lower, sup + lipF * step + 1e-9) << p.to_string();
    EXPECT_GE(b.upper, sup - curve_lip - 1e-9) << p.to_string();
    EXPECT_NEAR(0.5 * (b.lower + b.upper), sup, tol + 0.01) << p.to_string();
  }
}

TEST(Gap, TriangleInequalityOnTriples) {
  Rng rng(8);
  for (double p : {1.0, 3.0}) {
    const Space s = Space::lp(4, Exponent(p));
    for (int t = 0; t < 4; ++t) {
      const Subspace E = span(s, random_basis(rng, 4, 2));
      const Subspace F = span(s, random_basis(rng, 4, 2));
      const Subspace G = span(s, random_basis(rng, 4, 2));
      const GapBracket eg = gap(s, E, G, 0.05, 3);
      const GapBracket ef = gap(s, E, F, 0.05, 3);
      const GapBracket fg = gap(s, F, G, 0.05, 3);
      EXPECT_LE(eg.lower, ef.upper + fg.upper + 1e-6);
    }
  }
}

TEST(Gap, ShrinkingDeltaNeverRaisesUpper) {
  Rng rng(9);
  const Space s = Space::lp(4, Exponent(1.5));
  const Subspace E = span(s, random_basis(rng, 4, 2));
  const Subspace F = span(s, random_basis(rng, 4, 2));
  double prev = 2.0;
  for (double delta : {0.2, 0.1, 0.05, 0.02}) {
    const GapBracket b = directed_gap(s, E, F, delta, 3);
    EXPECT_LE(b.upper, prev + 1e-8);
    EXPECT_LE(b.upper - b.lower, delta + 1e-8);
    prev = b.upper;
  }
}

TEST(Gap, HighDimensionFallsBackToTrivialUpper) {
  Rng rng(10);
  const Space s = Space::lp(7, Exponent(2.0));
  const GapBracket b = gap(s, span(s, random_basis(rng, 7, 5)), span(s, random_basis(rng, 7, 5)),
                           0.1, 2);
  EXPECT_EQ(b.upper_method, UpperMethod::trivial);
  EXPECT_EQ(b.upper, 1.0);
  EXPECT_GT(b.lower, 0.0);
}

TEST(Gap, EvaluationCapFlags) {
  Rng rng(11);
  const Space s = Space::lp(5, Exponent(1.0));
  GapOptions opt;
  opt.evaluation_cap = 50;
  const GapBracket b =
      directed_gap(s, span(s, random_basis(rng, 5, 3)), span(s, random_basis(rng, 5, 3)), 0.01, 1, opt);
  EXPECT_TRUE(b.cap_hit);
  EXPECT_EQ(b.upper_method, UpperMethod::trivial);
  EXPECT_EQ(b.upper, 1.0);
}

TEST(Gap, RejectsForeignSubspaces) {
  const Space a = Space::lp(3, Exponent(2.0));
  const Space b = Space::lp(3, Exponent(1.0));
  EXPECT_THROW(gap(a, span(a, vec({1, 0, 0})), span(b, vec({0, 1, 0})), 0.1, 2), InputError);
  EXPECT_THROW(gap(a, span(a, vec({1, 0, 0})), span(a, vec({0, 1, 0})), 0.6, 2), InputError);
}

TEST(DualGap, PerpendicularLines) {
  const Space s = Space::lp(2, Exponent(2.0));
  const DualGapReport r = dual_gap_check(s, span(s, vec({1, 0})), span(s, vec({0, 1})), 0.05, 2);
  EXPECT_NEAR(r.rhs_upper, 1.0, 1e-12);
  EXPECT_NEAR(r.lhs_lower, 1.0, 1e-12);
  EXPECT_TRUE(r.satisfied);
}

TEST(DualGap, IdenticalSubspaces) {
  const Space s = Space::lp(3, Exponent(1.0));
  Matrix B(3, 2);
  B << 1, 0, 2, 1, 0, 1;
  const DualGapReport r = dual_gap_check(s, span(s, B), span(s, B), 0.05, 2);
  EXPECT_LE(r.lhs_lower, 1e-9);
  EXPECT_TRUE(r.satisfied);
}

TEST(DualGap, RandomPairs) {
  Rng rng(12);
  for (double p : {1.0, 2.0, 3.0}) {
    const Space s = Space::lp(5, Exponent(p));
    for (int t = 0; t < 5; ++t) {
      const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng() % 3);
      const DualGapReport r = dual_gap_check(s, span(s, random_basis(rng, 5, k)),
                                             span(s, random_basis(rng, 5, k)), 0.05, 3);
      EXPECT_TRUE(r.satisfied) << "p=" << p << " lhs=" << r.lhs_lower << " rhs=" << r.rhs_upper;
    }
  }
}
