#include "gapkit/spaces.hpp"

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

Subspace line(const Space& s, std::initializer_list<double> xs) {
  return Subspace(s, Matrix(vec(xs)));
}

std::vector<Space> sample_spaces() {
  return {Space::lp(4, Exponent(1.0)),
          Space::lp(4, Exponent(2.0)),
          Space::lp(4, Exponent(3.0)),
          Space::lp(4, Exponent::infinity()),
          Space::weighted_lp(Exponent(1.5), vec({1.0, 2.0, 0.5, 3.0})),
          Space::block_sum(Exponent(2.0),
                           {Space::lp(2, Exponent(1.0)), Space::lp(2, Exponent::infinity())}),
          Space::dual(Space::lp(4, Exponent(1.5)))};
}

}  // namespace

TEST(Norms, ClosedFormValues) {
  EXPECT_DOUBLE_EQ(norm_eval(Space::lp(3, Exponent(2.0)), vec({3, 4, 0})), 5.0);
  EXPECT_DOUBLE_EQ(norm_eval(Space::lp(2, Exponent(1.0)), vec({1, -1})), 2.0);
  EXPECT_DOUBLE_EQ(norm_eval(Space::lp(2, Exponent::infinity()), vec({1, -7})), 7.0);
  // (sum |v|^r)^(1/r) by hand: (1 + 1)^2.
  EXPECT_NEAR(norm_eval(Space::quasi_lr(2, 0.5), vec({1, 1})), 4.0, 1e-14);
  EXPECT_NEAR(norm_eval(Space::weighted_lp(Exponent(2.0), vec({4, 1})), vec({1, 1})),
              std::sqrt(5.0), 1e-14);
  const Space b = Space::block_sum(Exponent(1.0), {Space::lp(2, Exponent(2.0)),
                                                   Space::lp(1, Exponent(2.0))});
  EXPECT_NEAR(norm_eval(b, vec({3, 4, -2})), 7.0, 1e-14);
}

TEST(Norms, RejectsBadInput) {
  const Space s = Space::lp(3, Exponent(2.0));
  EXPECT_THROW(norm_eval(s, vec({1, 2})), InputError);
  EXPECT_THROW(norm_eval(s, vec({1, 2, std::nan("")})), InputError);
  EXPECT_THROW(Space::lp(3, Exponent(0.5)), InputError);
  EXPECT_THROW(Space::quasi_lr(3, 1.0), InputError);
  EXPECT_THROW(Space::weighted_lp(Exponent(2.0), vec({1, -1})), InputError);
}

TEST(Norms, AxiomsOnRandomVectors) {
  Rng rng(11);
  for (const Space& s : sample_spaces()) {
    for (int k = 0; k < 1000; ++k) {
      const Vector u = gaussian_vector(rng, 4);
      const Vector v = gaussian_vector(rng, 4);
      const double c = 4.0 * gaussian(rng);
      const double nu = norm_eval(s, u);
      EXPECT_NEAR(norm_eval(s, c * u), std::abs(c) * nu, 1e-12 * std::max(1.0, std::abs(c) * nu));
      EXPECT_GE(nu + norm_eval(s, v) - norm_eval(s, u + v), -1e-9);
    }
  }
}

TEST(Norms, QuasiNormRTriangle) {
  const double r = 0.4;
  const Space s = Space::quasi_lr(5, r);
  Rng rng(5);
  for (int k = 0; k < 1000; ++k) {
    const Vector u = gaussian_vector(rng, 5);
    const Vector v = gaussian_vector(rng, 5);
    const double lhs = std::pow(norm_eval(s, u + v), r);
    const double rhs = std::pow(norm_eval(s, u), r) + std::pow(norm_eval(s, v), r);
    EXPECT_GE(rhs - lhs, -1e-9);
    EXPECT_NEAR(norm_eval(s, -3.0 * u), 3.0 * norm_eval(s, u), 1e-12 * norm_eval(s, u) * 3);
  }
}

TEST(DualNorms, ClosedForms) {
  EXPECT_DOUBLE_EQ(dual_norm_eval(Space::lp(2, Exponent(1.0)), vec({3, -5})), 5.0);
  EXPECT_DOUBLE_EQ(dual_norm_eval(Space::lp(2, Exponent(2.0)), vec({3, 4})), 5.0);
  EXPECT_NEAR(dual_norm_eval(Space::lp(2, Exponent(1.5)), vec({1, 1})), std::cbrt(2.0), 1e-14);
  EXPECT_THROW(dual_norm_eval(Space::quasi_lr(2, 0.5), vec({1, 1})), UnsupportedError);
}

TEST(DualNorms, MatchGridMaximization) {
  // sup <f, v> over the unit sphere of l_1.5 in the plane, by angular scan.
  const Space s = Space::lp(2, Exponent(1.5));
  const Vector f = vec({1, 1});
  double best = 0.0;
  const int steps = 200000;
  for (int k = 0; k < steps; ++k) {
    const double t = 2.0 * std::numbers::pi * k / steps;
    const Vector v = vec({std::cos(t), std::sin(t)});
    best = std::max(best, f.dot(v) / norm_eval(s, v));
  }
  EXPECT_NEAR(dual_norm_eval(s, f), best, 1e-9);
}

TEST(DualNorms, HoelderConjugates) {
  Rng rng(3);
  for (double p : {1.0, 1.25, 2.0, 3.0, 7.5}) {
    const Exponent e(p);
    const Space s = Space::lp(6, e);
    const Space conj = Space::lp(6, e.conjugate());
    for (int k = 0; k < 100; ++k) {
      const Vector f = gaussian_vector(rng, 6);
      EXPECT_NEAR(dual_norm_eval(s, f), norm_eval(conj, f), 1e-9);
      EXPECT_NEAR(norm_eval(Space::dual(Space::dual(s)), f), norm_eval(s, f), 1e-12);
    }
  }
  const Space inf = Space::lp(3, Exponent::infinity());
  EXPECT_DOUBLE_EQ(dual_norm_eval(inf, vec({1, -2, 3})), 6.0);
}

TEST(DualNorms, WeightedAndBlockAgreeWithSimplify) {
  Rng rng(8);
  for (const Space& s : sample_spaces()) {
    const Space d = Space::dual(s);
    const Space simple = simplify(d);
    for (int k = 0; k < 50; ++k) {
      const Vector f = gaussian_vector(rng, 4);
      EXPECT_NEAR(norm_eval(d, f), norm_eval(simple, f), 1e-12 * norm_eval(d, f));
      // Hoelder: <f, v> <= |f|_* |v|.
      const Vector v = gaussian_vector(rng, 4);
      EXPECT_LE(f.dot(v), dual_norm_eval(s, f) * norm_eval(s, v) + 1e-12);
    }
  }
}

TEST(Subspaces, Validation) {
  const Space s = Space::lp(3, Exponent(2.0));
  Matrix deficient(3, 2);
  deficient << 1, 2, 1, 2, 1, 2;
  EXPECT_THROW(Subspace(s, deficient), InputError);
  EXPECT_THROW(Subspace(s, Matrix::Identity(3, 3)), InputError);
  EXPECT_NO_THROW(Subspace(s, Matrix::Identity(3, 3), true));
  EXPECT_THROW(Subspace(s, Matrix::Identity(2, 1)), InputError);
}

TEST(Quotient, Examples) {
  const Space l1 = Space::lp(2, Exponent(1.0));
  const Subspace k = line(l1, {1, -1});
  // min_t |1 - t| + |t| scanned on a fine grid.
  double scan = 1e9;
  for (int i = -3000; i <= 3000; ++i) {
    const double t = i * 1e-3;
    scan = std::min(scan, std::abs(1 - t) + std::abs(t));
  }
  EXPECT_NEAR(quotient_norm_eval(l1, k, vec({1, 0})).value, scan, 1e-9);
  EXPECT_NEAR(quotient_norm_eval(l1, k, vec({2, -2})).value, 0.0, 1e-12);

  const Space l2 = Space::lp(2, Exponent(2.0));
  EXPECT_NEAR(quotient_norm_eval(l2, line(l2, {1, 0}), vec({3, 4})).value, 4.0, 1e-12);
}

TEST(Quotient, BoundedByParentNormAndZeroOnKernel) {
  Rng rng(21);
  for (double p : {1.0, 1.5, 2.0, 4.0}) {
    const Space s = p == 4.0 ? Space::lp(5, Exponent::infinity()) : Space::lp(5, Exponent(p));
    for (int k = 0; k < 20; ++k) {
      const Subspace K(s, Matrix::NullaryExpr(5, 2, [&] { return gaussian(rng); }));
      const Vector v = gaussian_vector(rng, 5);
      const Estimate q = quotient_norm_eval(s, K, v);
      EXPECT_TRUE(q.converged);
      EXPECT_LE(q.value, norm_eval(s, v) + 1e-12);
      const Vector e = K.basis() * gaussian_vector(rng, 2);
      EXPECT_NEAR(quotient_norm_eval(s, K, e).value, 0.0, 1e-7 * std::max(1.0, e.norm()));
    }
  }
}

TEST(Quotient, SolverPathMatchesLinearProgram) {
  // The l_1 quotient is solved exactly; the same norm written as a block sum of
  // one-dimensional blocks goes through the ellipsoid solver.
  const Space l1 = Space::lp(4, Exponent(1.0));
  std::vector<Space> ones(4, Space::lp(1, Exponent(2.0)));
  const Space blocks = Space::block_sum(Exponent(1.0), ones);
  Rng rng(4);
  for (int k = 0; k < 10; ++k) {
    const Matrix B = Matrix::NullaryExpr(4, 2, [&] { return gaussian(rng); });
    const Vector v = gaussian_vector(rng, 4);
    const double exact = quotient_norm_eval(l1, Subspace(l1, B), v).value;
    const Estimate it = quotient_norm_eval(blocks, Subspace(blocks, B), v);
    EXPECT_TRUE(it.converged);
    EXPECT_NEAR(it.value, exact, 1e-6 * std::max(1.0, exact));
  }
}

TEST(Quotient, SpaceOfCosets) {
  const Space l1 = Space::lp(3, Exponent(1.0));
  const Subspace K = line(l1, {1, 1, 1});
  const Space q = Space::quotient(l1, K);
  EXPECT_EQ(q.dim(), 2);
  Rng rng(6);
  for (int k = 0; k < 50; ++k) {
    const Vector c = gaussian_vector(rng, 2);
    const Vector z = K.complement() * c;
    EXPECT_NEAR(norm_eval(q, c), quotient_norm_eval(l1, K, z).value, 1e-12);
    // The dual of a quotient is the annihilator with the parent dual norm;
    // check Hoelder against the quotient norm.
    const Vector f = gaussian_vector(rng, 2);
    const Vector d = gaussian_vector(rng, 2);
    EXPECT_LE(f.dot(d), dual_norm_eval(q, f) * norm_eval(q, d) + 1e-9);
  }
  EXPECT_THROW(Space::quotient(Space::lp(3, Exponent(2.0)), K), InputError);
}

TEST(Distance, Examples) {
  const Space l2 = Space::lp(2, Exponent(2.0));
  // min_{|t|<=1} sqrt(1 + t^2).
  EXPECT_NEAR(dist_to_unit_ball(l2, vec({1, 0}), line(l2, {0, 1})).value, 1.0, 1e-12);
  const double a = std::numbers::pi / 6;
  EXPECT_NEAR(dist_to_unit_ball(l2, vec({std::cos(a), std::sin(a)}), line(l2, {1, 0})).value,
              0.5, 1e-12);
  const Space linf = Space::lp(2, Exponent::infinity());
  double scan = 1e9;
  for (int i = -1000; i <= 1000; ++i) {
    const double t = i * 1e-3;
    scan = std::min(scan, std::max(std::abs(1 - t), std::abs(t)));
  }
  EXPECT_NEAR(dist_to_unit_ball(linf, vec({1, 0}), line(linf, {1, 1})).value, scan, 1e-9);
}

TEST(Distance, BoundedByNorm) {
  Rng rng(13);
  for (const Space& s : sample_spaces()) {
    for (int k = 0; k < 20; ++k) {
      const Subspace F(s, Matrix::NullaryExpr(4, 2, [&] { return gaussian(rng); }));
      const Vector x = 2.0 * gaussian_vector(rng, 4);
      const BallDistance d = dist_to_unit_ball(s, x, F);
      EXPECT_TRUE(d.converged);
      EXPECT_GE(d.value, 0.0);
      EXPECT_LE(d.value, norm_eval(s, x) + 1e-12);
      EXPECT_LE(norm_eval(s, d.nearest), 1.0 + 1e-12);
      EXPECT_NEAR(norm_eval(s, x - d.nearest), d.value, 1e-9 * std::max(1.0, d.value));
    }
  }
}

TEST(Distance, GridOracleInPlanes) {
  // Dense grid over the unit ball of a two-dimensional F.
  Rng rng(17);
  const std::vector<Space> spaces = {Space::lp(4, Exponent(1.0)), Space::lp(4, Exponent(2.0)),
                                     Space::lp(4, Exponent(3.0)),
                                     Space::lp(4, Exponent::infinity())};
  for (const Space& s : spaces) {
    for (int k = 0; k < 3; ++k) {
      const Matrix B = Matrix::NullaryExpr(4, 2, [&] { return gaussian(rng); });
      const Subspace F(s, B);
      const Vector x = gaussian_vector(rng, 4);
      double rmax = 0.0;
      for (int i = 0; i < 360; ++i) {
        const double t = 2 * std::numbers::pi * i / 360;
        const Vector c = vec({std::cos(t), std::sin(t)});
        rmax = std::max(rmax, 1.0 / norm_eval(s, B * c));
      }
      const double step = rmax / 150;
      double best = norm_eval(s, x);
      double lip = 0.0;  // |B c| <= lip * |c|_inf, so grid error <= lip * step
      for (int j = 0; j < 2; ++j) lip += norm_eval(s, B.col(j));
      for (int i = -150; i <= 150; ++i) {
        for (int j = -150; j <= 150; ++j) {
          const Vector c = vec({i * step, j * step});
          const Vector w = B * c;
          if (norm_eval(s, w) <= 1.0) best = std::min(best, norm_eval(s, x - w));
        }
      }
      const double d = dist_to_unit_ball(s, x, F).value;
      EXPECT_LE(d, best + 1e-9);
      EXPECT_GE(d, best - 2 * lip * step);
    }
  }
}

TEST(Lift, Examples) {
  const Space l1 = Space::lp(2, Exponent(1.0));
  const Subspace k = line(l1, {1, -1});
  const Lift z = lift_from_quotient(l1, k, vec({1, 0}), 1.01);
  EXPECT_TRUE(z.ok);
  EXPECT_LE(norm_eval(l1, z.z), 1.01);
  // Same coset: z - (1, 0) is a multiple of (1, -1).
  EXPECT_NEAR(z.z[0] + z.z[1], 1.0, 1e-12);
  EXPECT_EQ(lift_from_quotient(l1, k, vec({3, -3}), 1.01).z, Vector::Zero(2));
  EXPECT_THROW(lift_from_quotient(l1, k, vec({1, 0}), 1.0), InputError);
}

TEST(Lift, ExactHomogeneity) {
  Rng rng(2);
  for (double p : {1.0, 1.7}) {
    const Space s = Space::lp(5, Exponent(p));
    const Subspace K(s, Matrix::NullaryExpr(5, 2, [&] { return gaussian(rng); }));
    for (int k = 0; k < 10; ++k) {
      const Vector v = gaussian_vector(rng, 5);
      const Lift a = lift_from_quotient(s, K, v, 1.01);
      EXPECT_TRUE(a.ok);
      EXPECT_EQ(lift_from_quotient(s, K, 2.0 * v, 1.01).z, 2.0 * a.z);
      EXPECT_EQ(lift_from_quotient(s, K, -v, 1.01).z, -a.z);
      EXPECT_EQ(lift_from_quotient(s, K, 0.125 * v, 1.01).z, 0.125 * a.z);
      const Vector diff = a.z - v;
      EXPECT_LT((diff - K.orthonormal() * (K.orthonormal().transpose() * diff)).norm(), 1e-9);
    }
  }
}

TEST(Annihilator, Examples) {
  const Space s = Space::lp(2, Exponent(2.0));
  const Subspace a = annihilator(s, line(s, {1, 0}));
  EXPECT_NEAR(std::abs(a.basis()(1, 0)), 1.0, 1e-14);
  EXPECT_NEAR(a.basis()(0, 0), 0.0, 1e-14);
  const Subspace b = annihilator(s, line(s, {1, 1}));
  EXPECT_NEAR(b.basis()(0, 0) + b.basis()(1, 0), 0.0, 1e-14);
  EXPECT_EQ(b.parent().kind(), SpaceKind::dual);
}

TEST(Annihilator, RankNullityAgainstIndependentKernel) {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng() % 5);
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng() % (n - 1));
    const Space s = Space::lp(n, Exponent(1.5));
    const Matrix E = Matrix::NullaryExpr(n, k, [&] { return gaussian(rng); });
    const Subspace perp = annihilator(s, Subspace(s, E));
    EXPECT_EQ(perp.dim() + k, n);
    EXPECT_LT((E.transpose() * perp.basis()).cwiseAbs().maxCoeff(), 1e-12);
    // Kernel of E^T from a full-pivoting LU decomposition has the same span.
    const Matrix kern = Eigen::FullPivLU<Matrix>(E.transpose()).kernel();
    EXPECT_EQ(kern.cols(), perp.dim());
    const Matrix P = perp.orthonormal() * perp.orthonormal().transpose();
    EXPECT_LT((P * kern - kern).cwiseAbs().maxCoeff(), 1e-10);
  }
}
