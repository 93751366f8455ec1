#include "gapkit/couplings.hpp"
#include "gapkit/gap.hpp"
#include "gapkit/interp.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace gapkit;

namespace {

Matrix random_basis(Rng& rng, Eigen::Index n, Eigen::Index k) {
  Matrix B(n, k);
  for (Eigen::Index j = 0; j < k; ++j) B.col(j) = gaussian_vector(rng, n);
  return B;
}

}  // namespace

TEST(Maps, MazurPreservesNormsAndIsOdd) {
  const Coupling c = mazur_coupling(8, 1.5, 3.0);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Vector x = std::exp(3.0 * gaussian(rng)) * gaussian_vector(rng, 8);
    const Vector fx = apply_phi(c, x);
    EXPECT_NEAR(norm_eval(c.codomain, fx), norm_eval(c.domain, x), 1e-12 * norm_eval(c.domain, x));
    EXPECT_EQ(apply_phi(c, -x), -fx);
    EXPECT_EQ(apply_phi(c, 4.0 * x), 4.0 * fx);
    const double lam = 0.1 + uniform01(rng);
    EXPECT_LE((apply_phi(c, lam * x) - lam * fx).norm(), 1e-12 * lam * fx.norm());
    EXPECT_LE((apply_psi(c, fx) - x).norm(), 1e-12 * x.norm());
  }
}

TEST(Maps, MazurCoordinateFormula) {
  const Coupling c = mazur_coupling(2, 2.0, 4.0);
  // x = (3, -4): |x|_2 = 5, xi = (0.6, -0.8), xi^{1/2} signed, times 5.
  const Vector out = apply_phi(c, Vector{{3.0, -4.0}});
  EXPECT_NEAR(out[0], 5.0 * std::sqrt(0.6), 1e-14);
  EXPECT_NEAR(out[1], -5.0 * std::sqrt(0.8), 1e-14);
}

TEST(Maps, ValidationRejectsExpandingMap) {
  const Space X = Space::lp(3, Exponent(2.0));
  const Coupling bad{X, X, {recipe::Scale{2.0}}, {recipe::Identity{}}};
  EXPECT_THROW(validate_coupling(bad), InputError);
  EXPECT_THROW(delta_estimate(bad, 3, 10, 1), InputError);
  EXPECT_THROW(scale_coupling(X, 1.5), InputError);
}

TEST(Maps, CompositeAppliesInOrder) {
  const MapRecipe m{recipe::Composite{{MapRecipe{recipe::Mazur{1.5, 3.0}}, MapRecipe{recipe::Mazur{3.0, 1.5}}}}};
  const Vector x{{0.3, -1.2, 2.0}};
  EXPECT_LE((apply_map(m, x) - x).norm(), 1e-14);
}

TEST(Delta, IdentityIsExactlyZero) {
  const Coupling c = identity_coupling(Space::lp(4, Exponent(2.0)));
  EXPECT_EQ(delta_estimate(c, 5, 200, 1).value, 0.0);
  EXPECT_EQ(delta_r_estimate(c, 0.5, 4, 200, 1).value, 0.0);
  EXPECT_EQ(d_small_estimate(c, 200, 1).value, 0.0);
}

TEST(Delta, ZeroCouplingReachesOne) {
  const Coupling c = zero_coupling(Space::lp(3, Exponent(1.0)), Space::lp(5, Exponent::infinity()));
  const DefectEstimate e = delta_estimate(c, 4, 100, 2);
  EXPECT_NEAR(e.value, 1.0, 1e-12);
  EXPECT_LE(e.value, 1.0 + 1e-12);
  const DefectEstimate er = delta_r_estimate(c, 0.5, 4, 100, 2);
  EXPECT_NEAR(er.value, 1.0, 1e-12);

  Family single;
  single.push(Vector{{0.3, -2.0, 1.0}}, Side::x);
  EXPECT_DOUBLE_EQ(family_defect(c, single), 1.0);
  EXPECT_DOUBLE_EQ(family_defect(c, single, 0.5), 1.0);
}

TEST(Delta, ScaleCouplingEqualsOneMinusC) {
  for (double s : {0.3, 0.9, 1.0}) {
    const Coupling c = scale_coupling(Space::lp(5, Exponent(3.0)), s);
    EXPECT_NEAR(delta_estimate(c, 5, 300, 4).value, 1.0 - s, 1e-9);
  }
}

TEST(Delta, MazurRespectsInterpolationBound) {
  const Coupling c = mazur_coupling(8, 1.5, 3.0);
  const DefectEstimate e = delta_estimate(c, 5, 2000, 11);
  const double bound = interp::kadets_upper_lp(1.5, 3.0);
  EXPECT_NEAR(bound, 1.0, 1e-12);
  EXPECT_GT(e.value, 0.0);
  EXPECT_LE(e.value, bound + 1e-6);
}

TEST(Delta, WitnessReproducesValue) {
  const Coupling c = mazur_coupling(6, 1.25, 4.0);
  const DefectEstimate d = delta_estimate(c, 4, 300, 5);
  EXPECT_NEAR(witness_defect(c, d), d.value, 1e-12);
  EXPECT_LE(d.witness.size(), 4u);
  const DefectEstimate r = delta_r_estimate(c, 0.6, 4, 300, 5);
  EXPECT_NEAR(witness_defect(c, r), r.value, 1e-12);
  const DefectEstimate s = d_small_estimate(c, 300, 5);
  EXPECT_NEAR(witness_defect(c, s), s.value, 1e-12);
  ASSERT_EQ(s.witness.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    const Space& sp = s.witness.sides[i] == Side::x ? c.domain : c.codomain;
    EXPECT_LE(norm_eval(sp, s.witness.vectors[i]), 1.0);
  }
}

TEST(Delta, MonotoneAndReproducible) {
  const Coupling c = mazur_coupling(5, 1.25, 3.0);
  const double a = delta_estimate(c, 3, 64, 9).value;
  const double b = delta_estimate(c, 3, 128, 9).value;
  const double d = delta_estimate(c, 5, 128, 9).value;
  EXPECT_LE(a, b);
  EXPECT_LE(b, d);
  EXPECT_EQ(b, delta_estimate(c, 3, 128, 9).value);
  const double s1 = d_small_estimate(c, 64, 9).value;
  const double s2 = d_small_estimate(c, 160, 9).value;
  EXPECT_LE(s1, s2);
  EXPECT_EQ(s2, d_small_estimate(c, 160, 9).value);
}

TEST(Delta, RejectsBadArguments) {
  const Coupling c = identity_coupling(Space::lp(2, Exponent(2.0)));
  EXPECT_THROW(delta_estimate(c, 1, 10, 0), InputError);
  EXPECT_THROW(delta_r_estimate(c, 1.0, 3, 10, 0), InputError);
  EXPECT_THROW(d_small_estimate(c, 0, 0), InputError);
}

TEST(DSmall, MazurToL1WithinDistortionBound) {
  const Coupling c = mazur_coupling(16, 1.1, 1.0);
  const DefectEstimate e = d_small_estimate(c, 2000, 3);
  EXPECT_GT(e.value, 0.0);
  EXPECT_LE(e.value, interp::gh_upper_l1_lp(1.1) + 1e-9);
}

TEST(DSmall, PairDefectByHand) {
  // Zero coupling: graph points (a, 0) and (0, b).
  const Coupling c = zero_coupling(Space::lp(2, Exponent(2.0)), Space::lp(2, Exponent(1.0)));
  Family f;
  f.push(Vector{{0.6, 0.0}}, Side::x);
  f.push(Vector{{0.0, -0.5}}, Side::y);
  // |a - 0|_2 = 0.6, |0 - b|_1 = 0.5.
  EXPECT_NEAR(pair_defect(c, f), 0.05, 1e-15);
}

TEST(Pool, SmallDefectBelowDeltaOnSharedPool) {
  const std::vector<Coupling> cs = {mazur_coupling(8, 1.5, 3.0), mazur_coupling(4, 4.0, 1.25),
                                    scale_coupling(Space::lp(3, Exponent(1.0)), 0.6),
                                    zero_coupling(Space::lp(2, Exponent(2.0)), Space::lp(3, Exponent(3.0)))};
  for (const Coupling& c : cs) {
    for (double r : {0.3, 0.5, 0.9}) {
      const PoolComparison p = restricted_pool_check(c, 300, 17, r);
      EXPECT_TRUE(p.subset_ok) << p.worst_subset_excess;
      EXPECT_LE(p.d_small, p.delta + 1e-12);
      EXPECT_TRUE(p.r_ok) << p.worst_r_excess;
    }
  }
}

TEST(Pool, PairAsFamilyDoublesThePairDefect) {
  const Coupling c = mazur_coupling(3, 1.5, 2.5);
  Family pair;
  pair.push(Vector{{0.2, -0.5, 0.1}}, Side::x);
  pair.push(Vector{{0.4, 0.3, -0.2}}, Side::x);
  const Family f = pair_as_family(pair);
  const double den = norm_eval(c.domain, pair.vectors[0]) + norm_eval(c.domain, pair.vectors[1]);
  EXPECT_NEAR(family_defect(c, f) * den, 2.0 * pair_defect(c, pair), 1e-15);
}

TEST(Quotient, EqualKernelsGiveScaling) {
  Rng rng(21);
  const Space Z = Space::lp(6, Exponent(1.0));
  const Subspace E(Z, random_basis(rng, 6, 2));
  for (double theta : {1.01, 1.001}) {
    const Coupling c = quotient_coupling(Z, E, E, theta);
    const Vector x = gaussian_vector(rng, 4);
    EXPECT_LE((apply_phi(c, x) - x / theta).norm(), 1e-10 * x.norm());
    const double d = delta_estimate(c, 4, 200, 2).value;
    EXPECT_NEAR(d, 1.0 - 1.0 / theta, 1e-9);
    EXPECT_LE(d, 1.0 - std::pow(theta, -2.0) + 1e-9);
  }
}

TEST(Quotient, DefectWithinGapBudget) {
  Rng rng(5);
  const Space Z = Space::lp(6, Exponent(1.0));
  const double theta = 1.01;
  for (int t = 0; t < 3; ++t) {
    const Subspace E(Z, random_basis(rng, 6, 2));
    const Subspace F(Z, random_basis(rng, 6, 2));
    const GapBracket g = gap(Z, E, F, 0.05, 8);
    const Coupling c = quotient_coupling(Z, E, F, theta);
    const DefectEstimate d = delta_estimate(c, 4, 96, 30 + static_cast<std::uint64_t>(t));
    EXPECT_LE(d.value, 2.0 * g.upper + (1.0 - std::pow(theta, -2.0)) + 1e-6);
  }
}

TEST(Omega, IdenticalSubspaceGivesIdentity) {
  Rng rng(8);
  const Space Z = Space::lp(3, Exponent(2.0));
  const Subspace X(Z, random_basis(rng, 3, 2));
  const OmegaResult o = build_omega(Z, X, X, 0.05, 400, 2);
  ASSERT_GT(o.table->from.cols(), 0);
  EXPECT_EQ(o.table->from.cols(), 400);
  EXPECT_EQ(o.table->from, o.table->to);
  EXPECT_EQ(o.worst_family_defect, 0.0);
  for (Eigen::Index i = 0; i < o.table->from.cols(); ++i) {
    const Vector x = 1.7 * o.table->from.col(i);
    EXPECT_EQ(apply_phi(o.coupling, -x), -apply_phi(o.coupling, x));
  }
}

TEST(Omega, NearPlanesWithinFourteenSigma) {
  const Space Z = Space::lp(3, Exponent(2.0));
  const double angle = 0.01;
  Matrix bx(3, 2), by(3, 2);
  bx << 1, 0, 0, 1, 0, 0;
  by << 1, 0, 0, std::cos(angle), 0, std::sin(angle);
  const Subspace X(Z, bx), Y(Z, by);
  EXPECT_LE(gap(Z, X, Y, 0.005, 4).upper, 0.02);
  const double sigma = 0.05;
  const OmegaResult o = build_omega(Z, X, Y, sigma, 600, 4);
  EXPECT_GT(o.centers_x.size(), 1u);
  for (std::size_t i = 0; i < o.centers_x.size(); ++i) {
    EXPECT_LT(norm_eval(Z, o.centers_x[i] - o.centers_y[i]), 2.0 * sigma);
  }
  EXPECT_TRUE(o.within_bound);
  EXPECT_LE(o.worst_family_defect, 14.0 * sigma);
  for (Eigen::Index i = 0; i < o.table->from.cols(); ++i) {
    EXPECT_NEAR(norm_eval(Z, o.table->to.col(i)), 1.0, 1e-12);
    const Vector x = -0.4 * o.table->from.col(i);
    EXPECT_EQ(apply_phi(o.coupling, x), -apply_phi(o.coupling, Vector(-x)));
  }
  EXPECT_THROW(apply_phi(o.coupling, Vector{{0.3, 0.7, 0.1}}), InputError);
}

TEST(Omega, FarSubspacesFailToMatch) {
  const Space Z = Space::lp(3, Exponent(2.0));
  Matrix bx(3, 1), by(3, 1);
  bx << 1, 0, 0;
  by << 0, 1, 0;
  EXPECT_THROW(build_omega(Z, Subspace(Z, bx), Subspace(Z, by), 0.1, 50, 1), InputError);
}

TEST(NearInverse, IdentityAllZero) {
  const NearInverseReport r = check_near_inverse(identity_coupling(Space::lp(4, Exponent(3.0))), 0.0, 100, 1);
  EXPECT_EQ(r.inverse_ratio, 0.0);
  EXPECT_EQ(r.shrink_ratio, 0.0);
  EXPECT_EQ(r.pairwise_ratio, 0.0);
  EXPECT_LE(r.triple_ratio, 1e-15);
  EXPECT_TRUE(r.inverse_ok && r.shrink_ok && r.pairwise_ok);
}

TEST(NearInverse, MazurPassesWithInterpolationSigma) {
  const double sigma = interp::kadets_upper_lp(2.0, 4.0);
  EXPECT_NEAR(sigma, 2.0 * std::tan(std::numbers::pi / 8.0), 1e-12);
  const NearInverseReport r = check_near_inverse(mazur_coupling(8, 2.0, 4.0), sigma, 500, 2);
  EXPECT_TRUE(r.all_ok());
}

TEST(NearInverse, ZeroCouplingFailsShrinkCheck) {
  const Space X = Space::lp(3, Exponent(2.0));
  const NearInverseReport r = check_near_inverse(zero_coupling(X, X), 0.5, 50, 3);
  EXPECT_FALSE(r.shrink_ok);
  EXPECT_DOUBLE_EQ(r.shrink_ratio, 1.0);
}
