#ifndef GAPKIT_ZNORM_HPP
#define GAPKIT_ZNORM_HPP

// Twisted norm on X (+) Y built from a coupling (Phi, Psi):
//
//   |(u, v)|_Z = min over lambda >= 0 of
//                |u - sum l_i a_i|_X + |v - sum l_i b_i|_Y + sigma sum l_i
//
// with graph atoms (a, b) = (x, Phi x), |x|_X = 1, and (Psi y, y), |y|_Y = 1,
// closed under negation.  Finitely many atoms over-estimate the norm obtained
// from the full graphs.  When sigma bounds the defect Delta(Phi, Psi), both
// blocks embed isometrically, each test atom lies within sigma of the other
// block, and the quotient by the Y block is sigma |u|_X.

#include "gapkit/couplings.hpp"

#include <vector>

namespace gapkit {

struct ZNorm {
  /// An atomic gauge space on X (+) Y.
  Space space;
  Coupling coupling;
  double sigma = 0.0;
  /// Unit test directions of X and Y included as atoms, one per column.
  Matrix tests_x;
  Matrix tests_y;
  /// Atoms before closing under negation, tests included.
  long atom_count = 0;
  std::uint64_t seed = 0;
  /// The defect estimate sigma was checked against.
  double sampled_delta = 0.0;
};

struct ZValue {
  double value = 0.0;
  bool converged = true;
};

namespace detail {

inline const GaugeNode& gauge_node(const ZNorm& z) { return std::get<GaugeNode>(z.space.node().v); }

inline Vector unit_draw(Rng& rng, const Space& s) {
  const Vector g = random_direction(rng, s);
  return g / norm_eval(s, g);
}

inline Matrix normalized_columns(const Space& s, const Matrix& m, const char* what) {
  Matrix out = m;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double n = norm_eval(s, m.col(j));
    if (!(n > 0.0)) throw InputError(std::string(what) + ": zero test direction");
    out.col(j) /= n;
  }
  return out;
}

}  // namespace detail

struct ZNormOptions {
  /// Family budget and sample count of the defect estimate sigma must dominate.
  int delta_budget = 4;
  long delta_samples = 256;
};

/// Builds the gauge from `atom_count` graph atoms: the given test directions
/// first (X tests as (x, Phi x), Y tests as (Psi y, y)), the rest split evenly
/// between the two graphs, and every atom's negative.  Atom k of each graph is
/// drawn from its own derived stream, so a larger count extends a smaller one.
inline ZNorm build_znorm(const Coupling& c, double sigma, long atom_count, std::uint64_t seed,
                         const Matrix& tests_x = Matrix(), const Matrix& tests_y = Matrix(),
                         const ZNormOptions& opt = {}) {
  const Space& X = c.domain;
  const Space& Y = c.codomain;
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("build_znorm: sigma must be positive");
  if (tests_x.size() > 0 && tests_x.rows() != X.dim()) throw InputError("build_znorm: X test dimension");
  if (tests_y.size() > 0 && tests_y.rows() != Y.dim()) throw InputError("build_znorm: Y test dimension");
  const long tests = static_cast<long>(tests_x.cols() + tests_y.cols());
  if (atom_count < tests) throw InputError("build_znorm: atom count below the number of tests");

  const DefectEstimate d = delta_estimate(c, opt.delta_budget, opt.delta_samples, seed);
  if (sigma < d.value) {
    throw InputError("build_znorm: sigma " + format_real(sigma) + " is below the sampled defect " +
                     format_real(d.value));
  }

  ZNorm z{Space::lp(1, Exponent(2.0)), c, sigma, Matrix(X.dim(), 0), Matrix(Y.dim(), 0),
          atom_count, seed, d.value};
  if (tests_x.cols() > 0) z.tests_x = detail::normalized_columns(X, tests_x, "build_znorm");
  if (tests_y.cols() > 0) z.tests_y = detail::normalized_columns(Y, tests_y, "build_znorm");

  const long rest = atom_count - tests;
  const long nx = (rest + 1) / 2;
  const long ny = rest / 2;
  std::vector<Vector> ax, ay;
  auto add = [&](const Vector& a, const Vector& b) {
    ax.push_back(a);
    ay.push_back(b);
  };
  for (Eigen::Index j = 0; j < z.tests_x.cols(); ++j) add(z.tests_x.col(j), apply_phi(c, z.tests_x.col(j)));
  for (Eigen::Index j = 0; j < z.tests_y.cols(); ++j) add(apply_psi(c, z.tests_y.col(j)), z.tests_y.col(j));
  for (long k = 0; k < nx; ++k) {
    Rng rng(derive_seed(seed, 0x2a, static_cast<std::uint64_t>(k)));
    const Vector x = detail::unit_draw(rng, X);
    add(x, apply_phi(c, x));
  }
  for (long k = 0; k < ny; ++k) {
    Rng rng(derive_seed(seed, 0x2b, static_cast<std::uint64_t>(k)));
    const Vector y = detail::unit_draw(rng, Y);
    add(apply_psi(c, y), y);
  }
  const auto n = static_cast<Eigen::Index>(ax.size());
  Matrix A(X.dim(), 2 * n), B(Y.dim(), 2 * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    A.col(2 * j) = ax[static_cast<std::size_t>(j)];
    B.col(2 * j) = ay[static_cast<std::size_t>(j)];
    A.col(2 * j + 1) = -ax[static_cast<std::size_t>(j)];
    B.col(2 * j + 1) = -ay[static_cast<std::size_t>(j)];
  }
  z.space = Space::atomic_gauge(X, Y, sigma, std::move(A), std::move(B));
  return z;
}

/// Gauge from stored atoms (for example read back from a file).
inline ZNorm znorm_from_atoms(const Coupling& c, double sigma, Matrix atoms_x, Matrix atoms_y,
                              Matrix tests_x, Matrix tests_y) {
  ZNorm z{Space::atomic_gauge(c.domain, c.codomain, sigma, std::move(atoms_x), std::move(atoms_y)),
          c, sigma, std::move(tests_x), std::move(tests_y), 0, 0, 0.0};
  z.atom_count = detail::gauge_node(z).atoms_x.cols() / 2;
  return z;
}

inline ZValue znorm_eval(const ZNorm& z, const Vector& u, const Vector& v) {
  const detail::GaugeNode& g = detail::gauge_node(z);
  require_dim(u, g.block_x.dim(), "znorm_eval");
  require_dim(v, g.block_y.dim(), "znorm_eval");
  require_finite(u, "znorm_eval");
  require_finite(v, "znorm_eval");
  const detail::GaugeSolution s = detail::gauge_solve(g, u, v, 1.0);
  return {s.value, s.converged};
}

/// The Y block {0} (+) Y as a subspace of Z.
inline Subspace y_block(const ZNorm& z) {
  const Eigen::Index dx = z.coupling.domain.dim();
  const Eigen::Index dy = z.coupling.codomain.dim();
  Matrix b = Matrix::Zero(dx + dy, dy);
  b.bottomRows(dy).setIdentity();
  return Subspace(z.space, b);
}

/// inf over y of |(u, y)|_Z.
inline ZValue quotient_by_y(const ZNorm& z, const Vector& u) {
  Vector w = Vector::Zero(z.space.dim());
  w.head(u.size()) = u;
  const Estimate e = quotient_norm_eval(z.space, y_block(z), w);
  return {e.value, e.converged};
}

struct EmbeddedGapReport {
  long tests = 0;
  /// max of |(x, Phi x)|_Z - sigma over X tests and |(Psi y, y)|_Z - sigma
  /// over Y tests.
  double worst_slack = -std::numeric_limits<double>::infinity();
  bool converged = true;
  bool passed = true;
};

inline EmbeddedGapReport verify_embedded_gap(const ZNorm& z, double tolerance = 1e-6) {
  EmbeddedGapReport out;
  auto check = [&](const Vector& a, const Vector& b) {
    const ZValue v = znorm_eval(z, a, b);
    out.worst_slack = std::max(out.worst_slack, v.value - z.sigma);
    out.converged = out.converged && v.converged;
    ++out.tests;
  };
  for (Eigen::Index j = 0; j < z.tests_x.cols(); ++j) check(z.tests_x.col(j), apply_phi(z.coupling, z.tests_x.col(j)));
  for (Eigen::Index j = 0; j < z.tests_y.cols(); ++j) check(apply_psi(z.coupling, z.tests_y.col(j)), z.tests_y.col(j));
  if (out.tests == 0) out.worst_slack = 0.0;
  out.passed = out.worst_slack <= tolerance;
  return out;
}

}  // namespace gapkit

#endif  // GAPKIT_ZNORM_HPP
