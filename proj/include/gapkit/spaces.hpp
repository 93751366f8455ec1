#ifndef GAPKIT_SPACES_HPP
#define GAPKIT_SPACES_HPP

// Finite-dimensional real normed spaces.
//
// A Space is an immutable descriptor (cheap to copy, shared structure) of a norm
// on R^n.  Vectors are plain coordinate vectors in the space's representation:
// a Quotient(P, K) is represented in the coordinates of the Euclidean orthogonal
// complement of K, so its representation dimension is dim P - dim K; a Dual(S)
// pairs with S through the coordinate inner product.

#include "gapkit/convex.hpp"
#include "gapkit/core.hpp"
#include "gapkit/lp.hpp"

#include <algorithm>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

namespace gapkit {

namespace detail {
struct Node;
}

enum class SpaceKind { lp, weighted_lp, quasi_lr, block_sum, quotient, dual, atomic_gauge };

class Subspace;

class Space {
 public:
  static Space lp(Eigen::Index dim, Exponent p);
  static Space weighted_lp(Exponent p, Vector weights);
  static Space quasi_lr(Eigen::Index dim, double r);
  static Space block_sum(Exponent outer, std::vector<Space> blocks);
  static Space quotient(const Space& parent, const Subspace& kernel);
  static Space dual(const Space& inner);
  /// Twisted superspace norm on X (+) Y generated by coupling-graph atoms.
  /// `atoms_x` and `atoms_y` hold one atom per column.
  static Space atomic_gauge(const Space& block_x, const Space& block_y, double sigma,
                            Matrix atoms_x, Matrix atoms_y);

  SpaceKind kind() const;
  /// Representation dimension.
  Eigen::Index dim() const;
  /// False only for r-normed (quasi-Banach) spaces.
  bool is_banach() const;

  const detail::Node& node() const { return *node_; }
  bool same_object(const Space& other) const { return node_ == other.node_; }

 private:
  explicit Space(std::shared_ptr<const detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const detail::Node> node_;
};

/// A linear subspace of a Space, given by linearly independent basis columns.
class Subspace {
 public:
  Subspace(Space parent, Matrix basis, bool allow_full = false);

  const Space& parent() const { return parent_; }
  const Matrix& basis() const { return basis_; }
  Eigen::Index dim() const { return basis_.cols(); }
  Eigen::Index ambient_dim() const { return basis_.rows(); }
  /// Euclidean-orthonormal basis of the same span.
  const Matrix& orthonormal() const { return orthonormal_; }
  /// Euclidean-orthonormal basis of the orthogonal complement.
  const Matrix& complement() const { return complement_; }
  /// Where the basis was read from, if anywhere (kept for serialization).
  const std::string& source() const { return source_; }
  void set_source(std::string s) { source_ = std::move(s); }

 private:
  Space parent_;
  Matrix basis_;
  Matrix orthonormal_;
  Matrix complement_;
  std::string source_;
};

namespace detail {

struct LpNode {
  Eigen::Index dim;
  Exponent p;
};
struct WeightedLpNode {
  Exponent p;
  Vector weights;
};
struct QuasiLrNode {
  Eigen::Index dim;
  double r;
};
struct BlockSumNode {
  Exponent outer;
  std::vector<Space> blocks;
  std::vector<Eigen::Index> offsets;
};
struct QuotientNode {
  Space parent;
  Subspace kernel;
};
struct DualNode {
  Space inner;
};
struct GaugeNode {
  Space block_x;
  Space block_y;
  double sigma;
  Matrix atoms_x;
  Matrix atoms_y;
};

struct Node {
  std::variant<LpNode, WeightedLpNode, QuasiLrNode, BlockSumNode, QuotientNode, DualNode, GaugeNode>
      v;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Construction

inline Space Space::lp(Eigen::Index dim, Exponent p) {
  if (dim < 1) throw InputError("lp: dimension must be positive");
  if (!p.is_infinite() && !(p.value() >= 1.0)) throw InputError("lp: p must be >= 1");
  return Space(std::make_shared<detail::Node>(detail::Node{detail::LpNode{dim, p}}));
}

inline Space Space::weighted_lp(Exponent p, Vector weights) {
  if (weights.size() < 1) throw InputError("weighted lp: empty weights");
  if (!p.is_infinite() && !(p.value() >= 1.0)) throw InputError("weighted lp: p must be >= 1");
  if (!weights.allFinite() || (weights.array() <= 0.0).any()) {
    throw InputError("weighted lp: weights must be positive and finite");
  }
  return Space(std::make_shared<detail::Node>(
      detail::Node{detail::WeightedLpNode{p, std::move(weights)}}));
}

inline Space Space::quasi_lr(Eigen::Index dim, double r) {
  if (dim < 1) throw InputError("quasi lr: dimension must be positive");
  if (!(r > 0.0 && r < 1.0)) throw InputError("quasi lr: r must lie in (0, 1)");
  return Space(std::make_shared<detail::Node>(detail::Node{detail::QuasiLrNode{dim, r}}));
}

inline Space Space::block_sum(Exponent outer, std::vector<Space> blocks) {
  if (blocks.empty()) throw InputError("block sum: no blocks");
  if (!outer.is_infinite() && !(outer.value() >= 1.0)) throw InputError("block sum: p must be >= 1");
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& b : blocks) {
    if (!b.is_banach()) throw InputError("block sum: blocks must be normed spaces");
    offsets.push_back(off);
    off += b.dim();
  }
  offsets.push_back(off);
  return Space(std::make_shared<detail::Node>(
      detail::Node{detail::BlockSumNode{outer, std::move(blocks), std::move(offsets)}}));
}

inline Space Space::dual(const Space& inner) {
  return Space(std::make_shared<detail::Node>(detail::Node{detail::DualNode{inner}}));
}

inline Space Space::atomic_gauge(const Space& block_x, const Space& block_y, double sigma,
                                 Matrix atoms_x, Matrix atoms_y) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("atomic gauge: sigma must be positive");
  if (atoms_x.rows() != block_x.dim() || atoms_y.rows() != block_y.dim() ||
      atoms_x.cols() != atoms_y.cols()) {
    throw InputError("atomic gauge: atom matrix shape mismatch");
  }
  if (!block_x.is_banach() || !block_y.is_banach()) {
    throw InputError("atomic gauge: blocks must be normed spaces");
  }
  return Space(std::make_shared<detail::Node>(detail::Node{
      detail::GaugeNode{block_x, block_y, sigma, std::move(atoms_x), std::move(atoms_y)}}));
}

inline SpaceKind Space::kind() const { return static_cast<SpaceKind>(node_->v.index()); }

inline Eigen::Index Space::dim() const {
  using namespace detail;
  return std::visit(
      [](const auto& n) -> Eigen::Index {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, LpNode> || std::is_same_v<T, QuasiLrNode>) {
          return n.dim;
        } else if constexpr (std::is_same_v<T, WeightedLpNode>) {
          return n.weights.size();
        } else if constexpr (std::is_same_v<T, BlockSumNode>) {
          return n.offsets.back();
        } else if constexpr (std::is_same_v<T, QuotientNode>) {
          return n.parent.dim() - n.kernel.dim();
        } else if constexpr (std::is_same_v<T, DualNode>) {
          return n.inner.dim();
        } else {
          return n.block_x.dim() + n.block_y.dim();
        }
      },
      node_->v);
}

inline bool Space::is_banach() const {
  using namespace detail;
  return std::visit(
      [](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, QuasiLrNode>) {
          return false;
        } else if constexpr (std::is_same_v<T, QuotientNode>) {
          return n.parent.is_banach();
        } else if constexpr (std::is_same_v<T, DualNode>) {
          return n.inner.is_banach();
        } else {
          return true;
        }
      },
      node_->v);
}

/// Structural equality of descriptors.
inline bool same_space(const Space& a, const Space& b);

namespace detail {

inline bool same_matrix(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

}  // namespace detail

inline bool same_space(const Space& a, const Space& b) {
  using namespace detail;
  if (a.same_object(b)) return true;
  if (a.kind() != b.kind()) return false;
  const auto& na = a.node().v;
  const auto& nb = b.node().v;
  switch (a.kind()) {
    case SpaceKind::lp: {
      const auto& x = std::get<LpNode>(na);
      const auto& y = std::get<LpNode>(nb);
      return x.dim == y.dim && x.p == y.p;
    }
    case SpaceKind::weighted_lp: {
      const auto& x = std::get<WeightedLpNode>(na);
      const auto& y = std::get<WeightedLpNode>(nb);
      return x.p == y.p && x.weights.size() == y.weights.size() && x.weights == y.weights;
    }
    case SpaceKind::quasi_lr: {
      const auto& x = std::get<QuasiLrNode>(na);
      const auto& y = std::get<QuasiLrNode>(nb);
      return x.dim == y.dim && x.r == y.r;
    }
    case SpaceKind::block_sum: {
      const auto& x = std::get<BlockSumNode>(na);
      const auto& y = std::get<BlockSumNode>(nb);
      if (!(x.outer == y.outer) || x.blocks.size() != y.blocks.size()) return false;
      for (std::size_t i = 0; i < x.blocks.size(); ++i) {
        if (!same_space(x.blocks[i], y.blocks[i])) return false;
      }
      return true;
    }
    case SpaceKind::quotient: {
      const auto& x = std::get<QuotientNode>(na);
      const auto& y = std::get<QuotientNode>(nb);
      return same_space(x.parent, y.parent) && same_matrix(x.kernel.basis(), y.kernel.basis());
    }
    case SpaceKind::dual:
      return same_space(std::get<DualNode>(na).inner, std::get<DualNode>(nb).inner);
    case SpaceKind::atomic_gauge: {
      const auto& x = std::get<GaugeNode>(na);
      const auto& y = std::get<GaugeNode>(nb);
      return same_space(x.block_x, y.block_x) && same_space(x.block_y, y.block_y) &&
             x.sigma == y.sigma && same_matrix(x.atoms_x, y.atoms_x) &&
             same_matrix(x.atoms_y, y.atoms_y);
    }
  }
  return false;
}

inline Subspace::Subspace(Space parent, Matrix basis, bool allow_full)
    : parent_(std::move(parent)), basis_(std::move(basis)) {
  const Eigen::Index n = parent_.dim();
  if (basis_.rows() != n) {
    throw InputError("subspace: basis has " + std::to_string(basis_.rows()) +
                     " rows, ambient dimension is " + std::to_string(n));
  }
  if (basis_.cols() < 1) throw InputError("subspace: empty basis");
  if (!basis_.allFinite()) throw InputError("subspace: non-finite basis entry");
  if (basis_.cols() > n || (basis_.cols() == n && !allow_full)) {
    throw InputError("subspace: dimension must be below the ambient dimension");
  }
  Eigen::JacobiSVD<Matrix> svd(basis_);
  const auto& s = svd.singularValues();
  if (!(s[s.size() - 1] > 1e-10 * s[0])) {
    throw InputError("subspace: basis is rank deficient");
  }
  Eigen::HouseholderQR<Matrix> qr(basis_);
  const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  orthonormal_ = q.leftCols(basis_.cols());
  complement_ = q.rightCols(n - basis_.cols());
}

inline Space Space::quotient(const Space& parent, const Subspace& kernel) {
  if (!same_space(kernel.parent(), parent)) {
    throw InputError("quotient: kernel is not a subspace of the parent space");
  }
  if (kernel.dim() >= parent.dim()) throw InputError("quotient: kernel must be a proper subspace");
  return Space(std::make_shared<detail::Node>(detail::Node{detail::QuotientNode{parent, kernel}}));
}

// ---------------------------------------------------------------------------
// Evaluation

/// A value computed by an iterative solver, with its convergence flag.
struct Estimate {
  double value = 0.0;
  bool converged = true;
};

double norm_eval(const Space& space, const Vector& v);
double dual_norm_eval(const Space& space, const Vector& f);
/// Writes a subgradient of the norm at v into `grad` and returns the norm.
double norm_subgradient(const Space& space, const Vector& v, Vector& grad);
double dual_norm_subgradient(const Space& space, const Vector& f, Vector& grad);

/// Constants with lo*|z|_2 <= |z| <= hi*|z|_2.
struct Equivalence {
  double lo = 1.0;
  double hi = 1.0;
};
Equivalence equivalence(const Space& space);

/// Rewrites duals of closed-form spaces into closed form (Dual(lp_p) = lp_q,
/// Dual(Dual(S)) = S, ...).  Spaces without a closed-form dual are returned as is.
Space simplify(const Space& space);

struct QuotientSolution {
  double value = 0.0;
  bool converged = true;
  /// Minimizing kernel element e, so that value = |v - e|.
  Vector kernel_element;
};

QuotientSolution quotient_norm_solve(const Space& parent, const Subspace& kernel, const Vector& v);

namespace detail {

inline double lp_norm(const Vector& v, Exponent p) {
  if (p.is_infinite()) return v.cwiseAbs().maxCoeff();
  const double pv = p.value();
  if (pv == 1.0) return v.cwiseAbs().sum();
  if (pv == 2.0) return v.norm();
  const double m = v.cwiseAbs().maxCoeff();
  if (m == 0.0) return 0.0;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::pow(std::abs(v[i]) / m, pv);
  return m * std::pow(s, 1.0 / pv);
}

inline double lp_subgradient(const Vector& v, Exponent p, Vector& g) {
  g.setZero(v.size());
  const double n = lp_norm(v, p);
  if (n == 0.0) return 0.0;
  if (p.is_infinite()) {
    Eigen::Index i = 0;
    v.cwiseAbs().maxCoeff(&i);
    g[i] = v[i] > 0.0 ? 1.0 : -1.0;
    return n;
  }
  const double pv = p.value();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] == 0.0) continue;
    const double s = v[i] > 0.0 ? 1.0 : -1.0;
    g[i] = (pv == 1.0) ? s : s * std::pow(std::abs(v[i]) / n, pv - 1.0);
  }
  return n;
}

/// Diagonal scaling d with |z|_{w,p} = |diag(d) z|_p.
inline Vector weighted_scaling(const WeightedLpNode& w) {
  if (w.p.is_infinite()) return w.weights;
  return w.weights.array().pow(1.0 / w.p.value()).matrix();
}

inline Vector block_norms(const BlockSumNode& b, const Vector& v,
                          double (*eval)(const Space&, const Vector&)) {
  Vector t(static_cast<Eigen::Index>(b.blocks.size()));
  for (std::size_t i = 0; i < b.blocks.size(); ++i) {
    const Eigen::Index off = b.offsets[i];
    t[static_cast<Eigen::Index>(i)] = eval(b.blocks[i], v.segment(off, b.blocks[i].dim()));
  }
  return t;
}

struct GaugeSolution {
  /// Best of the primal descent value and the certified dual upper bound.
  double value = 0.0;
  /// Certified lower bound from a feasible dual point.
  double lower = 0.0;
  bool converged = true;
  Vector lambda;
  Vector residual_x;
  Vector residual_y;
};

/// min over lambda >= 0 of |u - A l|_X + y_weight * |v - B l|_Y + sigma * sum(l).
GaugeSolution gauge_solve(const GaugeNode& g, const Vector& u, const Vector& v, double y_weight);

inline double finite_difference_subgradient(const Space& s, const Vector& v, Vector& grad) {
  const double value = norm_eval(s, v);
  const double h = 1e-6 * std::max(1.0, v.cwiseAbs().maxCoeff());
  grad.resize(v.size());
  Vector w = v;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    w[i] = v[i] + h;
    const double fp = norm_eval(s, w);
    w[i] = v[i] - h;
    const double fm = norm_eval(s, w);
    w[i] = v[i];
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return value;
}

}  // namespace detail

inline double norm_eval(const Space& space, const Vector& v) {
  using namespace detail;
  require_dim(v, space.dim(), "norm_eval");
  require_finite(v, "norm_eval");
  return std::visit(
      [&](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, LpNode>) {
          return lp_norm(v, n.p);
        } else if constexpr (std::is_same_v<T, WeightedLpNode>) {
          return lp_norm(weighted_scaling(n).cwiseProduct(v), n.p);
        } else if constexpr (std::is_same_v<T, QuasiLrNode>) {
          const double m = v.cwiseAbs().maxCoeff();
          if (m == 0.0) return 0.0;
          double s = 0.0;
          for (Eigen::Index i = 0; i < v.size(); ++i) s += std::pow(std::abs(v[i]) / m, n.r);
          return m * std::pow(s, 1.0 / n.r);
        } else if constexpr (std::is_same_v<T, BlockSumNode>) {
          return lp_norm(block_norms(n, v, &norm_eval), n.outer);
        } else if constexpr (std::is_same_v<T, QuotientNode>) {
          return quotient_norm_solve(n.parent, n.kernel, n.kernel.complement() * v).value;
        } else if constexpr (std::is_same_v<T, DualNode>) {
          return dual_norm_eval(n.inner, v);
        } else {
          const Eigen::Index dx = n.block_x.dim();
          return gauge_solve(n, v.head(dx), v.tail(n.block_y.dim()), 1.0).value;
        }
      },
      space.node().v);
}

inline double dual_norm_eval(const Space& space, const Vector& f) {
  using namespace detail;
  require_dim(f, space.dim(), "dual_norm_eval");
  require_finite(f, "dual_norm_eval");
  return std::visit(
      [&](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, LpNode>) {
          return lp_norm(f, n.p.conjugate());
        } else if constexpr (std::is_same_v<T, WeightedLpNode>) {
          return lp_norm(f.cwiseQuotient(weighted_scaling(n)), n.p.conjugate());
        } else if constexpr (std::is_same_v<T, QuasiLrNode>) {
          throw UnsupportedError("dual norm of an r-normed space is degenerate");
          return 0.0;
        } else if constexpr (std::is_same_v<T, BlockSumNode>) {
          return lp_norm(block_norms(n, f, &dual_norm_eval), n.outer.conjugate());
        } else if constexpr (std::is_same_v<T, QuotientNode>) {
          // (P/K)* is the annihilator of K in P*.
          return dual_norm_eval(n.parent, n.kernel.complement() * f);
        } else if constexpr (std::is_same_v<T, DualNode>) {
          return norm_eval(n.inner, f);
        } else {
          const Eigen::Index dx = n.block_x.dim();
          const Vector fx = f.head(dx);
          const Vector fy = f.tail(n.block_y.dim());
          double s = std::max(dual_norm_eval(n.block_x, fx), dual_norm_eval(n.block_y, fy));
          if (n.atoms_x.cols() > 0) {
            const Vector pairing = n.atoms_x.transpose() * fx + n.atoms_y.transpose() * fy;
            s = std::max(s, pairing.cwiseAbs().maxCoeff() / n.sigma);
          }
          return s;
        }
      },
      space.node().v);
}

inline double norm_subgradient(const Space& space, const Vector& v, Vector& grad) {
  using namespace detail;
  require_dim(v, space.dim(), "norm_subgradient");
  return std::visit(
      [&](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, LpNode>) {
          return lp_subgradient(v, n.p, grad);
        } else if constexpr (std::is_same_v<T, WeightedLpNode>) {
          const Vector d = weighted_scaling(n);
          const double val = lp_subgradient(d.cwiseProduct(v), n.p, grad);
          grad = grad.cwiseProduct(d);
          return val;
        } else if constexpr (std::is_same_v<T, QuasiLrNode>) {
          throw UnsupportedError("r-norms are not convex; no subgradient");
          return 0.0;
        } else if constexpr (std::is_same_v<T, BlockSumNode>) {
          const Vector t = block_norms(n, v, &norm_eval);
          Vector outer_g;
          const double val = lp_subgradient(t, n.outer, outer_g);
          grad.setZero(v.size());
          for (std::size_t i = 0; i < n.blocks.size(); ++i) {
            const auto bi = static_cast<Eigen::Index>(i);
            if (outer_g[bi] == 0.0) continue;
            Vector gb;
            norm_subgradient(n.blocks[i], v.segment(n.offsets[i], n.blocks[i].dim()), gb);
            grad.segment(n.offsets[i], n.blocks[i].dim()) = outer_g[bi] * gb;
          }
          return val;
        } else if constexpr (std::is_same_v<T, QuotientNode>) {
          const Vector z = n.kernel.complement() * v;
          const QuotientSolution sol = quotient_norm_solve(n.parent, n.kernel, z);
          Vector gp;
          norm_subgradient(n.parent, z - sol.kernel_element, gp);
          grad = n.kernel.complement().transpose() * gp;
          return sol.value;
        } else if constexpr (std::is_same_v<T, DualNode>) {
          return dual_norm_subgradient(n.inner, v, grad);
        } else {
          const Eigen::Index dx = n.block_x.dim();
          const GaugeSolution sol = gauge_solve(n, v.head(dx), v.tail(n.block_y.dim()), 1.0);
          if (sol.residual_x.cwiseAbs().maxCoeff() > 0.0 &&
              sol.residual_y.cwiseAbs().maxCoeff() > 0.0) {
            Vector gx, gy;
            norm_subgradient(n.block_x, sol.residual_x, gx);
            norm_subgradient(n.block_y, sol.residual_y, gy);
            grad.resize(v.size());
            grad << gx, gy;
            return sol.value;
          }
          return finite_difference_subgradient(space, v, grad);
        }
      },
      space.node().v);
}

inline double dual_norm_subgradient(const Space& space, const Vector& f, Vector& grad) {
  using namespace detail;
  require_dim(f, space.dim(), "dual_norm_subgradient");
  return std::visit(
      [&](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, LpNode>) {
          return lp_subgradient(f, n.p.conjugate(), grad);
        } else if constexpr (std::is_same_v<T, WeightedLpNode>) {
          const Vector d = weighted_scaling(n);
          const double val = lp_subgradient(f.cwiseQuotient(d), n.p.conjugate(), grad);
          grad = grad.cwiseQuotient(d);
          return val;
        } else if constexpr (std::is_same_v<T, QuasiLrNode>) {
          throw UnsupportedError("dual norm of an r-normed space is degenerate");
          return 0.0;
        } else if constexpr (std::is_same_v<T, BlockSumNode>) {
          const Vector t = block_norms(n, f, &dual_norm_eval);
          Vector outer_g;
          const double val = lp_subgradient(t, n.outer.conjugate(), outer_g);
          grad.setZero(f.size());
          for (std::size_t i = 0; i < n.blocks.size(); ++i) {
            const auto bi = static_cast<Eigen::Index>(i);
            if (outer_g[bi] == 0.0) continue;
            Vector gb;
            dual_norm_subgradient(n.blocks[i], f.segment(n.offsets[i], n.blocks[i].dim()), gb);
            grad.segment(n.offsets[i], n.blocks[i].dim()) = outer_g[bi] * gb;
          }
          return val;
        } else if constexpr (std::is_same_v<T, QuotientNode>) {
          Vector gp;
          const double val = dual_norm_subgradient(n.parent, n.kernel.complement() * f, gp);
          grad = n.kernel.complement().transpose() * gp;
          return val;
        } else if constexpr (std::is_same_v<T, DualNode>) {
          return norm_subgradient(n.inner, f, grad);
        } else {
          const Eigen::Index dx = n.block_x.dim();
          const Eigen::Index dy = n.block_y.dim();
          const Vector fx = f.head(dx);
          const Vector fy = f.tail(dy);
          Vector gx, gy;
          const double sx = dual_norm_subgradient(n.block_x, fx, gx);
          const double sy = dual_norm_subgradient(n.block_y, fy, gy);
          grad.setZero(f.size());
          double best = sx;
          grad.head(dx) = gx;
          if (sy > best) {
            best = sy;
            grad.setZero();
            grad.tail(dy) = gy;
          }
          if (n.atoms_x.cols() > 0) {
            const Vector pairing = n.atoms_x.transpose() * fx + n.atoms_y.transpose() * fy;
            Eigen::Index i = 0;
            const double m = pairing.cwiseAbs().maxCoeff(&i) / n.sigma;
            if (m > best) {
              best = m;
              const double s = (pairing[i] >= 0.0 ? 1.0 : -1.0) / n.sigma;
              grad << s * n.atoms_x.col(i), s * n.atoms_y.col(i);
            }
          }
          return best;
        }
      },
      space.node().v);
}

inline Equivalence equivalence(const Space& space) {
  using namespace detail;
  auto lp_equiv = [](Eigen::Index dim, double inv_p) {
    const double c = std::pow(static_cast<double>(dim), inv_p - 0.5);
    return inv_p >= 0.5 ? Equivalence{1.0, c} : Equivalence{c, 1.0};
  };
  return std::visit(
      [&](const auto& n) -> Equivalence {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, LpNode>) {
          return lp_equiv(n.dim, n.p.reciprocal());
        } else if constexpr (std::is_same_v<T, WeightedLpNode>) {
          const Vector d = weighted_scaling(n);
          Equivalence e = lp_equiv(d.size(), n.p.reciprocal());
          return {e.lo * d.minCoeff(), e.hi * d.maxCoeff()};
        } else if constexpr (std::is_same_v<T, QuasiLrNode>) {
          return lp_equiv(n.dim, 1.0 / n.r);
        } else if constexpr (std::is_same_v<T, BlockSumNode>) {
          double lo = std::numeric_limits<double>::infinity();
          double hi = 0.0;
          for (const auto& b : n.blocks) {
            const Equivalence e = equivalence(b);
            lo = std::min(lo, e.lo);
            hi = std::max(hi, e.hi);
          }
          const Equivalence o =
              lp_equiv(static_cast<Eigen::Index>(n.blocks.size()), n.outer.reciprocal());
          return {lo * o.lo, hi * o.hi};
        } else if constexpr (std::is_same_v<T, QuotientNode>) {
          return equivalence(n.parent);
        } else if constexpr (std::is_same_v<T, DualNode>) {
          const Equivalence e = equivalence(n.inner);
          return {1.0 / e.hi, 1.0 / e.lo};
        } else {
          const Equivalence ex = equivalence(n.block_x);
          const Equivalence ey = equivalence(n.block_y);
          return {std::min(ex.lo, ey.lo) / std::sqrt(2.0), std::max(ex.hi, ey.hi) * std::sqrt(2.0)};
        }
      },
      space.node().v);
}

inline Space simplify(const Space& space) {
  using namespace detail;
  if (space.kind() != SpaceKind::dual) return space;
  const Space inner = simplify(std::get<DualNode>(space.node().v).inner);
  switch (inner.kind()) {
    case SpaceKind::lp: {
      const auto& n = std::get<LpNode>(inner.node().v);
      return Space::lp(n.dim, n.p.conjugate());
    }
    case SpaceKind::weighted_lp: {
      // |f|_* = |f / d|_q with |z| = |d z|_p; rewrite 1/d as weights for q.
      const auto& n = std::get<WeightedLpNode>(inner.node().v);
      const Exponent q = n.p.conjugate();
      const Vector inv_d = weighted_scaling(n).cwiseInverse();
      const Vector w = q.is_infinite() ? inv_d : inv_d.array().pow(q.value()).matrix();
      return Space::weighted_lp(q, w);
    }
    case SpaceKind::block_sum: {
      const auto& n = std::get<BlockSumNode>(inner.node().v);
      std::vector<Space> duals;
      for (const auto& b : n.blocks) duals.push_back(simplify(Space::dual(b)));
      return Space::block_sum(n.outer.conjugate(), std::move(duals));
    }
    case SpaceKind::dual:
      return simplify(std::get<DualNode>(inner.node().v).inner);
    default:
      return Space::dual(inner);
  }
}

namespace detail {

/// The plain l_p space and linear change of variables z -> D z with
/// |z| = |D z|_p, when the space is (weighted) l_p.
struct LpView {
  Exponent p;
  Vector scaling;
};

inline std::optional<LpView> as_lp(const Space& s) {
  if (s.kind() == SpaceKind::lp) {
    const auto& n = std::get<LpNode>(s.node().v);
    return LpView{n.p, Vector::Ones(n.dim)};
  }
  if (s.kind() == SpaceKind::weighted_lp) {
    const auto& n = std::get<WeightedLpNode>(s.node().v);
    return LpView{n.p, weighted_scaling(n)};
  }
  return std::nullopt;
}

/// min_e |x - B e|_p for p in {1, inf}, as a linear program.  Returns e.
inline std::optional<Vector> l1_linf_fit(const Vector& x, const Matrix& B, bool infinity) {
  const Eigen::Index n = B.rows();
  const Eigen::Index k = B.cols();
  const Eigen::Index nt = infinity ? 1 : n;
  Matrix A = Matrix::Zero(2 * n, k + nt);
  Vector b(2 * n);
  Vector c = Vector::Zero(k + nt);
  c.tail(nt).setOnes();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index ti = k + (infinity ? 0 : i);
    A.block(2 * i, 0, 1, k) = -B.row(i);
    A(2 * i, ti) = -1.0;
    b[2 * i] = -x[i];
    A.block(2 * i + 1, 0, 1, k) = B.row(i);
    A(2 * i + 1, ti) = -1.0;
    b[2 * i + 1] = x[i];
  }
  const lp::Result r = lp::minimize(c, A, b, k);
  if (r.status != lp::Status::optimal) return std::nullopt;
  return Vector(r.x.head(k));
}

/// argmin over |B y|_p <= 1 of |x - B y|_p for p in {1, inf}.  Returns y.
inline std::optional<Vector> l1_linf_ball_fit(const Vector& x, const Matrix& B, bool infinity) {
  const Eigen::Index n = B.rows();
  const Eigen::Index k = B.cols();
  const Eigen::Index nt = infinity ? 1 : n;
  const Eigen::Index vars = k + 2 * nt;
  Matrix A = Matrix::Zero(4 * n + 1, vars);
  Vector b = Vector::Zero(4 * n + 1);
  Vector c = Vector::Zero(vars);
  c.segment(k, nt).setOnes();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index ti = k + (infinity ? 0 : i);
    const Eigen::Index si = k + nt + (infinity ? 0 : i);
    A.block(4 * i, 0, 1, k) = -B.row(i);
    A(4 * i, ti) = -1.0;
    b[4 * i] = -x[i];
    A.block(4 * i + 1, 0, 1, k) = B.row(i);
    A(4 * i + 1, ti) = -1.0;
    b[4 * i + 1] = x[i];
    A.block(4 * i + 2, 0, 1, k) = B.row(i);
    A(4 * i + 2, si) = -1.0;
    A.block(4 * i + 3, 0, 1, k) = -B.row(i);
    A(4 * i + 3, si) = -1.0;
  }
  A.block(4 * n, k + nt, 1, nt).setOnes();
  b[4 * n] = 1.0;
  const lp::Result r = lp::minimize(c, A, b, k);
  if (r.status != lp::Status::optimal) return std::nullopt;
  return Vector(r.x.head(k));
}

inline convex::Options solver_options() { return convex::Options{1e-10, 5000}; }

}  // namespace detail

/// Quotient norm min over e in kernel of |v - e|, with the minimizer.
inline QuotientSolution quotient_norm_solve(const Space& parent, const Subspace& kernel,
                                            const Vector& v) {
  require_dim(v, parent.dim(), "quotient_norm_eval");
  require_finite(v, "quotient_norm_eval");
  if (!same_space(kernel.parent(), parent)) {
    throw InputError("quotient_norm_eval: kernel is not a subspace of the parent");
  }
  const Space s = simplify(parent);
  const Matrix& Q = kernel.orthonormal();
  QuotientSolution out;
  out.kernel_element = Vector::Zero(v.size());
  if (v.cwiseAbs().maxCoeff() == 0.0) return out;

  if (const auto view = detail::as_lp(s)) {
    const Vector dv = view->scaling.cwiseProduct(v);
    const Matrix dQ = view->scaling.asDiagonal() * Q;
    if (view->p.is_two()) {
      const Vector e = dQ.colPivHouseholderQr().solve(dv);
      out.kernel_element = Q * e;
      out.value = norm_eval(s, v - out.kernel_element);
      return out;
    }
    if (view->p.is_one() || view->p.is_infinite()) {
      if (auto e = detail::l1_linf_fit(dv, dQ, view->p.is_infinite())) {
        out.kernel_element = Q * *e;
        out.value = norm_eval(s, v - out.kernel_element);
        return out;
      }
    }
  }
  if (s.kind() == SpaceKind::atomic_gauge) {
    // Kernel equal to the Y-block: the free Y component absorbs the atom sum.
    const auto& g = std::get<detail::GaugeNode>(s.node().v);
    const Eigen::Index dx = g.block_x.dim();
    const Eigen::Index dy = g.block_y.dim();
    if (kernel.dim() == dy && kernel.complement().rows() == dx + dy &&
        kernel.orthonormal().topRows(dx).cwiseAbs().maxCoeff() == 0.0) {
      const detail::GaugeSolution sol = detail::gauge_solve(g, v.head(dx), Vector::Zero(dy), 0.0);
      out.value = sol.value;
      out.converged = sol.converged;
      out.kernel_element = Vector::Zero(dx + dy);
      out.kernel_element.tail(dy) = v.tail(dy) - g.atoms_y * sol.lambda;
      return out;
    }
  }

  // General case: minimize |v_hat - Q e| over e, v_hat = v / |v| for scale
  // invariance.  A minimizer satisfies |Q e| <= 2 |v_hat| = 2.
  const double scale = norm_eval(s, v);
  const Vector vh = v / scale;
  const Equivalence eq = equivalence(s);
  Vector r(v.size()), g;
  const convex::Oracle f = [&](const Vector& e, Vector& grad) {
    r = vh - Q * e;
    const double val = norm_subgradient(s, r, g);
    grad = -Q.transpose() * g;
    return val;
  };
  const convex::Result res =
      convex::ellipsoid_minimize(f, Vector::Zero(Q.cols()), 2.0 / eq.lo * 1.01 + 1e-12,
                                 detail::solver_options());
  out.value = res.value * scale;
  out.converged = res.converged;
  out.kernel_element = Q * res.argmin * scale;
  return out;
}

inline Estimate quotient_norm_eval(const Space& parent, const Subspace& kernel, const Vector& v) {
  const QuotientSolution s = quotient_norm_solve(parent, kernel, v);
  return {s.value, s.converged};
}

struct BallDistance {
  /// Attained by `nearest`, so an upper bound on the distance.
  double value = 0.0;
  /// Certified lower bound on the distance.
  double lower = 0.0;
  bool converged = true;
  /// Nearest point w of B_F found, in ambient coordinates.
  Vector nearest;
};

/// d(x, B_F) = min over w in F with |w| <= 1 of |x - w|.
inline BallDistance dist_to_unit_ball(const Space& ambient, const Vector& x, const Subspace& F) {
  require_dim(x, ambient.dim(), "dist_to_unit_ball");
  require_finite(x, "dist_to_unit_ball");
  if (!same_space(F.parent(), ambient)) {
    throw InputError("dist_to_unit_ball: F is not a subspace of the ambient space");
  }
  if (!ambient.is_banach()) throw UnsupportedError("dist_to_unit_ball: r-normed ambient");
  const Space s = simplify(ambient);
  const Matrix& Q = F.orthonormal();
  BallDistance out;

  if (const auto view = detail::as_lp(s)) {
    if (view->p.is_two() && (view->scaling.array() == 1.0).all()) {
      const Vector px = Q * (Q.transpose() * x);
      const double len = px.norm();
      const double over = std::max(0.0, len - 1.0);
      out.nearest = len > 1.0 ? Vector(px / len) : px;
      out.value = std::sqrt((x - px).squaredNorm() + over * over);
      out.lower = out.value * (1.0 - 1e-14);
      return out;
    }
    if (view->p.is_one() || view->p.is_infinite()) {
      const Vector dx = view->scaling.cwiseProduct(x);
      const Matrix dQ = view->scaling.asDiagonal() * Q;
      if (auto y = detail::l1_linf_ball_fit(dx, dQ, view->p.is_infinite())) {
        Vector w = Q * *y;
        const double nw = norm_eval(s, w);
        if (nw > 1.0) w /= nw;
        out.nearest = w;
        out.value = norm_eval(s, x - w);
        out.lower = std::max(0.0, out.value - 1e-10 * (1.0 + out.value));
        return out;
      }
    }
  }

  // Exact penalty: min_y |x - Qy| + (|Qy| - 1)_+ has the same value, and some
  // minimizer has |Qy| <= 1, hence |y|_2 <= 1 / lo.
  const Equivalence eq = equivalence(s);
  Vector w(x.size()), g1, g2;
  const convex::Oracle f = [&](const Vector& y, Vector& grad) {
    w = Q * y;
    const double a = norm_subgradient(s, x - w, g1);
    const double b = norm_subgradient(s, w, g2);
    grad = -Q.transpose() * g1;
    double val = a;
    if (b > 1.0) {
      val += b - 1.0;
      grad += Q.transpose() * g2;
    }
    return val;
  };
  const convex::Result res = convex::ellipsoid_minimize(
      f, Vector::Zero(Q.cols()), 1.0 / eq.lo * 1.01 + 1e-12, detail::solver_options());
  Vector best = Q * res.argmin;
  const double nb = norm_eval(s, best);
  if (nb > 1.0) best /= nb;
  out.nearest = best;
  out.value = std::min(norm_eval(s, x - best), norm_eval(s, x));
  if (out.value == norm_eval(s, x) && res.value > out.value) out.nearest = Vector::Zero(x.size());
  out.lower = std::max(0.0, std::min(res.lower_bound, out.value));
  out.converged = res.converged;
  return out;
}

struct Lift {
  Vector z;
  /// |z| / quotient norm; at most theta when `ok`.
  double factor = 1.0;
  bool ok = true;
};

/// Homogeneous lift of a coset: z = v mod kernel with |z| <= theta * |[v]|.
/// The coset is reduced to its complement representative, then normalized by
/// an exact power of two and the sign of its first nonzero coordinate, so
/// lift(2^k v) = 2^k lift(v) and lift(-v) = -lift(v) bit-for-bit.
inline Lift lift_from_quotient(const Space& parent, const Subspace& kernel, const Vector& v,
                               double theta) {
  if (!(theta > 1.0)) throw InputError("lift_from_quotient: theta must exceed 1");
  require_dim(v, parent.dim(), "lift_from_quotient");
  require_finite(v, "lift_from_quotient");
  const Matrix& C = kernel.complement();
  const Vector rep = C * (C.transpose() * v);
  Lift out;
  if (rep.cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, v.cwiseAbs().maxCoeff())) {
    out.z = Vector::Zero(v.size());
    return out;
  }
  const PowerOfTwoScale canon = power_of_two_canonical(rep);
  const double sign = canonical_sign(C.transpose() * canon.canonical);
  const Vector u = sign * canon.canonical;
  const QuotientSolution q = quotient_norm_solve(parent, kernel, u);
  const Vector zu = u - q.kernel_element;
  const double nz = norm_eval(parent, zu);
  out.factor = q.value > 0.0 ? nz / q.value : 1.0;
  out.ok = q.converged && out.factor <= theta;
  out.z = scale_by_power_of_two(sign * zu, canon.exponent);
  return out;
}

/// E^perp as a subspace of Dual(ambient).
inline Subspace annihilator(const Space& ambient, const Subspace& E) {
  if (!same_space(E.parent(), ambient)) {
    throw InputError("annihilator: E is not a subspace of the ambient space");
  }
  return Subspace(Space::dual(ambient), E.complement());
}

}  // namespace gapkit

#include "gapkit/detail/gauge_solver.hpp"

#endif  // GAPKIT_SPACES_HPP
