#ifndef GAPKIT_GAP_HPP
#define GAPKIT_GAP_HPP

// Certified brackets for the gap (opening) between subspaces,
//
//     Lambda(E, F) = max( sup_{x in B_E} d(x, B_F),  sup_{y in B_F} d(y, B_E) ).
//
// Each directed supremum is attained on the unit sphere of E.  The lower
// endpoint is a value of d actually certified at a sphere point; the upper
// endpoint comes from a branch-and-bound cover of the sphere by cells.
//
// Cells.  With Q a Euclidean-orthonormal basis of E, the sphere of E is the
// radial image of the surface of the cube [-1, 1]^k in Q-coordinates.  A cell
// is a sub-square of one face; its vertices v map to sphere points x_v.  Every
// sphere point x over the cell is kappa * z with z in conv{x_v} and kappa >= 1,
// so by convexity and 1-Lipschitz continuity of d(., B_F)
//
//     d(x) <= max_v d(x_v) + 1 - |z|  <=  max_v d(x_v) + 1 - min_v <f, x_v>,
//
// for any functional f with |f|_* = 1.  A second bound is d(center) + r with
// r = 2 h L / |Q c0| the Lipschitz radius of the cell (h the half width, L the
// sum of the norms of the varying basis vectors).  Cells are refined best
// first until the largest open bound is within delta of the best certified
// value.

#include "gapkit/spaces.hpp"

#include <map>
#include <queue>
#include <vector>

namespace gapkit {

enum class LowerMethod { multistart, net };
enum class UpperMethod { net, trivial };

inline const char* to_string(LowerMethod m) { return m == LowerMethod::net ? "net" : "multistart"; }
inline const char* to_string(UpperMethod m) { return m == UpperMethod::net ? "net" : "trivial"; }

struct GapOptions {
  /// Largest subspace dimension for which the sphere cover is attempted.
  Eigen::Index max_net_dim = 4;
  /// Cap on distance evaluations spent by the cover.
  long long evaluation_cap = 2'000'000;
  int ascent_iterations = 60;
  double fd_step = 1e-5;
  std::uint64_t seed = 0;
};

struct GapBracket {
  double lower = 0.0;
  double upper = 1.0;
  LowerMethod lower_method = LowerMethod::multistart;
  UpperMethod upper_method = UpperMethod::trivial;
  double net_delta = 0.0;
  /// Every inner distance solve met its tolerance.
  bool converged = true;
  /// The cover was abandoned at the evaluation cap.
  bool cap_hit = false;
  /// An endpoint fell outside [0, 1] by more than rounding before clamping.
  bool clamp_violation = false;
  long long evaluations = 0;
};

namespace detail {

class DistanceOracle {
 public:
  DistanceOracle(const Space& ambient, const Subspace& E, const Subspace& F)
      : ambient_(ambient), F_(F), Q_(E.orthonormal()) {}

  struct Value {
    double upper;
    double lower;
    Vector point;
  };

  Eigen::Index dim() const { return Q_.cols(); }
  const Matrix& basis() const { return Q_; }

  /// d at the sphere point in the direction of Q c.
  Value at(const Vector& c) {
    Vector x = Q_ * c;
    x /= norm_eval(ambient_, x);
    const BallDistance d = dist_to_unit_ball(ambient_, x, F_);
    ++evaluations;
    if (!d.converged) converged = false;
    return {d.value, d.lower, std::move(x)};
  }

  long long evaluations = 0;
  bool converged = true;

 private:
  const Space& ambient_;
  const Subspace& F_;
  Matrix Q_;
};

struct AscentResult {
  double best_lower = 0.0;
  Vector best_point;
};

/// Multistart projected ascent over the Euclidean unit sphere of coordinates.
inline AscentResult multistart_ascent(DistanceOracle& oracle, int starts, const GapOptions& opt,
                                      std::uint64_t seed) {
  const Eigen::Index k = oracle.dim();
  AscentResult out;
  auto normalize = [](Vector c) { return Vector(c / c.norm()); };
  for (int s = 0; s < starts; ++s) {
    Rng rng(derive_seed(seed, 0xa5, static_cast<std::uint64_t>(s)));
    Vector c = normalize(gaussian_vector(rng, k));
    DistanceOracle::Value v = oracle.at(c);
    if (v.lower > out.best_lower || out.best_point.size() == 0) {
      out.best_lower = v.lower;
      out.best_point = v.point;
    }
    if (k == 1) continue;
    double step = 0.5;
    for (int it = 0; it < opt.ascent_iterations && step > 1e-7; ++it) {
      Vector grad(k);
      for (Eigen::Index i = 0; i < k; ++i) {
        Vector cp = c, cm = c;
        cp[i] += opt.fd_step;
        cm[i] -= opt.fd_step;
        grad[i] = (oracle.at(cp).upper - oracle.at(cm).upper) / (2.0 * opt.fd_step);
      }
      grad -= grad.dot(c) * c;
      const double gn = grad.norm();
      if (!(gn > 1e-12)) break;
      bool moved = false;
      while (step > 1e-7) {
        const Vector cn = normalize(c + step * grad / gn);
        DistanceOracle::Value vn = oracle.at(cn);
        if (vn.upper > v.upper) {
          c = cn;
          v = std::move(vn);
          step *= 1.5;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (v.lower > out.best_lower) {
        out.best_lower = v.lower;
        out.best_point = v.point;
      }
      if (!moved) break;
    }
  }
  return out;
}

/// Dyadic cube coordinates: exact integers at a fixed finest resolution.
constexpr std::int64_t kCubeScale = std::int64_t{1} << 40;

struct Cell {
  double bound;
  std::uint64_t order;
  Eigen::Index face_axis;
  double face_sign;
  std::vector<std::int64_t> lo;  // lower corner in the free coordinates, dyadic
  std::int64_t width;            // dyadic side length
  bool operator<(const Cell& o) const {
    if (bound != o.bound) return bound < o.bound;
    return order > o.order;
  }
};

class SphereCover {
 public:
  SphereCover(DistanceOracle& oracle, const Space& ambient, const GapOptions& opt)
      : oracle_(oracle), ambient_(ambient), opt_(opt), k_(oracle.dim()) {
    for (Eigen::Index j = 0; j < k_; ++j) col_norm_.push_back(norm_eval(ambient, oracle.basis().col(j)));
  }

  struct Outcome {
    double upper;
    double best_lower;
    bool cap_hit;
  };

  Outcome run(double delta, double best_lower) {
    best_lower_ = best_lower;
    std::priority_queue<Cell> open;
    std::uint64_t order = 0;
    for (Eigen::Index axis = 0; axis < k_; ++axis) {
      for (double sign : {-1.0, 1.0}) {
        Cell c{2.0, order++, axis, sign, std::vector<std::int64_t>(static_cast<std::size_t>(k_ - 1), -kCubeScale),
               2 * kCubeScale};
        c.bound = bound(c, 2.0);
        if (capped()) return {1.0, best_lower_, true};
        open.push(std::move(c));
      }
    }
    double leaf_max = 0.0;
    while (!open.empty()) {
      if (open.top().bound <= best_lower_ + delta) break;
      Cell c = open.top();
      open.pop();
      if (c.width < 2) {
        leaf_max = std::max(leaf_max, c.bound);
        continue;
      }
      const std::int64_t half = c.width / 2;
      const std::size_t free = static_cast<std::size_t>(k_ - 1);
      for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << free); ++mask) {
        Cell child{0.0, order++, c.face_axis, c.face_sign, c.lo, half};
        for (std::size_t j = 0; j < free; ++j) {
          if (mask & (std::uint64_t{1} << j)) child.lo[j] += half;
        }
        child.bound = bound(child, c.bound);
        if (capped()) return {1.0, best_lower_, true};
        open.push(std::move(child));
      }
    }
    const double top = open.empty() ? 0.0 : open.top().bound;
    return {std::max({top, leaf_max, best_lower_}), best_lower_, false};
  }

 private:
  bool capped() const { return oracle_.evaluations > opt_.evaluation_cap; }

  Vector cube_point(const Cell& c, const std::vector<std::int64_t>& free_coords) const {
    Vector v(k_);
    std::size_t j = 0;
    for (Eigen::Index i = 0; i < k_; ++i) {
      if (i == c.face_axis) {
        v[i] = c.face_sign;
      } else {
        v[i] = static_cast<double>(free_coords[j++]) / static_cast<double>(kCubeScale);
      }
    }
    return v;
  }

  const DistanceOracle::Value& vertex(const Cell& c, const std::vector<std::int64_t>& free_coords) {
    std::vector<std::int64_t> key;
    key.reserve(static_cast<std::size_t>(k_));
    std::size_t j = 0;
    for (Eigen::Index i = 0; i < k_; ++i) {
      key.push_back(i == c.face_axis ? static_cast<std::int64_t>(c.face_sign) * kCubeScale
                                     : free_coords[j++]);
    }
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      it = cache_.emplace(std::move(key), oracle_.at(cube_point(c, free_coords))).first;
      best_lower_ = std::max(best_lower_, it->second.lower);
    }
    return it->second;
  }

  double bound(const Cell& c, double parent_bound) {
    const std::size_t free = static_cast<std::size_t>(k_ - 1);
    // Center: Lipschitz bound.
    std::vector<std::int64_t> mid = c.lo;
    for (auto& m : mid) m += c.width / 2;
    const DistanceOracle::Value& center = vertex(c, mid);
    const Vector c0 = cube_point(c, mid);
    const double h = static_cast<double>(c.width) / static_cast<double>(kCubeScale) / 2.0;
    double L = 0.0;
    for (Eigen::Index i = 0; i < k_; ++i) {
      if (i != c.face_axis) L += col_norm_[static_cast<std::size_t>(i)];
    }
    const double lip = center.upper + 2.0 * h * L / norm_eval(ambient_, oracle_.basis() * c0);

    // Vertices: convexity bound.
    Vector g;
    norm_subgradient(ambient_, center.point, g);
    const double gd = dual_norm_eval(ambient_, g);
    double vmax = 0.0;
    double min_pair = std::numeric_limits<double>::infinity();
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << free); ++mask) {
      std::vector<std::int64_t> corner = c.lo;
      for (std::size_t j = 0; j < free; ++j) {
        if (mask & (std::uint64_t{1} << j)) corner[j] += c.width;
      }
      const DistanceOracle::Value& v = vertex(c, corner);
      vmax = std::max(vmax, v.upper);
      min_pair = std::min(min_pair, gd > 0.0 ? g.dot(v.point) / gd : 0.0);
    }
    const double convex = vmax + std::max(0.0, 1.0 - min_pair);
    return std::min({parent_bound, lip, convex});
  }

  DistanceOracle& oracle_;
  const Space& ambient_;
  const GapOptions& opt_;
  Eigen::Index k_;
  std::vector<double> col_norm_;
  std::map<std::vector<std::int64_t>, DistanceOracle::Value> cache_;
  double best_lower_ = 0.0;
};

inline void check_subspaces(const Space& ambient, const Subspace& E, const Subspace& F,
                            double delta, int budget) {
  if (!same_space(E.parent(), ambient) || !same_space(F.parent(), ambient)) {
    throw InputError("gap: E and F must be subspaces of the ambient space");
  }
  if (!(delta > 0.0 && delta <= 0.5)) throw InputError("gap: delta must lie in (0, 0.5]");
  if (budget < 1) throw InputError("gap: budget must be positive");
}

inline void clamp_bracket(GapBracket& b) {
  constexpr double slack = 1e-9;
  if (b.lower < -slack || b.lower > 1.0 + slack || b.upper < -slack) b.clamp_violation = true;
  b.lower = std::clamp(b.lower, 0.0, 1.0);
  b.upper = std::clamp(b.upper, 0.0, 1.0);
  if (b.upper < b.lower) {
    if (b.lower - b.upper > slack) b.clamp_violation = true;
    b.upper = b.lower;
  }
}

}  // namespace detail

/// Bracket for sup over x in B_E of d(x, B_F).
inline GapBracket directed_gap(const Space& ambient, const Subspace& E, const Subspace& F,
                               double delta, int budget, const GapOptions& opt = {}) {
  detail::check_subspaces(ambient, E, F, delta, budget);
  detail::DistanceOracle oracle(ambient, E, F);
  GapBracket out;
  out.net_delta = delta;
  const Eigen::Index k = E.dim();

  if (k == 1) {
    // The sphere is two points.
    const auto a = oracle.at(Vector::Ones(1));
    const auto b = oracle.at(-Vector::Ones(1));
    out.lower = std::max(a.lower, b.lower);
    out.upper = std::max(a.upper, b.upper);
    out.lower_method = LowerMethod::net;
    out.upper_method = UpperMethod::net;
    out.net_delta = 0.0;
  } else {
    const detail::AscentResult asc = detail::multistart_ascent(oracle, budget, opt, opt.seed);
    out.lower = asc.best_lower;
    out.lower_method = LowerMethod::multistart;
    if (k <= opt.max_net_dim) {
      detail::SphereCover cover(oracle, ambient, opt);
      const auto res = cover.run(delta, asc.best_lower);
      if (res.cap_hit) {
        out.cap_hit = true;
        out.upper = 1.0;
        out.upper_method = UpperMethod::trivial;
      } else {
        out.upper = res.upper;
        out.upper_method = UpperMethod::net;
      }
      if (res.best_lower > out.lower) {
        out.lower = res.best_lower;
        out.lower_method = LowerMethod::net;
      }
    } else {
      out.upper = 1.0;
      out.upper_method = UpperMethod::trivial;
    }
  }
  out.converged = oracle.converged;
  out.evaluations = oracle.evaluations;
  detail::clamp_bracket(out);
  return out;
}

/// Componentwise maximum of two directed brackets.
inline GapBracket combine_directed(const GapBracket& a, const GapBracket& b) {
  GapBracket out;
  out.lower = std::max(a.lower, b.lower);
  out.lower_method = a.lower >= b.lower ? a.lower_method : b.lower_method;
  out.upper = std::max(a.upper, b.upper);
  out.upper_method = (a.upper_method == UpperMethod::net && b.upper_method == UpperMethod::net)
                         ? UpperMethod::net
                         : UpperMethod::trivial;
  out.net_delta = std::max(a.net_delta, b.net_delta);
  out.converged = a.converged && b.converged;
  out.cap_hit = a.cap_hit || b.cap_hit;
  out.clamp_violation = a.clamp_violation || b.clamp_violation;
  out.evaluations = a.evaluations + b.evaluations;
  return out;
}

inline GapBracket gap(const Space& ambient, const Subspace& E, const Subspace& F, double delta,
                      int budget, const GapOptions& opt = {}) {
  // Both directions use the same options, so gap(E, F) and gap(F, E) compute
  // identical sub-results.
  return combine_directed(directed_gap(ambient, E, F, delta, budget, opt),
                          directed_gap(ambient, F, E, delta, budget, opt));
}

struct DualGapReport {
  double lhs_lower = 0.0;
  double rhs_upper = 1.0;
  bool satisfied = true;
  GapBracket primal;
  bool converged = true;
};

/// Lower endpoint for Lambda(E^perp, F^perp) in the dual space against the
/// upper endpoint for Lambda(E, F); satisfied iff lhs <= 2 rhs + 1e-6.
inline DualGapReport dual_gap_check(const Space& ambient, const Subspace& E, const Subspace& F,
                                    double delta, int budget, const GapOptions& opt = {}) {
  detail::check_subspaces(ambient, E, F, delta, budget);
  if (!ambient.is_banach()) throw UnsupportedError("dual_gap_check: ambient must be normed");
  DualGapReport out;
  out.primal = gap(ambient, E, F, delta, budget, opt);
  const Subspace Ep = annihilator(ambient, E);
  const Subspace Fp = annihilator(ambient, F);
  const Space& dual = Ep.parent();
  double lhs = 0.0;
  bool conv = out.primal.converged;
  int dir = 0;
  for (const auto& [A, B] : {std::pair<const Subspace*, const Subspace*>{&Ep, &Fp},
                             std::pair<const Subspace*, const Subspace*>{&Fp, &Ep}}) {
    detail::DistanceOracle oracle(dual, *A, *B);
    if (A->dim() == 1) {
      lhs = std::max({lhs, oracle.at(Vector::Ones(1)).lower, oracle.at(-Vector::Ones(1)).lower});
    } else {
      lhs = std::max(lhs, detail::multistart_ascent(oracle, budget, opt,
                                                    derive_seed(opt.seed, 3, static_cast<std::uint64_t>(dir)))
                              .best_lower);
    }
    conv = conv && oracle.converged;
    ++dir;
  }
  out.lhs_lower = std::min(lhs, 1.0);
  out.rhs_upper = out.primal.upper;
  out.satisfied = out.lhs_lower <= 2.0 * out.rhs_upper + 1e-6;
  out.converged = conv;
  return out;
}

}  // namespace gapkit

#endif  // GAPKIT_GAP_HPP
