#ifndef GAPKIT_COUPLINGS_HPP
#define GAPKIT_COUPLINGS_HPP

// Homogeneous coupling pairs (Phi, Psi) between two spaces and sampled lower
// bounds on their defects.
//
// For families x_1..x_m in X and y_1..y_n in Y put
//   u = sum x_i - sum Psi(y_j),   v = sum Phi(x_i) - sum y_j.
// The defect ratios are
//   delta:      | |u|_X - |v|_Y | / (sum |x_i| + sum |y_j|)
//   delta_r:    ( | |u|^r - |v|^r | / (sum |x_i|^r + sum |y_j|^r) )^{1/r}
// and, for two points of the unit balls paired with their graph images
// (a, Phi a) or (Psi b, b),
//   d_small:    1/2 | |A_1 - A_2|_X - |B_1 - B_2|_Y |.
//
// Sampling scheme.  Family i is an endless stream of vectors drawn from its
// own derived seed; a coin puts each vector on the X or Y side, entries are
// Gaussian and scaled by a log-uniform radius in [0.1, 10].  The pool consists
// of every prefix of length 1..budget of families 0..samples-1.  Families are
// grouped in blocks of 32; for each complete block and each prefix length the
// best family is improved by local ascent.  The pool and the set of ascents
// only grow with `samples` and `budget`, so the estimate is monotone in both.

#include "gapkit/spaces.hpp"

#include <algorithm>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace gapkit {

struct MapRecipe;

/// Sampled rays of two spheres matched one to one; the map is extended
/// oddly and homogeneously along each ray.
struct RayTable {
  Matrix from;
  Matrix to;
};

namespace recipe {
struct Identity {};
struct Zero {
  Eigen::Index out_dim = 0;
};
struct Scale {
  double c = 1.0;
};
struct Mazur {
  double p_from = 2.0;
  double p_to = 2.0;
};
/// x in Z/E (complement coordinates) -> theta^{-1} q_F(lift_E(x)).
struct QuotientLift {
  Space Z;
  Subspace from_kernel;
  Subspace to_kernel;
  double theta;
};
struct PartitionBijection {
  std::shared_ptr<const RayTable> table;
  bool inverse = false;
};
struct Composite {
  std::vector<MapRecipe> steps;
};
}  // namespace recipe

struct MapRecipe {
  std::variant<recipe::Identity, recipe::Zero, recipe::Scale, recipe::Mazur, recipe::QuotientLift,
               recipe::PartitionBijection, recipe::Composite>
      v;
};

struct Coupling {
  Space domain;
  Space codomain;
  MapRecipe phi;
  MapRecipe psi;
};

enum class Side { x, y };

/// A finite family of tagged vectors, in the order they were summed.
struct Family {
  std::vector<Vector> vectors;
  std::vector<Side> sides;

  std::size_t size() const { return vectors.size(); }
  void push(Vector v, Side s) {
    vectors.push_back(std::move(v));
    sides.push_back(s);
  }
};

enum class DefectKind { delta, delta_r, d_small };

inline std::string to_string(DefectKind k) {
  switch (k) {
    case DefectKind::delta: return "delta";
    case DefectKind::delta_r: return "delta_r";
    default: return "d_small";
  }
}

struct DefectEstimate {
  /// Lower bound on the supremum defect.
  double value = 0.0;
  DefectKind kind = DefectKind::delta;
  double r = 1.0;
  int budget = 0;
  long samples = 0;
  std::uint64_t seed = 0;
  Family witness;
};

// ---------------------------------------------------------------------------
// Map evaluation.

namespace detail {

inline Vector mazur_apply(const recipe::Mazur& m, const Vector& x) {
  const PowerOfTwoScale canon = power_of_two_canonical(x);
  if (canon.canonical.cwiseAbs().maxCoeff() == 0.0) return x;
  const double n = lp_norm(canon.canonical, Exponent(m.p_from));
  const double a = m.p_from / m.p_to;
  Vector out(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double xi = canon.canonical[k] / n;
    const double mag = std::pow(std::abs(xi), a);
    out[k] = xi < 0.0 ? -mag : mag;
  }
  return scale_by_power_of_two(n * out, canon.exponent);
}

inline Vector table_apply(const recipe::PartitionBijection& t, const Vector& x) {
  const Matrix& from = t.inverse ? t.table->to : t.table->from;
  const Matrix& to = t.inverse ? t.table->from : t.table->to;
  require_dim(x, from.rows(), "ray table");
  const double nx = x.norm();
  if (nx == 0.0) return Vector::Zero(to.rows());
  for (Eigen::Index i = 0; i < from.cols(); ++i) {
    const double s = from.col(i).dot(x) / from.col(i).squaredNorm();
    if ((x - s * from.col(i)).norm() <= 1e-9 * nx) return s * to.col(i);
  }
  throw InputError("ray table: vector is not on a sampled ray");
}

}  // namespace detail

inline Vector apply_map(const MapRecipe& m, const Vector& x) {
  return std::visit(
      [&](const auto& r) -> Vector {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, recipe::Identity>) {
          return x;
        } else if constexpr (std::is_same_v<T, recipe::Zero>) {
          return Vector::Zero(r.out_dim);
        } else if constexpr (std::is_same_v<T, recipe::Scale>) {
          return r.c * x;
        } else if constexpr (std::is_same_v<T, recipe::Mazur>) {
          return detail::mazur_apply(r, x);
        } else if constexpr (std::is_same_v<T, recipe::QuotientLift>) {
          const Vector v = r.from_kernel.complement() * x;
          const Lift l = lift_from_quotient(r.Z, r.from_kernel, v, r.theta);
          if (!l.ok) throw NumericalError("quotient lift: no lift within the factor theta");
          return r.to_kernel.complement().transpose() * l.z / r.theta;
        } else if constexpr (std::is_same_v<T, recipe::PartitionBijection>) {
          return detail::table_apply(r, x);
        } else {
          Vector cur = x;
          for (const MapRecipe& s : r.steps) cur = apply_map(s, cur);
          return cur;
        }
      },
      m.v);
}

inline Vector apply_phi(const Coupling& c, const Vector& x) { return apply_map(c.phi, x); }
inline Vector apply_psi(const Coupling& c, const Vector& y) { return apply_map(c.psi, y); }

// ---------------------------------------------------------------------------
// Construction.

inline void require_banach(const Space& s, const char* what) {
  if (!s.is_banach()) throw UnsupportedError(std::string(what) + ": r-normed spaces not supported");
}

inline Coupling identity_coupling(const Space& X) {
  require_banach(X, "identity coupling");
  return {X, X, {recipe::Identity{}}, {recipe::Identity{}}};
}

inline Coupling zero_coupling(const Space& X, const Space& Y) {
  require_banach(X, "zero coupling");
  require_banach(Y, "zero coupling");
  return {X, Y, {recipe::Zero{Y.dim()}}, {recipe::Zero{X.dim()}}};
}

inline Coupling scale_coupling(const Space& X, double c) {
  require_banach(X, "scale coupling");
  if (!(c > 0.0 && c <= 1.0)) throw InputError("scale coupling: factor must lie in (0, 1]");
  return {X, X, {recipe::Scale{c}}, {recipe::Scale{c}}};
}

/// Mazur maps l_p^n -> l_q^n and back, finite p, q >= 1.
inline Coupling mazur_coupling(Eigen::Index n, double p, double q) {
  if (n < 1) throw InputError("mazur coupling: dimension must be positive");
  for (double e : {p, q}) {
    if (!(e >= 1.0) || !std::isfinite(e)) throw InputError("mazur coupling: exponents in [1, inf)");
  }
  return {Space::lp(n, Exponent(p)), Space::lp(n, Exponent(q)), {recipe::Mazur{p, q}},
          {recipe::Mazur{q, p}}};
}

/// Coupling between Z/E and Z/F through theta-lifts.
inline Coupling quotient_coupling(const Space& Z, const Subspace& E, const Subspace& F,
                                  double theta) {
  require_banach(Z, "quotient coupling");
  if (!same_space(E.parent(), Z) || !same_space(F.parent(), Z)) {
    throw InputError("quotient coupling: E and F must be subspaces of Z");
  }
  if (!(theta > 1.0) || !std::isfinite(theta)) throw InputError("quotient coupling: theta > 1");
  return {Space::quotient(Z, E), Space::quotient(Z, F),
          {recipe::QuotientLift{Z, E, F, theta}}, {recipe::QuotientLift{Z, F, E, theta}}};
}

// ---------------------------------------------------------------------------
// Invariant sampling.

namespace detail {

inline Vector random_direction(Rng& rng, const Space& s) {
  Vector v;
  do {
    v = gaussian_vector(rng, s.dim());
  } while (v.cwiseAbs().maxCoeff() == 0.0);
  return v;
}

struct InvariantCheck {
  double homogeneity = 0.0;
  double oddness = 0.0;
  double expansion = 0.0;
};

inline void check_map(const MapRecipe& m, const Space& from, const Space& to, const Vector& x,
                      double lambda, InvariantCheck& out) {
  const double nx = norm_eval(from, x);
  const Vector fx = apply_map(m, x);
  require_dim(fx, to.dim(), "coupling map output");
  const Vector fl = apply_map(m, lambda * x);
  const Vector fn = apply_map(m, -x);
  const double scale = std::max(nx, 1e-300);
  out.homogeneity = std::max(out.homogeneity, (fl - lambda * fx).norm() / (lambda * scale));
  out.oddness = std::max(out.oddness, (fn + fx).norm() / scale);
  out.expansion = std::max(out.expansion, norm_eval(to, fx) / scale - 1.0);
}

inline std::vector<Vector> invariant_points(const MapRecipe& m, const Space& from, Rng& rng,
                                            int count) {
  std::vector<Vector> pts;
  if (const auto* t = std::get_if<recipe::PartitionBijection>(&m.v)) {
    const Matrix& rays = t->inverse ? t->table->to : t->table->from;
    for (int i = 0; i < count && rays.cols() > 0; ++i) {
      const auto k = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(rays.cols()));
      pts.push_back((0.5 + uniform01(rng)) * rays.col(k));
    }
    return pts;
  }
  for (int i = 0; i < count; ++i) pts.push_back(random_direction(rng, from));
  return pts;
}

}  // namespace detail

/// Samples homogeneity, oddness and nonexpansiveness of both maps (relative
/// tolerance 1e-9); throws InputError naming the violated property.
inline void validate_coupling(const Coupling& c, std::uint64_t seed = 0, int count = 32) {
  require_banach(c.domain, "coupling");
  require_banach(c.codomain, "coupling");
  Rng rng(derive_seed(seed, 0xc0u));
  for (int side = 0; side < 2; ++side) {
    const MapRecipe& m = side == 0 ? c.phi : c.psi;
    const Space& from = side == 0 ? c.domain : c.codomain;
    const Space& to = side == 0 ? c.codomain : c.domain;
    detail::InvariantCheck chk;
    for (const Vector& x : detail::invariant_points(m, from, rng, count)) {
      const double lambda = std::exp(4.0 * uniform01(rng) - 2.0);
      detail::check_map(m, from, to, x, lambda, chk);
    }
    const char* name = side == 0 ? "phi" : "psi";
    if (chk.homogeneity > 1e-9) throw InputError(std::string("coupling: ") + name + " is not homogeneous");
    if (chk.oddness > 1e-9) throw InputError(std::string("coupling: ") + name + " is not odd");
    if (chk.expansion > 1e-9) throw InputError(std::string("coupling: ") + name + " is not nonexpansive");
  }
}

// ---------------------------------------------------------------------------
// Defect of a single family.

namespace detail {

struct FamilySums {
  Vector x, y, phi_x, psi_y;
  double den = 0.0;

  FamilySums(Eigen::Index dx, Eigen::Index dy)
      : x(Vector::Zero(dx)), y(Vector::Zero(dy)), phi_x(Vector::Zero(dy)), psi_y(Vector::Zero(dx)) {}

  void add(const Vector& v, const Vector& image, Side s, double vnorm, double r) {
    if (s == Side::x) {
      x += v;
      phi_x += image;
    } else {
      y += v;
      psi_y += image;
    }
    den += r == 1.0 ? vnorm : std::pow(vnorm, r);
  }
};

inline double sums_ratio(const Coupling& c, const FamilySums& s, double r) {
  if (s.den == 0.0) return 0.0;
  const double nu = norm_eval(c.domain, s.x - s.psi_y);
  const double nv = norm_eval(c.codomain, s.phi_x - s.y);
  if (r == 1.0) return std::abs(nu - nv) / s.den;
  return std::pow(std::abs(std::pow(nu, r) - std::pow(nv, r)) / s.den, 1.0 / r);
}

/// Image and norm of one tagged vector.
struct Mapped {
  Vector image;
  double norm = 0.0;
};

inline Mapped map_vector(const Coupling& c, const Vector& v, Side s) {
  if (s == Side::x) return {apply_phi(c, v), norm_eval(c.domain, v)};
  return {apply_psi(c, v), norm_eval(c.codomain, v)};
}

inline double family_ratio(const Coupling& c, const Family& f, const std::vector<Mapped>& m,
                           double r) {
  FamilySums s(c.domain.dim(), c.codomain.dim());
  for (std::size_t i = 0; i < f.size(); ++i) s.add(f.vectors[i], m[i].image, f.sides[i], m[i].norm, r);
  return sums_ratio(c, s, r);
}

inline std::vector<Mapped> map_family(const Coupling& c, const Family& f) {
  std::vector<Mapped> m;
  m.reserve(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) m.push_back(map_vector(c, f.vectors[i], f.sides[i]));
  return m;
}

inline Vector graph_x(const Mapped& m, const Vector& v, Side s) { return s == Side::x ? v : m.image; }
inline Vector graph_y(const Mapped& m, const Vector& v, Side s) { return s == Side::x ? m.image : v; }

inline double pair_defect(const Coupling& c, const Family& f, const std::vector<Mapped>& m) {
  const Vector ax = graph_x(m[0], f.vectors[0], f.sides[0]) - graph_x(m[1], f.vectors[1], f.sides[1]);
  const Vector ay = graph_y(m[0], f.vectors[0], f.sides[0]) - graph_y(m[1], f.vectors[1], f.sides[1]);
  return 0.5 * std::abs(norm_eval(c.domain, ax) - norm_eval(c.codomain, ay));
}

}  // namespace detail

/// Normalized defect of a family; r = 1 gives the delta ratio.
inline double family_defect(const Coupling& c, const Family& f, double r = 1.0) {
  return detail::family_ratio(c, f, detail::map_family(c, f), r);
}

/// Half the distance distortion between the graph points of a two-vector
/// family.
inline double pair_defect(const Coupling& c, const Family& f) {
  if (f.size() != 2) throw InputError("pair defect: family must have two vectors");
  return detail::pair_defect(c, f, detail::map_family(c, f));
}

/// Recomputes the defect of an estimate's witness.
inline double witness_defect(const Coupling& c, const DefectEstimate& e) {
  if (e.witness.size() == 0) return 0.0;
  if (e.kind == DefectKind::d_small) return pair_defect(c, e.witness);
  return family_defect(c, e.witness, e.kind == DefectKind::delta ? 1.0 : e.r);
}

// ---------------------------------------------------------------------------
// Sampled estimates.

namespace detail {

constexpr int kBlock = 32;
constexpr int kAscentRounds = 200;
constexpr int kRejectionsBeforeHalving = 20;

inline Vector draw_family_vector(Rng& rng, const Coupling& c, Side& side) {
  side = (rng() & 1u) ? Side::y : Side::x;
  const Space& s = side == Side::x ? c.domain : c.codomain;
  const Vector g = random_direction(rng, s);
  const double radius = 0.1 * std::pow(100.0, uniform01(rng));
  return radius * g;
}

inline Family family_prefix(const Coupling& c, std::uint64_t seed, long index, int length) {
  Rng rng(derive_seed(seed, 0xfa, static_cast<std::uint64_t>(index)));
  Family f;
  for (int k = 0; k < length; ++k) {
    Side s;
    Vector v = draw_family_vector(rng, c, s);
    f.push(std::move(v), s);
  }
  return f;
}

/// Largest value; ties go to the earlier candidate.
struct Best {
  double value = -1.0;
  Family witness;
  void offer(double v, const Family& f) {
    if (v > value) {
      value = v;
      witness = f;
    }
  }
};

inline Vector perturbation(Rng& rng, const Vector& v, double multiplier) {
  const Vector g = gaussian_vector(rng, v.size());
  return (0.3 * multiplier * v.norm() / std::sqrt(static_cast<double>(v.size()))) * g;
}

/// Scales v into the closed unit ball of s, checking the computed norm.
inline Vector into_ball(const Space& s, Vector v) {
  double n = norm_eval(s, v);
  if (n <= 1.0) return v;
  v /= n;
  while ((n = norm_eval(s, v)) > 1.0) v *= std::nextafter(1.0, 0.0) / n;
  return v;
}

/// Local ascent: perturb one vector, keep it if the objective rises.
template <class Objective, class Project>
Best ascend(const Coupling& c, Family f, double start, std::uint64_t seed, Objective objective,
            Project project) {
  Rng rng(seed);
  std::vector<Mapped> mapped = map_family(c, f);
  Best best;
  best.offer(start, f);
  double multiplier = 1.0;
  int rejections = 0;
  for (int round = 0; round < kAscentRounds; ++round) {
    const auto j = static_cast<std::size_t>(rng() % f.size());
    const Vector old = f.vectors[j];
    const Mapped old_m = mapped[j];
    f.vectors[j] = project(f.sides[j], Vector(old + perturbation(rng, old, multiplier)));
    if (f.vectors[j].cwiseAbs().maxCoeff() == 0.0) {
      f.vectors[j] = old;
      continue;
    }
    mapped[j] = map_vector(c, f.vectors[j], f.sides[j]);
    const double v = objective(f, mapped);
    if (v > best.value) {
      best.value = v;
      best.witness = f;
      rejections = 0;
    } else {
      f.vectors[j] = old;
      mapped[j] = old_m;
      if (++rejections >= kRejectionsBeforeHalving) {
        multiplier *= 0.5;
        rejections = 0;
      }
    }
  }
  return best;
}

inline DefectEstimate family_estimate(const Coupling& c, int budget, long samples,
                                      std::uint64_t seed, double r) {
  if (budget < 2) throw InputError("defect estimate: budget must be at least 2");
  if (samples < 1) throw InputError("defect estimate: samples must be positive");
  validate_coupling(c, seed);

  // ratios[i][l - 1] for the prefix of length l of family i.
  const auto n = static_cast<std::size_t>(samples);
  std::vector<std::vector<double>> ratios(n);
  parallel_for(n, [&](std::size_t i) {
    const Family f = family_prefix(c, seed, static_cast<long>(i), budget);
    FamilySums s(c.domain.dim(), c.codomain.dim());
    ratios[i].resize(static_cast<std::size_t>(budget));
    for (int l = 0; l < budget; ++l) {
      const Mapped m = map_vector(c, f.vectors[static_cast<std::size_t>(l)], f.sides[static_cast<std::size_t>(l)]);
      s.add(f.vectors[static_cast<std::size_t>(l)], m.image, f.sides[static_cast<std::size_t>(l)], m.norm, r);
      ratios[i][static_cast<std::size_t>(l)] = sums_ratio(c, s, r);
    }
  });

  Best best;
  long best_i = 0;
  int best_l = 1;
  for (int l = 1; l <= budget; ++l) {
    for (std::size_t i = 0; i < n; ++i) {
      if (ratios[i][static_cast<std::size_t>(l - 1)] > best.value) {
        best.value = ratios[i][static_cast<std::size_t>(l - 1)];
        best_i = static_cast<long>(i);
        best_l = l;
      }
    }
  }
  best.witness = family_prefix(c, seed, best_i, best_l);

  const std::size_t blocks = n / kBlock;
  const std::size_t tasks = blocks * static_cast<std::size_t>(budget);
  std::vector<Best> ascents(tasks);
  parallel_for(tasks, [&](std::size_t t) {
    const std::size_t b = t / static_cast<std::size_t>(budget);
    const int l = static_cast<int>(t % static_cast<std::size_t>(budget)) + 1;
    std::size_t arg = b * kBlock;
    for (std::size_t i = b * kBlock; i < (b + 1) * kBlock; ++i) {
      if (ratios[i][static_cast<std::size_t>(l - 1)] > ratios[arg][static_cast<std::size_t>(l - 1)]) arg = i;
    }
    ascents[t] = ascend(
        c, family_prefix(c, seed, static_cast<long>(arg), l), ratios[arg][static_cast<std::size_t>(l - 1)],
        derive_seed(seed, 0xa5c0 + b, static_cast<std::uint64_t>(l)),
        [&](const Family& f, const std::vector<Mapped>& m) { return family_ratio(c, f, m, r); },
        [](Side, Vector v) { return v; });
  });
  for (const Best& a : ascents) {
    if (a.value > best.value) best = a;
  }

  DefectEstimate out;
  out.value = std::max(0.0, best.value);
  out.kind = r == 1.0 ? DefectKind::delta : DefectKind::delta_r;
  out.r = r;
  out.budget = budget;
  out.samples = samples;
  out.seed = seed;
  out.witness = best.witness;
  return out;
}

/// Four ball points a_1, a_2 in B_X and b_1, b_2 in B_Y for pool sample s.
/// Half the draws lie on the sphere.
inline Family ball_quadruple(const Coupling& c, std::uint64_t seed, long s) {
  Rng rng(derive_seed(seed, 0xd5, static_cast<std::uint64_t>(s)));
  Family f;
  for (int k = 0; k < 4; ++k) {
    const Side side = k < 2 ? Side::x : Side::y;
    const Space& sp = side == Side::x ? c.domain : c.codomain;
    Vector v = random_direction(rng, sp);
    v /= norm_eval(sp, v);
    if (rng() & 1u) v *= std::pow(uniform01(rng), 1.0 / static_cast<double>(sp.dim()));
    f.push(into_ball(sp, std::move(v)), side);
  }
  return f;
}

constexpr int kPairs[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};

inline Family pair_of(const Family& quad, int k) {
  Family f;
  for (int e : kPairs[k]) f.push(quad.vectors[static_cast<std::size_t>(e)], quad.sides[static_cast<std::size_t>(e)]);
  return f;
}

}  // namespace detail

/// Lower bound on Delta(Phi, Psi) over families with m + n <= budget.
inline DefectEstimate delta_estimate(const Coupling& c, int budget, long samples,
                                     std::uint64_t seed) {
  return detail::family_estimate(c, budget, samples, seed, 1.0);
}

/// Lower bound on Delta_r(Phi, Psi), 0 < r < 1.
inline DefectEstimate delta_r_estimate(const Coupling& c, double r, int budget, long samples,
                                       std::uint64_t seed) {
  if (!(r > 0.0 && r < 1.0)) throw InputError("delta_r estimate: r must lie in (0, 1)");
  return detail::family_estimate(c, budget, samples, seed, r);
}

/// Lower bound on D(phi, psi) for the restrictions of Phi, Psi to the balls.
inline DefectEstimate d_small_estimate(const Coupling& c, long samples, std::uint64_t seed) {
  using namespace detail;
  if (samples < 1) throw InputError("d_small estimate: samples must be positive");
  validate_coupling(c, seed);
  const auto n = static_cast<std::size_t>(samples);
  std::vector<double> values(n);
  std::vector<int> which(n);
  parallel_for(n, [&](std::size_t s) {
    const Family quad = ball_quadruple(c, seed, static_cast<long>(s));
    const std::vector<Mapped> m = map_family(c, quad);
    values[s] = -1.0;
    for (int k = 0; k < 6; ++k) {
      const std::vector<Mapped> mk = {m[static_cast<std::size_t>(kPairs[k][0])],
                                      m[static_cast<std::size_t>(kPairs[k][1])]};
      const double v = detail::pair_defect(c, pair_of(quad, k), mk);
      if (v > values[s]) {
        values[s] = v;
        which[s] = k;
      }
    }
  });
  Best best;
  std::size_t arg = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (values[s] > values[arg]) arg = s;
  }
  best.value = values[arg];
  best.witness = pair_of(ball_quadruple(c, seed, static_cast<long>(arg)), which[arg]);

  const std::size_t blocks = n / kBlock;
  std::vector<Best> ascents(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    std::size_t a = b * kBlock;
    for (std::size_t s = b * kBlock; s < (b + 1) * kBlock; ++s) {
      if (values[s] > values[a]) a = s;
    }
    ascents[b] = ascend(
        c, pair_of(ball_quadruple(c, seed, static_cast<long>(a)), which[a]), values[a],
        derive_seed(seed, 0xd5a0 + b),
        [&](const Family& f, const std::vector<Mapped>& m) { return detail::pair_defect(c, f, m); },
        [&](Side s, Vector v) { return into_ball(s == Side::x ? c.domain : c.codomain, std::move(v)); });
  });
  for (const Best& a : ascents) {
    if (a.value > best.value) best = a;
  }
  DefectEstimate out;
  out.value = std::max(0.0, best.value);
  out.kind = DefectKind::d_small;
  out.budget = 2;
  out.samples = samples;
  out.seed = seed;
  out.witness = best.witness;
  return out;
}

// ---------------------------------------------------------------------------
// Shared restricted pool: the ball pairs of d_small_estimate, each read also
// as a delta family.

/// The delta family (x's and y's) whose numerator is twice the pair defect:
/// the second vector is negated when both lie on the same side.
inline Family pair_as_family(const Family& pair) {
  Family f = pair;
  if (f.sides[0] == f.sides[1]) f.vectors[1] = -f.vectors[1];
  return f;
}

struct PoolComparison {
  long pairs = 0;
  double d_small = 0.0;
  double delta = 0.0;
  /// Largest d - delta over witnesses; at most 0 when the subset property holds.
  double worst_subset_excess = -std::numeric_limits<double>::infinity();
  bool subset_ok = true;
  /// r-comparison: d <= 2^{2/r-1} rho per witness, rho the larger delta_r
  /// ratio of the family extended by -u on the X side (making u vanish) or by
  /// v on the Y side (making v vanish).
  std::optional<double> r;
  double delta_r_extended = 0.0;
  double worst_r_excess = -std::numeric_limits<double>::infinity();
  bool r_ok = true;
};

namespace detail {

inline double extended_delta_r(const Coupling& c, const Family& f, double r) {
  FamilySums s(c.domain.dim(), c.codomain.dim());
  const std::vector<Mapped> m = map_family(c, f);
  for (std::size_t i = 0; i < f.size(); ++i) s.add(f.vectors[i], m[i].image, f.sides[i], m[i].norm, 1.0);
  const Vector u = s.x - s.psi_y;
  const Vector v = s.phi_x - s.y;
  Family fu = f;
  fu.push(-u, Side::x);
  Family fv = f;
  fv.push(v, Side::y);
  return std::max(family_defect(c, fu, r), family_defect(c, fv, r));
}

}  // namespace detail

inline PoolComparison restricted_pool_check(const Coupling& c, long samples, std::uint64_t seed,
                                            std::optional<double> r = std::nullopt) {
  using namespace detail;
  if (samples < 1) throw InputError("pool check: samples must be positive");
  if (r && !(*r > 0.0 && *r < 1.0)) throw InputError("pool check: r must lie in (0, 1)");
  validate_coupling(c, seed);
  const auto n = static_cast<std::size_t>(samples);
  std::vector<PoolComparison> parts(n);
  parallel_for(n, [&](std::size_t s) {
    const Family quad = ball_quadruple(c, seed, static_cast<long>(s));
    PoolComparison& p = parts[s];
    for (int k = 0; k < 6; ++k) {
      const Family pair = pair_of(quad, k);
      const double d = pair_defect(c, pair);
      const Family fam = pair_as_family(pair);
      const double dl = family_defect(c, fam);
      p.d_small = std::max(p.d_small, d);
      p.delta = std::max(p.delta, dl);
      p.worst_subset_excess = std::max(p.worst_subset_excess, d - dl);
      if (r) {
        const double rho = extended_delta_r(c, fam, *r);
        p.delta_r_extended = std::max(p.delta_r_extended, rho);
        p.worst_r_excess = std::max(p.worst_r_excess, d - std::exp2(2.0 / *r - 1.0) * rho);
      }
    }
  });
  PoolComparison out;
  out.pairs = samples * 6;
  out.r = r;
  for (const PoolComparison& p : parts) {
    out.d_small = std::max(out.d_small, p.d_small);
    out.delta = std::max(out.delta, p.delta);
    out.worst_subset_excess = std::max(out.worst_subset_excess, p.worst_subset_excess);
    out.delta_r_extended = std::max(out.delta_r_extended, p.delta_r_extended);
    out.worst_r_excess = std::max(out.worst_r_excess, p.worst_r_excess);
  }
  out.subset_ok = out.worst_subset_excess <= 1e-12;
  out.r_ok = !r || out.worst_r_excess <= 1e-12;
  return out;
}

// ---------------------------------------------------------------------------
// Near-inverse consistency checks.

struct NearInverseReport {
  double sigma = 0.0;
  long samples = 0;
  /// max |y - Phi Psi y| / |y| (and the same with the roles swapped); bound 2 sigma.
  double inverse_ratio = 0.0;
  /// max 1 - |Phi x| / |x| over both maps; bound sigma.
  double shrink_ratio = 0.0;
  /// max |sum Phi x_k| / sum |x_k| over triples with sum x_k = 0; bound sigma.
  double triple_ratio = 0.0;
  /// max | |x - Psi y| - |y - Phi x| | / (|x| + |y|); bound 6 sigma.
  double pairwise_ratio = 0.0;
  bool inverse_ok = true;
  bool shrink_ok = true;
  bool triple_ok = true;
  bool pairwise_ok = true;

  bool all_ok() const { return inverse_ok && shrink_ok && triple_ok && pairwise_ok; }
};

inline NearInverseReport check_near_inverse(const Coupling& c, double sigma, long samples,
                                            std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InputError("near-inverse check: sigma must be nonnegative");
  if (samples < 1) throw InputError("near-inverse check: samples must be positive");
  NearInverseReport out;
  out.sigma = sigma;
  out.samples = samples;
  Rng rng(derive_seed(seed, 0x31));
  const Space& X = c.domain;
  const Space& Y = c.codomain;
  for (long s = 0; s < samples; ++s) {
    const Vector x = detail::random_direction(rng, X);
    const Vector y = detail::random_direction(rng, Y);
    const double nx = norm_eval(X, x);
    const double ny = norm_eval(Y, y);
    const Vector px = apply_phi(c, x);
    const Vector qy = apply_psi(c, y);
    out.inverse_ratio = std::max(out.inverse_ratio, norm_eval(Y, y - apply_phi(c, qy)) / ny);
    out.inverse_ratio = std::max(out.inverse_ratio, norm_eval(X, x - apply_psi(c, px)) / nx);
    out.shrink_ratio = std::max(out.shrink_ratio, 1.0 - norm_eval(Y, px) / nx);
    out.shrink_ratio = std::max(out.shrink_ratio, 1.0 - norm_eval(X, qy) / ny);
    out.pairwise_ratio = std::max(
        out.pairwise_ratio, std::abs(norm_eval(X, x - qy) - norm_eval(Y, y - px)) / (nx + ny));

    const Vector x2 = detail::random_direction(rng, X);
    const Vector x3 = -x - x2;
    out.triple_ratio = std::max(
        out.triple_ratio,
        norm_eval(Y, px + apply_phi(c, x2) + apply_phi(c, x3)) /
            (nx + norm_eval(X, x2) + norm_eval(X, x3)));
    const Vector y2 = detail::random_direction(rng, Y);
    const Vector y3 = -y - y2;
    out.triple_ratio = std::max(
        out.triple_ratio,
        norm_eval(X, qy + apply_psi(c, y2) + apply_psi(c, y3)) /
            (ny + norm_eval(Y, y2) + norm_eval(Y, y3)));
  }
  out.shrink_ratio = std::max(0.0, out.shrink_ratio);
  constexpr double tol = 1e-9;
  out.inverse_ok = out.inverse_ratio <= 2.0 * sigma + tol;
  out.shrink_ok = out.shrink_ratio <= sigma + tol;
  out.triple_ok = out.triple_ratio <= sigma + tol;
  out.pairwise_ok = out.pairwise_ratio <= 6.0 * sigma + tol;
  return out;
}

// ---------------------------------------------------------------------------
// Norm-preserving bijection between sampled spheres of two subspaces.

struct OmegaReport {
  std::shared_ptr<const RayTable> table;
  std::vector<Vector> centers_x;
  std::vector<Vector> centers_y;
  long sampled_rays = 0;
  long families = 0;
  /// max | |sum Omega x_i| - |sum x_i| | / sum |x_i| over checked families.
  double worst_family_defect = 0.0;
  bool within_bound = true;
};

struct OmegaResult : OmegaReport {
  Coupling coupling;
};

namespace detail {

/// Distance with the identification u ~ -u; `sign` receives the s in {+1, -1}
/// with |s u - c| minimal (+1 on ties).
inline double ray_distance(const Space& Z, const Vector& u, const Vector& c, double* sign) {
  const double dp = norm_eval(Z, u - c);
  const double dm = norm_eval(Z, u + c);
  if (sign) *sign = dm < dp ? -1.0 : 1.0;
  return std::min(dp, dm);
}

/// Index of the nearest center under ray distance, lowest index on ties.
inline std::size_t nearest_center(const Space& Z, const Vector& u, const std::vector<Vector>& centers,
                                  double* sign) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < centers.size(); ++i) {
    double s = 1.0;
    const double d = ray_distance(Z, u, centers[i], &s);
    if (d < bd) {
      bd = d;
      best = i;
      if (sign) *sign = s;
    }
  }
  return best;
}

/// Unit rays of a subspace, one per antipodal pair (first nonzero coordinate
/// of the coefficient vector positive).  X and Y rays share the coefficient
/// stream.
inline std::vector<Vector> sample_rays(const Space& Z, const Subspace& S, long count,
                                       std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x0e));
  std::vector<Vector> rays;
  rays.reserve(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) {
    Vector g = random_direction(rng, Space::lp(S.dim(), Exponent(2.0)));
    g *= canonical_sign(g);
    const Vector v = S.basis() * g;
    rays.push_back(v / norm_eval(Z, v));
  }
  return rays;
}

}  // namespace detail

/// Builds the bijection on `sphere_samples` sampled rays of S_X and S_Y
/// (subspaces of Z with gap below sigma): greedy 4 sigma-separated centers in
/// S_X, matched partners in S_Y within 2 sigma, nearest-center cells on both
/// spheres, and nearest-neighbour pairing inside each cell (unmatched surplus
/// rays are dropped).  The result is checked on `families` random families.
inline OmegaResult build_omega(const Space& Z, const Subspace& X, const Subspace& Y, double sigma,
                               long sphere_samples, std::uint64_t seed, long families = 2000) {
  using namespace detail;
  require_banach(Z, "build_omega");
  if (!same_space(X.parent(), Z) || !same_space(Y.parent(), Z)) {
    throw InputError("build_omega: X and Y must be subspaces of Z");
  }
  if (X.dim() != Y.dim()) throw InputError("build_omega: X and Y must have equal dimension");
  if (!(sigma > 0.0 && sigma < 1.0 / 6.0)) throw InputError("build_omega: sigma must lie in (0, 1/6)");
  if (sphere_samples < 1) throw InputError("build_omega: sphere_samples must be positive");

  const std::vector<Vector> xr = sample_rays(Z, X, sphere_samples, seed);
  const std::vector<Vector> yr = sample_rays(Z, Y, sphere_samples, seed);

  OmegaReport out;
  out.sampled_rays = sphere_samples;
  for (const Vector& u : xr) {
    bool far = true;
    for (const Vector& c : out.centers_x) {
      if (ray_distance(Z, u, c, nullptr) <= 4.0 * sigma) {
        far = false;
        break;
      }
    }
    if (far) out.centers_x.push_back(u);
  }
  for (const Vector& c : out.centers_x) {
    const BallDistance d = dist_to_unit_ball(Z, c, Y);
    Vector yc;
    if (d.value <= 1e-14) {
      yc = c;
    } else {
      yc = d.nearest / norm_eval(Z, d.nearest);
    }
    if (!(norm_eval(Z, c - yc) < 2.0 * sigma)) {
      throw InputError("build_omega: a center has no partner within 2 sigma; the gap bound is violated");
    }
    out.centers_y.push_back(yc);
  }

  const std::size_t k = out.centers_x.size();
  std::vector<std::vector<Vector>> A(k), B(k);
  for (const Vector& u : xr) {
    double s = 1.0;
    const std::size_t i = nearest_center(Z, u, out.centers_x, &s);
    A[i].push_back(s * u);
  }
  for (const Vector& v : yr) {
    double s = 1.0;
    const std::size_t i = nearest_center(Z, v, out.centers_y, &s);
    B[i].push_back(s * v);
  }

  std::vector<Vector> from, to;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<bool> used(B[i].size(), false);
    for (const Vector& a : A[i]) {
      std::size_t arg = B[i].size();
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < B[i].size(); ++j) {
        if (used[j]) continue;
        const double d = norm_eval(Z, a - B[i][j]);
        if (d < bd) {
          bd = d;
          arg = j;
        }
      }
      if (arg == B[i].size()) break;
      used[arg] = true;
      from.push_back(a);
      to.push_back(B[i][arg]);
    }
  }
  auto table = std::make_shared<RayTable>();
  table->from.resize(Z.dim(), static_cast<Eigen::Index>(from.size()));
  table->to.resize(Z.dim(), static_cast<Eigen::Index>(to.size()));
  for (std::size_t j = 0; j < from.size(); ++j) {
    table->from.col(static_cast<Eigen::Index>(j)) = from[j];
    table->to.col(static_cast<Eigen::Index>(j)) = to[j];
  }
  out.table = table;
  const Coupling coupling{Z, Z, {recipe::PartitionBijection{table, false}},
                          {recipe::PartitionBijection{table, true}}};

  Rng rng(derive_seed(seed, 0x0f));
  const auto rays = static_cast<std::uint64_t>(from.size());
  out.families = rays == 0 ? 0 : families;
  for (long f = 0; f < out.families; ++f) {
    const int size = 1 + static_cast<int>(rng() % 5);
    Vector sx = Vector::Zero(Z.dim());
    Vector so = Vector::Zero(Z.dim());
    double den = 0.0;
    for (int j = 0; j < size; ++j) {
      const auto idx = static_cast<Eigen::Index>(rng() % rays);
      const double a = gaussian(rng);
      sx += a * table->from.col(idx);
      so += a * table->to.col(idx);
      den += std::abs(a);
    }
    if (den == 0.0) continue;
    out.worst_family_defect =
        std::max(out.worst_family_defect, std::abs(norm_eval(Z, so) - norm_eval(Z, sx)) / den);
  }
  out.within_bound = out.worst_family_defect <= 14.0 * sigma;
  return OmegaResult{out, coupling};
}

}  // namespace gapkit

#endif  // GAPKIT_COUPLINGS_HPP
