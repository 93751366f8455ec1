#ifndef GAPKIT_NETS_HPP
#define GAPKIT_NETS_HPP

// Greedy separated sets and covering nets on unit spheres and balls.

#include "gapkit/spaces.hpp"

#include <optional>
#include <vector>

namespace gapkit {

enum class NetKind { separated, covering };
enum class NetTarget { sphere, ball };

/// The unit sphere or ball of a space, or of a subspace with the restricted
/// norm.  Points are in ambient coordinates.
class Region {
 public:
  explicit Region(Space space) : space_(std::move(space)) {}
  explicit Region(Subspace sub) : space_(sub.parent()), sub_(std::move(sub)) {}

  const Space& space() const { return space_; }
  Eigen::Index dim() const { return sub_ ? sub_->dim() : space_.dim(); }
  Eigen::Index ambient_dim() const { return space_.dim(); }
  double distance(const Vector& a, const Vector& b) const { return norm_eval(space_, a - b); }

  /// Euclidean-Gaussian direction, normalized in the target norm; for the ball
  /// the radius is U^{1/d}.
  Vector sample(Rng& rng, NetTarget target) const {
    Vector v;
    do {
      const Vector g = gaussian_vector(rng, dim());
      v = sub_ ? Vector(sub_->basis() * g) : g;
    } while (v.cwiseAbs().maxCoeff() == 0.0);
    v /= norm_eval(space_, v);
    if (target == NetTarget::ball) v *= std::pow(uniform01(rng), 1.0 / static_cast<double>(dim()));
    return v;
  }

 private:
  Space space_;
  std::optional<Subspace> sub_;
};

struct NetReport {
  std::vector<Vector> points;
  double radius = 0.0;
  NetKind kind = NetKind::separated;
  NetTarget target = NetTarget::sphere;
  std::uint64_t seed = 0;
  /// Post-hoc check of the defining property passed.
  bool verified = false;
  /// Covering only: the first fresh batch found gaps and the net was enlarged.
  bool retried = false;
  /// Largest separation shortfall or covering excess seen in verification.
  double worst_violation = 0.0;

  std::size_t size() const { return points.size(); }
};

namespace detail {

inline double distance_to_set(const Region& r, const std::vector<Vector>& pts, const Vector& x,
                              double stop_below) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vector& p : pts) {
    best = std::min(best, r.distance(p, x));
    if (best <= stop_below) break;
  }
  return best;
}

constexpr long long kMaxCandidates = 20'000'000;
constexpr int kCoverageBatch = 10'000;

}  // namespace detail

/// Pairwise distances all exceed the radius.
inline bool verify_separation(const Region& r, const std::vector<Vector>& pts, double radius,
                              double* worst = nullptr) {
  double w = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      w = std::max(w, radius - r.distance(pts[i], pts[j]));
    }
  }
  if (worst) *worst = std::max(w, 0.0);
  return pts.size() < 2 || w < 0.0;
}

/// Every point of a fresh batch lies within the radius of the net.  Returns
/// the uncovered points.
inline std::vector<Vector> uncovered_points(const Region& r, const std::vector<Vector>& pts,
                                            double radius, NetTarget target, std::uint64_t seed,
                                            double* worst = nullptr) {
  Rng rng(seed);
  std::vector<Vector> missed;
  double w = 0.0;
  for (int k = 0; k < detail::kCoverageBatch; ++k) {
    const Vector x = r.sample(rng, target);
    const double d = detail::distance_to_set(r, pts, x, radius);
    if (d > radius) {
      missed.push_back(x);
      w = std::max(w, d - radius);
    }
  }
  if (worst) *worst = w;
  return missed;
}

/// Greedy radius-separated set: accept a candidate iff it is farther than
/// `radius` from every accepted point; stop after `candidate_budget`
/// consecutive rejections.
inline NetReport greedy_separated(const Region& region, double radius, NetTarget target,
                                  long long candidate_budget, std::uint64_t seed) {
  if (!(radius > 0.0 && radius <= 2.0)) throw InputError("greedy_separated: radius must lie in (0, 2]");
  if (candidate_budget < 1) throw InputError("greedy_separated: candidate budget must be positive");
  NetReport out;
  out.radius = radius;
  out.kind = NetKind::separated;
  out.target = target;
  out.seed = seed;
  Rng rng(derive_seed(seed, 1));
  long long rejections = 0;
  for (long long drawn = 0; drawn < detail::kMaxCandidates && rejections < candidate_budget;
       ++drawn) {
    const Vector x = region.sample(rng, target);
    if (detail::distance_to_set(region, out.points, x, radius) > radius) {
      out.points.push_back(x);
      rejections = 0;
    } else {
      ++rejections;
    }
  }
  out.verified = verify_separation(region, out.points, radius, &out.worst_violation);
  return out;
}

/// Greedy covering net: add every drawn target point not within `radius` of
/// the net; stop after `candidate_budget` consecutive covered draws.  Coverage
/// is then re-checked on fresh points; on failure the missed points are added
/// and the check is repeated once on another fresh batch.
inline NetReport greedy_net(const Region& region, double radius, NetTarget target,
                            long long candidate_budget, std::uint64_t seed) {
  if (!(radius > 0.0 && radius <= 2.0)) throw InputError("greedy_net: radius must lie in (0, 2]");
  if (candidate_budget < 1) throw InputError("greedy_net: candidate budget must be positive");
  NetReport out;
  out.radius = radius;
  out.kind = NetKind::covering;
  out.target = target;
  out.seed = seed;
  Rng rng(derive_seed(seed, 1));
  long long covered = 0;
  for (long long drawn = 0; drawn < detail::kMaxCandidates && covered < candidate_budget; ++drawn) {
    const Vector x = region.sample(rng, target);
    if (detail::distance_to_set(region, out.points, x, radius) > radius) {
      out.points.push_back(x);
      covered = 0;
    } else {
      ++covered;
    }
  }
  std::vector<Vector> missed =
      uncovered_points(region, out.points, radius, target, derive_seed(seed, 2),
                       &out.worst_violation);
  if (missed.empty()) {
    out.verified = true;
    return out;
  }
  out.retried = true;
  for (const Vector& x : missed) {
    if (detail::distance_to_set(region, out.points, x, radius) > radius) out.points.push_back(x);
  }
  missed = uncovered_points(region, out.points, radius, target, derive_seed(seed, 3),
                            &out.worst_violation);
  out.verified = missed.empty();
  return out;
}

}  // namespace gapkit

#endif  // GAPKIT_NETS_HPP
