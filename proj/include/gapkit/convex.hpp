#ifndef GAPKIT_CONVEX_HPP
#define GAPKIT_CONVEX_HPP

#include "gapkit/core.hpp"

#include <functional>

namespace gapkit::convex {

struct Options {
  double tolerance = 1e-8;   // absolute, scaled by max(1, |f|)
  int max_iterations = 5000;
};

struct Result {
  Vector argmin;
  double value = 0.0;
  double lower_bound = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

/// Convex objective with a subgradient oracle: returns f(y) and writes one
/// subgradient into `grad`.
using Oracle = std::function<double(const Vector& y, Vector& grad)>;

/// Central-cut ellipsoid method on R^k, starting from the Euclidean ball of
/// `radius` around `center`, which must contain a minimizer.
///
/// Each step certifies f* >= f(c) - sqrt(g^T P g) for the current ellipsoid
/// {c + P^{1/2} u : |u| <= 1}, so the returned gap value - lower_bound is a
/// certified suboptimality bound whenever the oracle is exact.  Dimensions here
/// are small (subspace dimensions), where the method converges geometrically.
inline Result ellipsoid_minimize(const Oracle& f, const Vector& center, double radius,
                                 const Options& opt = {}) {
  const Eigen::Index k = center.size();
  Result res;
  Vector c = center;
  Vector g(k);
  res.argmin = c;
  res.value = f(c, g);
  if (k == 0) {
    res.lower_bound = res.value;
    res.converged = true;
    return res;
  }
  Matrix P = Matrix::Identity(k, k) * (radius * radius);
  const double kd = static_cast<double>(k);

  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    const double fc = (it == 0) ? res.value : f(c, g);
    if (fc < res.value) {
      res.value = fc;
      res.argmin = c;
    }
    const Vector Pg = P * g;
    const double gPg = g.dot(Pg);
    if (!(gPg > 0.0)) {
      // Zero subgradient: c is a minimizer.
      res.lower_bound = fc;
      res.value = fc;
      res.argmin = c;
      res.converged = true;
      return res;
    }
    const double width = std::sqrt(gPg);
    res.lower_bound = std::max(res.lower_bound, fc - width);
    if (res.value - res.lower_bound <= opt.tolerance * std::max(1.0, std::abs(res.value))) {
      res.converged = true;
      return res;
    }
    if (k == 1) {
      // Interval bisection: keep the half where the minimizer lies.
      const double half = 0.5 * std::sqrt(P(0, 0));
      c[0] -= (g[0] > 0.0 ? 1.0 : -1.0) * half;
      P(0, 0) = half * half;
      continue;
    }
    const Vector step = Pg / width;
    c -= step / (kd + 1.0);
    P = (kd * kd / (kd * kd - 1.0)) * (P - (2.0 / (kd + 1.0)) * step * step.transpose());
    P = 0.5 * (P + P.transpose());
  }
  return res;
}

struct LinearResult {
  Vector argmax;
  /// Objective at the best feasible point found (a lower bound on the maximum).
  double lower = -std::numeric_limits<double>::infinity();
  /// Maximum of the objective over the final ellipsoid (an upper bound).
  double upper = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

/// Separation oracle for a convex set K: returns true if z lies in K, else
/// writes a nonzero `cut` with <cut, w - z> <= 0 for every w in K.
using Separation = std::function<bool(const Vector& z, Vector& cut)>;

/// Maximizes <objective, z> over K, starting from the Euclidean ball of
/// `radius` around `center`, which must contain K.  Feasible centers give
/// objective cuts, infeasible ones feasibility cuts; the ellipsoid always
/// contains the maximizers, which certifies the upper bound.
inline LinearResult ellipsoid_maximize_linear(const Vector& objective, const Separation& sep,
                                              const Vector& center, double radius,
                                              const Options& opt = {}) {
  const Eigen::Index k = center.size();
  LinearResult res;
  Vector c = center;
  Vector cut(k);
  res.argmax = c;
  if (k == 0) {
    res.lower = res.upper = 0.0;
    res.converged = sep(c, cut);
    return res;
  }
  Matrix P = Matrix::Identity(k, k) * (radius * radius);
  const double kd = static_cast<double>(k);
  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    const Vector Po = P * objective;
    const double span = std::sqrt(std::max(0.0, objective.dot(Po)));
    res.upper = std::min(res.upper, objective.dot(c) + span);
    Vector g;
    if (sep(c, cut)) {
      const double val = objective.dot(c);
      if (val > res.lower) {
        res.lower = val;
        res.argmax = c;
      }
      g = -objective;
    } else {
      g = cut;
    }
    if (res.upper - res.lower <= opt.tolerance * std::max(1.0, std::abs(res.lower))) {
      res.converged = true;
      return res;
    }
    const Vector Pg = P * g;
    const double gPg = g.dot(Pg);
    if (!(gPg > 0.0)) break;
    const double width = std::sqrt(gPg);
    if (k == 1) {
      const double half = 0.5 * std::sqrt(P(0, 0));
      c[0] -= (g[0] > 0.0 ? 1.0 : -1.0) * half;
      P(0, 0) = half * half;
      continue;
    }
    const Vector step = Pg / width;
    c -= step / (kd + 1.0);
    P = (kd * kd / (kd * kd - 1.0)) * (P - (2.0 / (kd + 1.0)) * step * step.transpose());
    P = 0.5 * (P + P.transpose());
  }
  return res;
}

}  // namespace gapkit::convex

#endif  // GAPKIT_CONVEX_HPP
