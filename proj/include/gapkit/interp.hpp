#ifndef GAPKIT_INTERP_HPP
#define GAPKIT_INTERP_HPP

// Closed forms from complex interpolation: the conformal map of the strip
// 0 < Re z < 1 onto the unit disk, the pseudo-hyperbolic distance on the strip,
// and the resulting distance bounds between l_p spaces.
//
// Upper bound convention: the couple (l_1, l_inf) interpolated at theta = 1/p
// gives l_p, and the Mazur map l_p -> l_q is the interpolation coupling between
// the parameters 1/p and 1/q.  The bound is 2 h(1/p, 1/q).
//
// The lower estimate is sometimes written (2^{1/p} - 2^{1/q}) / 2; that is the
// same number as 2^{1/p-1} - 2^{1/q-1}.

#include "gapkit/core.hpp"

#include <complex>
#include <numbers>
#include <vector>

namespace gapkit::interp {

using Complex = std::complex<double>;

struct StripPoint {
  double re;
  double im = 0.0;
};

inline void require_strip(const StripPoint& z, const char* what) {
  if (!(z.re > 0.0 && z.re < 1.0) || !std::isfinite(z.im)) {
    throw InputError(std::string(what) + ": point outside the open strip 0 < Re z < 1");
  }
}

namespace detail {

/// sin(a + ib) / cosh(b), which stays finite for large |b|.
inline Complex scaled_sin(double a, double b) {
  return {std::sin(a), std::cos(a) * std::tanh(b)};
}

}  // namespace detail

/// phi(z) = sin(pi (z - theta) / 2) / sin(pi (z + theta) / 2); phi(theta) = 0.
inline Complex conformal_strip_to_disk(double theta, const StripPoint& z) {
  if (!(theta > 0.0 && theta < 1.0)) throw InputError("conformal map: theta must lie in (0, 1)");
  require_strip(z, "conformal map");
  constexpr double half_pi = std::numbers::pi / 2.0;
  // Numerator and denominator share the imaginary part, so the cosh factors cancel.
  const double b = half_pi * z.im;
  return detail::scaled_sin(half_pi * (z.re - theta), b) /
         detail::scaled_sin(half_pi * (z.re + theta), b);
}

/// Pseudo-hyperbolic distance on the strip, pulled back from the disk through
/// the map centered at 1/2.
inline double pseudo_hyperbolic_strip(const StripPoint& xi, const StripPoint& eta) {
  require_strip(xi, "pseudo-hyperbolic distance");
  require_strip(eta, "pseudo-hyperbolic distance");
  const Complex w1 = conformal_strip_to_disk(0.5, xi);
  const Complex w2 = conformal_strip_to_disk(0.5, eta);
  const double num = std::abs(w2 - w1);
  if (num == 0.0) return 0.0;
  return num / std::abs(1.0 - std::conj(w1) * w2);
}

/// 2 sin(pi |1/p - 1/q| / 2) / sin(pi (1/p + 1/q) / 2) for 1 < p, q < inf.
inline double kadets_upper_lp(double p, double q) {
  if (!(p > 1.0) || !(q > 1.0) || !std::isfinite(p) || !std::isfinite(q)) {
    throw InputError("kadets upper bound: requires 1 < p, q < inf");
  }
  constexpr double half_pi = std::numbers::pi / 2.0;
  const double a = 1.0 / p;
  const double b = 1.0 / q;
  return 2.0 * std::sin(half_pi * std::abs(a - b)) / std::sin(half_pi * (a + b));
}

struct LowerBound {
  double value;
  bool swapped;
};

/// 2^{1/p-1} - 2^{1/q-1} for p <= q; arguments given in the other order are
/// swapped and reported.
inline LowerBound kadets_lower_lp(Exponent p, Exponent q) {
  for (const Exponent& e : {p, q}) {
    if (!e.is_infinite() && !(e.value() >= 1.0)) throw InputError("kadets lower bound: p >= 1");
  }
  bool swapped = false;
  if (p.reciprocal() < q.reciprocal()) {
    std::swap(p, q);
    swapped = true;
  }
  return {std::exp2(p.reciprocal() - 1.0) - std::exp2(q.reciprocal() - 1.0), swapped};
}

/// 2 (2^p - 2): the ball-map distortion bound for the Mazur map l_p -> l_1.
inline double gh_upper_l1_lp(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw InputError("gh upper bound: p >= 1");
  return 2.0 * (std::exp2(p) - 2.0);
}

struct ScalarCheck {
  double worst_slack = std::numeric_limits<double>::infinity();
  double worst_a = 0.0;
  double worst_b = 0.0;
  long long violations = 0;
  long long points = 0;
};

/// Exhaustive grid check of
///   | |a-b|^p - |sgn(a)|a|^p - sgn(b)|b|^p| |  <=  (2^{p-1} - 1)(|a|^p + |b|^p)
/// on [-1, 1]^2.  Slack is rhs - lhs; a violation is slack < -1e-12.
inline ScalarCheck mazur_scalar_defect_check(double p, double grid_step) {
  if (!(p > 1.0)) throw InputError("mazur scalar check: p must exceed 1");
  if (!(grid_step > 0.0 && grid_step <= 1e-2)) {
    throw InputError("mazur scalar check: grid step must lie in (0, 1e-2]");
  }
  const long long n = static_cast<long long>(std::llround(2.0 / grid_step));
  const double c = std::exp2(p - 1.0) - 1.0;
  ScalarCheck out;
  std::vector<double> grid(static_cast<std::size_t>(n + 1));
  std::vector<double> pw(grid.size());
  for (long long i = 0; i <= n; ++i) {
    grid[static_cast<std::size_t>(i)] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n);
    pw[static_cast<std::size_t>(i)] = std::pow(std::abs(grid[static_cast<std::size_t>(i)]), p);
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double a = grid[i];
    const double sa = a > 0.0 ? pw[i] : -pw[i];
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double b = grid[j];
      const double sb = b > 0.0 ? pw[j] : -pw[j];
      const double lhs = std::abs(std::pow(std::abs(a - b), p) - std::abs(sa - sb));
      const double slack = c * (pw[i] + pw[j]) - lhs;
      ++out.points;
      if (slack < -1e-12) ++out.violations;
      if (slack < out.worst_slack) {
        out.worst_slack = slack;
        out.worst_a = a;
        out.worst_b = b;
      }
    }
  }
  return out;
}

}  // namespace gapkit::interp

#endif  // GAPKIT_INTERP_HPP
