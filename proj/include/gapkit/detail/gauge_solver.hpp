#ifndef GAPKIT_DETAIL_GAUGE_SOLVER_HPP
#define GAPKIT_DETAIL_GAUGE_SOLVER_HPP

// Coordinate descent for the atomic gauge program
//
//     min_{l >= 0}  |u - A l|_X + w |v - B l|_Y + sigma * sum(l).
//
// Dual bracket: the minimum equals
//
//     max <f, u> + <g, v>  over |f|_X* <= 1, |g|_Y* <= w,
//                          <f, a_i> + <g, b_i> <= sigma for every atom,
//
// which lives in dimension dim X + dim Y and is bracketed by an ellipsoid
// method with feasibility cuts.
//
// Included from spaces.hpp; not a standalone header.

#include <array>

namespace gapkit::detail {

namespace gauge {

struct State {
  const GaugeNode* g;
  double y_weight;
  Vector lambda;
  Vector rx;
  Vector ry;
  double lambda_sum = 0.0;
};

inline double objective(const State& s, const Vector& rx, const Vector& ry, double lsum) {
  double val = norm_eval(s.g->block_x, rx) + s.g->sigma * lsum;
  if (s.y_weight != 0.0) val += s.y_weight * norm_eval(s.g->block_y, ry);
  return val;
}

inline double current(const State& s) { return objective(s, s.rx, s.ry, s.lambda_sum); }

/// Value after changing lambda_i by t.
inline double along(const State& s, Eigen::Index i, double t, Vector& rx, Vector& ry) {
  rx = s.rx - t * s.g->atoms_x.col(i);
  if (s.y_weight != 0.0) ry = s.ry - t * s.g->atoms_y.col(i);
  return objective(s, rx, ry, s.lambda_sum + t);
}

inline void apply(State& s, Eigen::Index i, double t) {
  s.lambda[i] += t;
  s.rx -= t * s.g->atoms_x.col(i);
  if (s.y_weight != 0.0) s.ry -= t * s.g->atoms_y.col(i);
  s.lambda_sum += t;
}

/// Minimizes the convex function t -> value(lambda + t e_i) over [lo, hi].
inline double line_search(const State& s, Eigen::Index i, double lo, double hi) {
  Vector rx, ry;
  constexpr double inv_phi = 0.6180339887498948482;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = along(s, i, c, rx, ry);
  double fd = along(s, i, d, rx, ry);
  const double width = std::max(std::abs(lo), std::abs(hi));
  for (int it = 0; it < 200 && (b - a) > 1e-13 * std::max(width, 1e-300); ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = along(s, i, c, rx, ry);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = along(s, i, d, rx, ry);
    }
  }
  // The endpoints are the likely minimizers at kinks and bounds; compare them.
  double best_t = fc <= fd ? c : d;
  double best_f = std::min(fc, fd);
  for (double t : {lo, hi, 0.5 * (a + b)}) {
    const double f = along(s, i, t, rx, ry);
    if (f < best_f) {
      best_f = f;
      best_t = t;
    }
  }
  const double f0 = along(s, i, 0.0, rx, ry);
  return best_f < f0 ? best_t : 0.0;
}

/// Directional derivatives of the objective along +e_i (all atoms) and -e_i.
/// A zero residual contributes its worst-case slope |atom|, which is the exact
/// one-sided derivative.
inline void slopes(const State& s, Vector& up, Vector& down) {
  const GaugeNode& g = *s.g;
  const Eigen::Index n = g.atoms_x.cols();
  Vector gx, gy;
  const bool zx = s.rx.cwiseAbs().maxCoeff() == 0.0;
  const bool zy = s.y_weight == 0.0 || s.ry.cwiseAbs().maxCoeff() == 0.0;
  if (!zx) norm_subgradient(g.block_x, s.rx, gx);
  if (!zy) norm_subgradient(g.block_y, s.ry, gy);
  up.resize(n);
  down.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double u = g.sigma;
    double d = -g.sigma;
    if (zx) {
      const double a = norm_eval(g.block_x, g.atoms_x.col(i));
      u += a;
      d += a;
    } else {
      const double a = gx.dot(g.atoms_x.col(i));
      u -= a;
      d += a;
    }
    if (s.y_weight != 0.0) {
      if (zy) {
        const double b = s.y_weight * norm_eval(g.block_y, g.atoms_y.col(i));
        u += b;
        d += b;
      } else {
        const double b = s.y_weight * gy.dot(g.atoms_y.col(i));
        u -= b;
        d += b;
      }
    }
    up[i] = u;
    down[i] = d;
  }
}

inline bool descend(State& s, int max_iterations) {
  Vector up, down;
  const Eigen::Index n = s.g->atoms_x.cols();
  for (int it = 0; it < max_iterations; ++it) {
    slopes(s, up, down);
    Eigen::Index best = -1;
    bool increase = true;
    double best_slope = -1e-10;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (up[i] < best_slope) {
        best_slope = up[i];
        best = i;
        increase = true;
      }
      if (s.lambda[i] > 0.0 && down[i] < best_slope) {
        best_slope = down[i];
        best = i;
        increase = false;
      }
    }
    if (best < 0) return true;
    double t;
    if (increase) {
      // Beyond t = value / sigma the penalty alone exceeds the current value.
      t = line_search(s, best, 0.0, current(s) / s.g->sigma);
    } else {
      t = line_search(s, best, -s.lambda[best], 0.0);
    }
    if (t == 0.0) {
      // No progress along the steepest coordinate: stationary to line-search
      // precision.
      return true;
    }
    apply(s, best, t);
    if (s.lambda[best] < 1e-12 * std::max(1.0, s.lambda_sum)) apply(s, best, -s.lambda[best]);
  }
  return false;
}

inline bool smooth_at(const State& s) {
  auto smooth_space = [](const Space& sp) {
    if (sp.kind() == SpaceKind::lp) {
      const auto& n = std::get<LpNode>(sp.node().v);
      return !n.p.is_one() && !n.p.is_infinite();
    }
    return false;
  };
  const bool x_ok = smooth_space(s.g->block_x) && s.rx.cwiseAbs().minCoeff() > 0.0;
  const bool y_ok = s.y_weight == 0.0 ||
                    (smooth_space(s.g->block_y) && s.ry.cwiseAbs().minCoeff() > 0.0);
  return x_ok && y_ok;
}

struct DualBound {
  double lower = 0.0;
  double upper = 0.0;
  bool converged = true;
};

inline DualBound dual_bound(const GaugeNode& g, const Vector& u, const Vector& v, double w) {
  const Eigen::Index dx = g.block_x.dim();
  const Eigen::Index dy = w != 0.0 ? g.block_y.dim() : 0;
  const double scale = norm_eval(g.block_x, u) + (dy > 0 ? w * norm_eval(g.block_y, v) : 0.0);
  DualBound out;
  if (scale == 0.0) return out;
  Vector obj(dx + dy);
  obj.head(dx) = u / scale;
  if (dy > 0) obj.tail(dy) = v / scale;
  Matrix AB(dx + dy, g.atoms_x.cols());
  AB.topRows(dx) = g.atoms_x;
  if (dy > 0) AB.bottomRows(dy) = g.atoms_y;

  Vector grad, scores;
  const convex::Separation sep = [&](const Vector& z, Vector& cut) {
    const Vector f = z.head(dx);
    if (dual_norm_subgradient(g.block_x, f, grad) > 1.0) {
      cut.setZero();
      cut.head(dx) = grad;
      return false;
    }
    if (dy > 0) {
      const Vector h = z.tail(dy);
      if (dual_norm_subgradient(g.block_y, h, grad) > w) {
        cut.setZero();
        cut.tail(dy) = grad;
        return false;
      }
    }
    if (AB.cols() == 0) return true;
    scores.noalias() = AB.transpose() * z;
    Eigen::Index i;
    if (scores.maxCoeff(&i) > g.sigma) {
      cut = AB.col(i);
      return false;
    }
    return true;
  };
  const double rx = 1.0 / equivalence(Space::dual(g.block_x)).lo;
  const double ry = dy > 0 ? w / equivalence(Space::dual(g.block_y)).lo : 0.0;
  const convex::LinearResult r = convex::ellipsoid_maximize_linear(
      obj, sep, Vector::Zero(dx + dy), std::sqrt(rx * rx + ry * ry) * 1.01 + 1e-12,
      convex::Options{1e-9, 20000});
  out.lower = std::max(0.0, r.lower) * scale;
  out.upper = r.upper * scale;
  // Long runs stall near 1e-9 from rounding; 1e-8 is still a certified bracket.
  out.converged = r.converged || r.upper - r.lower <= 1e-8 * std::max(1.0, r.lower);
  return out;
}

}  // namespace gauge

inline GaugeSolution gauge_solve(const GaugeNode& g, const Vector& u, const Vector& v,
                                 double y_weight) {
  constexpr int max_iterations = 10000;
  const Eigen::Index n = g.atoms_x.cols();
  auto fresh = [&]() {
    gauge::State s{&g, y_weight, Vector::Zero(n), u, v, 0.0};
    return s;
  };
  GaugeSolution out;
  gauge::State s = fresh();
  gauge::descend(s, max_iterations);
  double best = gauge::current(s);
  gauge::State best_state = s;

  // Coordinate descent can stall at kinks of the residual norms.  Restart from
  // fixed pseudo-random supports; all restarts are deterministic.
  if (n > 0 && !gauge::smooth_at(s)) {
    Rng rng(0x6a09e667f3bcc908ULL ^ static_cast<std::uint64_t>(n));
    for (int r = 0; r < 3; ++r) {
      gauge::State t = fresh();
      for (int k = 0; k < 3; ++k) {
        const auto i = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
        const double step = gauge::line_search(t, i, 0.0, gauge::current(t) / g.sigma);
        if (step > 0.0) gauge::apply(t, i, step);
      }
      gauge::descend(t, max_iterations);
      const double val = gauge::current(t);
      if (val < best) {
        best = val;
        best_state = t;
      }
    }
  }
  const gauge::DualBound dual = gauge::dual_bound(g, u, v, y_weight);
  // Rounding in long ellipsoid runs can push the upper bound slightly below
  // the feasible dual value; the feasible value is never exceeded downward.
  out.lower = dual.lower;
  out.value = std::max(dual.lower, std::min(best, dual.upper));
  // Converged when [dual lower, best upper] is a certified bracket of width
  // at most 1e-8 relative, the same tolerance the dual bracket uses.
  const double upper = std::min(best, dual.upper);
  out.converged = dual.converged || upper - dual.lower <= 1e-8 * std::max(1.0, dual.lower);
  out.lambda = best_state.lambda;
  out.residual_x = best_state.rx;
  out.residual_y = y_weight != 0.0 ? best_state.ry : Vector::Zero(v.size());
  return out;
}

}  // namespace gapkit::detail

#endif  // GAPKIT_DETAIL_GAUGE_SOLVER_HPP
