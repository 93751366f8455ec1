#ifndef GAPKIT_EXPERIMENTS_HPP
#define GAPKIT_EXPERIMENTS_HPP

// Batch runs behind the CLI: bound grids, the Mazur sweep and the named
// verification suites.  Every result renders as versioned CSV; equal inputs
// give byte-identical output.

#include "gapkit/gap.hpp"
#include "gapkit/interp.hpp"
#include "gapkit/nets.hpp"
#include "gapkit/znorm.hpp"

#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gapkit::experiments {

/// Quotes a field containing a comma, quote or newline.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string str() const {
    std::ostringstream out;
    out << "# gapkit-csv 1\n";
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << csv_field(r[i]);
      out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out.str();
  }
};

inline std::string cell(std::optional<double> v) { return v ? format_real(*v) : std::string(); }

/// "1.25,1.5,2" -> {1.25, 1.5, 2}; "inf" allowed.
inline std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    if (item == "inf") {
      v = std::numeric_limits<double>::infinity();
      used = item.size();
    } else {
      try {
        v = std::stod(item, &used);
      } catch (const std::exception&) {
        used = 0;
      }
    }
    if (item.empty() || used != item.size()) throw InputError("grid: not a number: '" + item + "'");
    if (!(v >= 1.0)) throw InputError("grid: exponents must be >= 1");
    out.push_back(v);
  }
  if (out.empty()) throw InputError("grid: empty");
  return out;
}

inline std::string grid_label(double p) { return std::isinf(p) ? "inf" : format_real(p); }

inline std::optional<double> closed_upper(double p, double q) {
  if (p > 1.0 && q > 1.0 && std::isfinite(p) && std::isfinite(q)) return interp::kadets_upper_lp(p, q);
  return std::nullopt;
}

inline double closed_lower(double p, double q) {
  auto e = [](double x) { return std::isinf(x) ? Exponent::infinity() : Exponent(x); };
  return interp::kadets_lower_lp(e(p), e(q)).value;
}

/// Closed forms on the grid: p,q,upper,lower,gh_upper_if_p_le_2.
inline Csv bounds_table(const std::vector<double>& ps, const std::vector<double>& qs) {
  Csv t{{"p", "q", "upper", "lower", "gh_upper_if_p_le_2"}, {}};
  for (double p : ps) {
    for (double q : qs) {
      const std::optional<double> gh =
          p <= 2.0 ? std::optional<double>(interp::gh_upper_l1_lp(p)) : std::nullopt;
      t.rows.push_back({grid_label(p), grid_label(q), cell(closed_upper(p, q)),
                        format_real(closed_lower(p, q)), cell(gh)});
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Mazur sweep.

struct SweepOptions {
  Eigen::Index dim = 8;
  int budget = 5;
  long samples = 2000;
  std::uint64_t seed = 0;
};

struct SweepCell {
  double p = 2.0;
  double q = 2.0;
  std::optional<double> upper;
  double lower = 0.0;
  double delta = 0.0;
  double d_small = 0.0;
  PoolComparison pool;
  bool delta_ok = true;
  bool order_ok = true;

  bool ok() const { return delta_ok && order_ok && pool.subset_ok; }
};

inline std::vector<SweepCell> mazur_sweep(const std::vector<double>& ps, const std::vector<double>& qs,
                                          const SweepOptions& opt) {
  std::vector<SweepCell> out;
  std::uint64_t index = 0;
  for (double p : ps) {
    for (double q : qs) {
      if (std::isinf(p) || std::isinf(q)) throw InputError("sweep: Mazur maps need finite exponents");
      SweepCell c;
      c.p = p;
      c.q = q;
      c.upper = closed_upper(p, q);
      c.lower = closed_lower(p, q);
      const Coupling m = mazur_coupling(opt.dim, p, q);
      const std::uint64_t s = derive_seed(opt.seed, 0x5e, index++);
      c.delta = delta_estimate(m, opt.budget, opt.samples, s).value;
      c.d_small = d_small_estimate(m, opt.samples, s).value;
      c.pool = restricted_pool_check(m, (opt.samples + 5) / 6, s);
      if (c.upper) {
        c.delta_ok = c.delta <= *c.upper + 1e-6;
        c.order_ok = c.lower <= *c.upper;
      }
      out.push_back(std::move(c));
    }
  }
  return out;
}

inline Csv sweep_table(const std::vector<SweepCell>& cells) {
  Csv t{{"p", "q", "upper", "lower", "delta_sampled", "d_sampled", "pool_d", "pool_delta", "ok"}, {}};
  for (const SweepCell& c : cells) {
    t.rows.push_back({grid_label(c.p), grid_label(c.q), cell(c.upper), format_real(c.lower),
                      format_real(c.delta), format_real(c.d_small), format_real(c.pool.d_small),
                      format_real(c.pool.delta), c.ok() ? "1" : "0"});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Verification suites.

struct Check {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool pass = true;
};

struct SuiteParams {
  std::optional<double> p;
  std::optional<long> trials;
  std::uint64_t seed = 1;
};

struct SuiteResult {
  std::string suite;
  std::vector<Check> checks;

  bool passed() const {
    for (const Check& c : checks) {
      if (!c.pass) return false;
    }
    return !checks.empty();
  }

  Csv table() const {
    Csv t{{"suite", "check", "value", "bound", "pass"}, {}};
    for (const Check& c : checks) {
      t.rows.push_back({suite, c.name, format_real(c.value), format_real(c.bound), c.pass ? "1" : "0"});
    }
    return t;
  }
};

namespace detail {

inline Check at_most(std::string name, double value, double bound) {
  return {std::move(name), value, bound, value <= bound};
}

inline Check at_least(std::string name, double value, double bound) {
  return {std::move(name), value, bound, value >= bound};
}

inline std::string with_p(const char* name, double p) { return std::string(name) + " p=" + grid_label(p); }

inline Matrix random_basis(Rng& rng, Eigen::Index n, Eigen::Index k) {
  Matrix m(n, k);
  for (Eigen::Index j = 0; j < k; ++j) m.col(j) = gaussian_vector(rng, n);
  return m;
}

inline std::vector<double> ps_or(const SuiteParams& sp, std::vector<double> fallback) {
  return sp.p ? std::vector<double>{*sp.p} : fallback;
}

}  // namespace detail

/// Exhaustive grid (step 1e-3) for the Mazur scalar inequality.
inline SuiteResult mazur_scalar_suite(const SuiteParams& sp) {
  SuiteResult r{"mazur-scalar", {}};
  for (double p : detail::ps_or(sp, {1.1, 1.5, 2.0})) {
    const interp::ScalarCheck s = interp::mazur_scalar_defect_check(p, 1e-3);
    r.checks.push_back(detail::at_most(detail::with_p("violations", p), static_cast<double>(s.violations), 0.0));
    r.checks.push_back(detail::at_least(detail::with_p("worst_slack", p), s.worst_slack, -1e-12));
  }
  return r;
}

/// Ball-map defect of the Mazur maps l_p^16 <-> l_1^16 against 2(2^p - 2),
/// over `trials` pairs (default 10^4).
inline SuiteResult mazur_distortion_suite(const SuiteParams& sp) {
  SuiteResult r{"mazur-distortion", {}};
  const long pairs = sp.trials.value_or(10000);
  for (double p : detail::ps_or(sp, {1.1, 1.25, 1.5})) {
    const DefectEstimate e = d_small_estimate(mazur_coupling(16, p, 1.0), (pairs + 5) / 6, sp.seed);
    r.checks.push_back(detail::at_most(detail::with_p("d_small", p), e.value, interp::gh_upper_l1_lp(p) + 1e-9));
  }
  return r;
}

/// lower(Lambda(E^perp, F^perp)) <= 2 upper(Lambda(E, F)) + 1e-3 for random
/// subspace pairs of equal dimension 1..3 in l_p^5, F a random tilt of E.
inline SuiteResult dual_gap_suite(const SuiteParams& sp) {
  SuiteResult r{"dual-gap", {}};
  const long trials = sp.trials.value_or(50);
  for (double p : detail::ps_or(sp, {1.0, 2.0, 3.0})) {
    const Space s = Space::lp(5, std::isinf(p) ? Exponent::infinity() : Exponent(p));
    std::vector<double> excess(static_cast<std::size_t>(trials));
    std::vector<char> conv(excess.size());
    parallel_for(excess.size(), [&](std::size_t t) {
      Rng rng(derive_seed(sp.seed, 0xd6, t));
      const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng() % 3);
      const Matrix A = detail::random_basis(rng, 5, k);
      const double tilt = 0.02 + uniform01(rng);
      const Subspace E(s, A);
      const Subspace F(s, A + tilt * detail::random_basis(rng, 5, k));
      GapOptions opt;
      opt.seed = derive_seed(sp.seed, 0xd7, t);
      const DualGapReport d = dual_gap_check(s, E, F, 0.05, 3, opt);
      excess[t] = d.lhs_lower - 2.0 * d.rhs_upper;
      conv[t] = d.converged;
    });
    double worst = -std::numeric_limits<double>::infinity();
    long failures = 0;
    for (double e : excess) {
      worst = std::max(worst, e);
      if (e > 1e-3) ++failures;
    }
    r.checks.push_back(detail::at_most(detail::with_p("failures", p), static_cast<double>(failures), 0.0));
    r.checks.push_back(detail::at_most(detail::with_p("worst_excess", p), worst, 1e-3));
  }
  return r;
}

struct ZNormSuiteOptions {
  Eigen::Index dim = 4;
  double p = 1.5;
  double q = 2.0;
  long atoms = 2000;
  long tests = 100;
  long points = 100;
  long nested_points = 20;
};

/// Block isometry, embedded gap and atom monotonicity of the twisted norm of
/// the Mazur coupling l_p^n -> l_q^n with sigma the interpolation bound.
inline SuiteResult znorm_suite(const SuiteParams& sp, const ZNormSuiteOptions& o = {}) {
  SuiteResult r{"znorm", {}};
  const Coupling c = mazur_coupling(o.dim, o.p, o.q);
  const double sigma = interp::kadets_upper_lp(o.p, o.q);
  Rng trng(derive_seed(sp.seed, 0x7e));
  const Matrix tx = detail::random_basis(trng, o.dim, o.tests / 2);
  const Matrix ty = detail::random_basis(trng, o.dim, o.tests - o.tests / 2);
  const ZNorm z = build_znorm(c, sigma, o.atoms, sp.seed, tx, ty);

  const auto n = static_cast<std::size_t>(o.points);
  std::vector<double> dx(n), dy(n);
  std::vector<char> conv(n);
  parallel_for(n, [&](std::size_t i) {
    Rng rng(derive_seed(sp.seed, 0x7f, i));
    const Vector u = gaussian_vector(rng, o.dim);
    const Vector v = gaussian_vector(rng, o.dim);
    const ZValue zu = znorm_eval(z, u, Vector::Zero(o.dim));
    const ZValue zv = znorm_eval(z, Vector::Zero(o.dim), v);
    dx[i] = std::abs(zu.value - norm_eval(c.domain, u)) / norm_eval(c.domain, u);
    dy[i] = std::abs(zv.value - norm_eval(c.codomain, v)) / norm_eval(c.codomain, v);
    conv[i] = zu.converged && zv.converged;
  });
  r.checks.push_back(detail::at_most("block_x_relative_error", *std::max_element(dx.begin(), dx.end()), 1e-4));
  r.checks.push_back(detail::at_most("block_y_relative_error", *std::max_element(dy.begin(), dy.end()), 1e-4));

  const EmbeddedGapReport g = verify_embedded_gap(z);
  r.checks.push_back(detail::at_most("embedded_gap_worst_slack", g.worst_slack, 1e-6));

  const ZNorm half = build_znorm(c, sigma, o.tests + (o.atoms - o.tests) / 2, sp.seed, tx, ty);
  const auto m = static_cast<std::size_t>(o.nested_points);
  std::vector<double> excess(m);
  parallel_for(m, [&](std::size_t i) {
    Rng rng(derive_seed(sp.seed, 0x80, i));
    const Vector u = gaussian_vector(rng, o.dim);
    const Vector v = gaussian_vector(rng, o.dim);
    const double small = znorm_eval(half, u, v).value;
    excess[i] = (znorm_eval(z, u, v).value - small) / small;
  });
  r.checks.push_back(detail::at_most("nested_relative_excess", *std::max_element(excess.begin(), excess.end()), 1e-8));
  long unconverged = 0;
  for (char cv : conv) unconverged += cv ? 0 : 1;
  if (!g.converged) ++unconverged;
  r.checks.push_back(detail::at_most("unconverged_solves", static_cast<double>(unconverged), 0.0));
  return r;
}

struct QuotientSuiteOptions {
  Eigen::Index dim = 6;
  Eigen::Index sub_dim = 2;
  double theta = 1.01;
  int budget = 3;
  long samples = 384;
};

/// Sampled defect of the quotient coupling Z/E <-> Z/F, Z = l_1^n, against
/// 2 upper(Lambda(E, F)) + (1 - theta^{-2}).  F is E tilted by a random
/// amount so the instances range from near to far.
inline SuiteResult quotient_suite(const SuiteParams& sp, const QuotientSuiteOptions& o = {}) {
  SuiteResult r{"quotient-coupling", {}};
  const long instances = sp.trials.value_or(20);
  const Space Z = Space::lp(o.dim, Exponent(sp.p.value_or(1.0)));
  double worst = -std::numeric_limits<double>::infinity();
  long failures = 0;
  for (long t = 0; t < instances; ++t) {
    Rng rng(derive_seed(sp.seed, 0x91, static_cast<std::uint64_t>(t)));
    const Matrix A = detail::random_basis(rng, o.dim, o.sub_dim);
    const double tilt = 0.02 + 0.5 * uniform01(rng);
    const Matrix B = A + tilt * detail::random_basis(rng, o.dim, o.sub_dim);
    const Subspace E(Z, A), F(Z, B);
    GapOptions gopt;
    gopt.seed = derive_seed(sp.seed, 0x92, static_cast<std::uint64_t>(t));
    const GapBracket g = gap(Z, E, F, 0.02, 4, gopt);
    const Coupling c = quotient_coupling(Z, E, F, o.theta);
    const double d = delta_estimate(c, o.budget, o.samples, derive_seed(sp.seed, 0x93, static_cast<std::uint64_t>(t))).value;
    const double bound = 2.0 * g.upper + (1.0 - 1.0 / (o.theta * o.theta)) + 1e-6;
    worst = std::max(worst, d - bound);
    if (d > bound) ++failures;
  }
  r.checks.push_back(detail::at_most("failures", static_cast<double>(failures), 0.0));
  r.checks.push_back(detail::at_most("worst_excess", worst, 0.0));
  return r;
}

/// Separated sets and nets in the unit ball of l_2^d, d = 1, 2, 3, five seeds:
/// 1/2-separated sizes <= 5^d, 3/4-net sizes >= (4/3)^d, both verified.
inline SuiteResult covering_suite(const SuiteParams& sp) {
  SuiteResult r{"covering", {}};
  const long seeds = sp.trials.value_or(5);
  for (Eigen::Index d = 1; d <= 3; ++d) {
    const Region ball(Space::lp(d, Exponent(2.0)));
    const double dd = static_cast<double>(d);
    double max_sep = 0.0, min_net = std::numeric_limits<double>::infinity();
    long unverified = 0;
    for (long s = 0; s < seeds; ++s) {
      const std::uint64_t seed = derive_seed(sp.seed, 0xc0, static_cast<std::uint64_t>(s));
      const NetReport a = greedy_separated(ball, 0.5, NetTarget::ball, 10000, seed);
      const NetReport b = greedy_net(ball, 0.75, NetTarget::ball, 10000, seed);
      max_sep = std::max(max_sep, static_cast<double>(a.size()));
      min_net = std::min(min_net, static_cast<double>(b.size()));
      unverified += (a.verified ? 0 : 1) + (b.verified ? 0 : 1);
    }
    const std::string tag = " d=" + std::to_string(d);
    r.checks.push_back(detail::at_most("separated_size" + tag, max_sep, std::pow(5.0, dd)));
    r.checks.push_back(detail::at_least("net_size" + tag, min_net, std::pow(4.0 / 3.0, dd)));
    r.checks.push_back(detail::at_most("unverified" + tag, static_cast<double>(unverified), 0.0));
  }
  return r;
}

/// Identical-subspace control and tilted planes of l_2^3 and l_1^3 at gap at
/// most 0.02 with sigma = 0.05.
inline SuiteResult omega_suite(const SuiteParams& sp) {
  SuiteResult r{"omega", {}};
  const double sigma = 0.05;
  {
    Rng rng(derive_seed(sp.seed, 0xe0));
    const Space Z = Space::lp(3, Exponent(2.0));
    const Subspace X(Z, detail::random_basis(rng, 3, 2));
    const OmegaResult o = build_omega(Z, X, X, sigma, 400, sp.seed);
    r.checks.push_back(detail::at_most("identical_defect", o.worst_family_defect, 0.0));
  }
  for (double p : {2.0, 1.0}) {
    const Space Z = Space::lp(3, Exponent(p));
    const double angle = 0.005;
    Matrix bx(3, 2), by(3, 2);
    bx << 1, 0, 0, 1, 0, 0;
    by << 1, 0, 0, std::cos(angle), 0, std::sin(angle);
    const Subspace X(Z, bx), Y(Z, by);
    const GapBracket g = gap(Z, X, Y, 0.002, 4);
    r.checks.push_back(detail::at_most(detail::with_p("gap_upper", p), g.upper, 0.02));
    const OmegaResult o = build_omega(Z, X, Y, sigma, 600, sp.seed);
    r.checks.push_back(detail::at_most(detail::with_p("worst_family_defect", p), o.worst_family_defect, 14.0 * sigma));
  }
  return r;
}

using SuiteFn = std::function<SuiteResult(const SuiteParams&)>;

inline const std::map<std::string, SuiteFn>& suites() {
  static const std::map<std::string, SuiteFn> all = {
      {"covering", covering_suite},
      {"dual-gap", dual_gap_suite},
      {"mazur-distortion", mazur_distortion_suite},
      {"mazur-scalar", mazur_scalar_suite},
      {"omega", omega_suite},
      {"quotient-coupling", [](const SuiteParams& sp) { return quotient_suite(sp); }},
      {"znorm", [](const SuiteParams& sp) { return znorm_suite(sp); }},
  };
  return all;
}

}  // namespace gapkit::experiments

#endif  // GAPKIT_EXPERIMENTS_HPP
