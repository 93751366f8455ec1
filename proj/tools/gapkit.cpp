// gapkit command-line front end.
//
// Exit codes: 0 success, 1 usage or input error, 2 numerical non-convergence,
// 3 a checked bound was violated.

#include "gapkit/gapkit.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace gapkit;
namespace ex = gapkit::experiments;

namespace {

constexpr int kOk = 0;
constexpr int kInput = 1;
constexpr int kNumerical = 2;
constexpr int kViolation = 3;

constexpr const char* kDefaultGrid = "1.25,1.5,2,3,4";

void emit(const RunConfig& cfg, const std::string& text) {
  if (!cfg.output) {
    std::cout << text;
    return;
  }
  std::ofstream out(*cfg.output);
  if (!out) throw InputError(*cfg.output + ": cannot write");
  out << text;
}

template <class T>
const T& need(const std::optional<T>& v, const char* flag) {
  if (!v) throw InputError(std::string("missing required option --") + flag);
  return *v;
}

std::string yes_no(bool b) { return b ? "1" : "0"; }

Coupling coupling_from(const RunConfig& cfg) {
  io::CouplingContext ctx;
  if (cfg.space) ctx.space = io::parse_space(*cfg.space);
  ctx.dim = cfg.dim.value_or(0);
  return io::parse_coupling(need(cfg.coupling, "coupling"), ctx);
}

// ---------------------------------------------------------------------------

int cmd_gap(const RunConfig& cfg) {
  const std::string& amb = need(cfg.ambient, "ambient");
  const Space ambient = io::parse_space(amb);
  const Subspace E = io::load_subspace(ambient, need(cfg.e_path, "E"));
  const Subspace F = io::load_subspace(ambient, need(cfg.f_path, "F"));
  const double delta = cfg.delta.value_or(0.05);
  GapOptions opt;
  opt.seed = cfg.seed.value_or(0);
  const GapBracket b = gap(ambient, E, F, delta, static_cast<int>(cfg.budget.value_or(8)), opt);
  ex::Csv t{{"ambient", "dimE", "dimF", "lower", "upper", "delta", "seed", "lower_method", "upper_method",
             "converged", "cap_hit"},
            {{amb, std::to_string(E.dim()), std::to_string(F.dim()), format_real(b.lower), format_real(b.upper),
              format_real(delta), std::to_string(opt.seed), to_string(b.lower_method), to_string(b.upper_method),
              yes_no(b.converged), yes_no(b.cap_hit)}}};
  emit(cfg, t.str());
  return b.converged && !b.cap_hit && !b.clamp_violation ? kOk : kNumerical;
}

int cmd_bounds(const RunConfig& cfg) {
  emit(cfg, ex::bounds_table(ex::parse_grid(cfg.p_grid.value_or(kDefaultGrid)),
                             ex::parse_grid(cfg.q_grid.value_or(cfg.p_grid.value_or(kDefaultGrid))))
                .str());
  return kOk;
}

int cmd_sweep(const RunConfig& cfg) {
  ex::SweepOptions opt;
  opt.dim = cfg.dim.value_or(opt.dim);
  opt.budget = static_cast<int>(cfg.budget.value_or(opt.budget));
  opt.samples = static_cast<long>(cfg.samples.value_or(opt.samples));
  opt.seed = cfg.seed.value_or(opt.seed);
  const std::vector<ex::SweepCell> cells = ex::mazur_sweep(ex::parse_grid(cfg.p_grid.value_or(kDefaultGrid)),
                                                           ex::parse_grid(cfg.q_grid.value_or(cfg.p_grid.value_or(kDefaultGrid))), opt);
  emit(cfg, ex::sweep_table(cells).str());
  int code = kOk;
  for (const ex::SweepCell& c : cells) {
    if (!c.ok()) {
      std::cerr << "bound violated at p=" << ex::grid_label(c.p) << " q=" << ex::grid_label(c.q) << '\n';
      code = kViolation;
    }
  }
  return code;
}

int cmd_estimate(const RunConfig& cfg) {
  const Coupling c = coupling_from(cfg);
  const std::string kind = cfg.kind.value_or("delta");
  const int budget = static_cast<int>(cfg.budget.value_or(4));
  const long samples = static_cast<long>(cfg.samples.value_or(256));
  const std::uint64_t seed = cfg.seed.value_or(0);
  DefectEstimate e;
  if (kind == "delta") {
    e = delta_estimate(c, budget, samples, seed);
  } else if (kind == "delta_r") {
    e = delta_r_estimate(c, need(cfg.r, "r"), budget, samples, seed);
  } else if (kind == "d_small") {
    e = d_small_estimate(c, samples, seed);
  } else {
    throw InputError("unknown kind '" + kind + "' (delta, delta_r, d_small)");
  }
  ex::Csv t{{"coupling", "kind", "r", "budget", "samples", "seed", "value"},
            {{*cfg.coupling, to_string(e.kind), format_real(e.r), std::to_string(e.budget),
              std::to_string(e.samples), std::to_string(e.seed), format_real(e.value)}}};
  emit(cfg, t.str());
  if (cfg.witness) {
    std::ofstream w(*cfg.witness);
    if (!w) throw InputError(*cfg.witness + ": cannot write");
    io::write_witness_csv(w, e);
  }
  return kOk;
}

double default_sigma(const Coupling& c) {
  if (const auto* m = std::get_if<recipe::Mazur>(&c.phi.v)) {
    if (m->p_from > 1.0 && m->p_to > 1.0) return interp::kadets_upper_lp(m->p_from, m->p_to);
  }
  throw InputError("--sigma is required for this coupling");
}

int cmd_znorm(const RunConfig& cfg) {
  const std::uint64_t seed = cfg.seed.value_or(0);
  std::optional<ZNorm> built;
  if (cfg.load) {
    built = io::read_gauge(*cfg.load);
  } else {
    RunConfig c2 = cfg;
    if (!c2.coupling) c2.coupling = "mazur:1.5:2";
    if (!c2.dim && !c2.space) c2.dim = 4;
    const Coupling c = coupling_from(c2);
    const double sigma = cfg.sigma ? *cfg.sigma : default_sigma(c);
    const long tests = static_cast<long>(cfg.tests.value_or(100));
    Rng rng(derive_seed(seed, 0x7e));
    Matrix tx(c.domain.dim(), tests / 2), ty(c.codomain.dim(), tests - tests / 2);
    for (Eigen::Index j = 0; j < tx.cols(); ++j) tx.col(j) = gaussian_vector(rng, tx.rows());
    for (Eigen::Index j = 0; j < ty.cols(); ++j) ty.col(j) = gaussian_vector(rng, ty.rows());
    built = build_znorm(c, sigma, static_cast<long>(cfg.atoms.value_or(2000)), seed, tx, ty);
    if (cfg.save) {
      std::ofstream out(*cfg.save);
      if (!out) throw InputError(*cfg.save + ": cannot write");
      io::write_gauge(out, *built, *c2.coupling);
    }
  }
  const ZNorm& z = *built;
  const Space& X = z.coupling.domain;
  const Space& Y = z.coupling.codomain;
  double ex_ = 0.0, ey = 0.0;
  bool converged = true;
  const long points = static_cast<long>(cfg.samples.value_or(100));
  for (long i = 0; i < points; ++i) {
    Rng rng(derive_seed(seed, 0x7f, static_cast<std::uint64_t>(i)));
    const Vector u = gaussian_vector(rng, X.dim());
    const Vector v = gaussian_vector(rng, Y.dim());
    const ZValue zu = znorm_eval(z, u, Vector::Zero(Y.dim()));
    const ZValue zv = znorm_eval(z, Vector::Zero(X.dim()), v);
    ex_ = std::max(ex_, std::abs(zu.value - norm_eval(X, u)) / norm_eval(X, u));
    ey = std::max(ey, std::abs(zv.value - norm_eval(Y, v)) / norm_eval(Y, v));
    converged = converged && zu.converged && zv.converged;
  }
  const EmbeddedGapReport g = verify_embedded_gap(z);
  converged = converged && g.converged;
  ex::Csv t{{"quantity", "value"},
            {{"atoms", std::to_string(z.atom_count)},
             {"sigma", format_real(z.sigma)},
             {"block_x_relative_error", format_real(ex_)},
             {"block_y_relative_error", format_real(ey)},
             {"embedded_tests", std::to_string(g.tests)},
             {"embedded_gap_worst_slack", format_real(g.worst_slack)},
             {"converged", yes_no(converged)}}};
  emit(cfg, t.str());
  if (!converged) return kNumerical;
  return ex_ <= 1e-4 && ey <= 1e-4 && g.passed ? kOk : kViolation;
}

int cmd_quotient(const RunConfig& cfg) {
  const std::string amb = cfg.ambient.value_or("lp:6:1");
  const Space Z = io::parse_space(amb);
  const Subspace E = io::load_subspace(Z, need(cfg.e_path, "E"));
  const Subspace F = io::load_subspace(Z, need(cfg.f_path, "F"));
  const double theta = cfg.theta.value_or(1.01);
  const std::uint64_t seed = cfg.seed.value_or(0);
  GapOptions opt;
  opt.seed = seed;
  const GapBracket g = gap(Z, E, F, cfg.delta.value_or(0.02), 4, opt);
  const DefectEstimate d = delta_estimate(quotient_coupling(Z, E, F, theta), static_cast<int>(cfg.budget.value_or(3)),
                                          static_cast<long>(cfg.samples.value_or(384)), seed);
  const double bound = 2.0 * g.upper + (1.0 - 1.0 / (theta * theta));
  const bool within = d.value <= bound + 1e-6;
  ex::Csv t{{"ambient", "dimE", "dimF", "theta", "gap_upper", "delta_sampled", "bound", "within", "seed"},
            {{amb, std::to_string(E.dim()), std::to_string(F.dim()), format_real(theta), format_real(g.upper),
              format_real(d.value), format_real(bound), yes_no(within), std::to_string(seed)}}};
  emit(cfg, t.str());
  if (!g.converged) return kNumerical;
  return within ? kOk : kViolation;
}

int cmd_omega(const RunConfig& cfg) {
  const std::string& amb = need(cfg.ambient, "ambient");
  const Space Z = io::parse_space(amb);
  const Subspace X = io::load_subspace(Z, need(cfg.x_path, "X"));
  const Subspace Y = io::load_subspace(Z, need(cfg.y_path, "Y"));
  const double sigma = cfg.sigma.value_or(0.05);
  const std::uint64_t seed = cfg.seed.value_or(0);
  const OmegaResult o = build_omega(Z, X, Y, sigma, static_cast<long>(cfg.rays.value_or(600)), seed,
                                    static_cast<long>(cfg.families.value_or(2000)));
  ex::Csv t{{"ambient", "rays", "centers", "sigma", "worst_family_defect", "bound", "within", "seed"},
            {{amb, std::to_string(o.table->from.cols()), std::to_string(o.centers_x.size()), format_real(sigma),
              format_real(o.worst_family_defect), format_real(14.0 * sigma), yes_no(o.within_bound),
              std::to_string(seed)}}};
  emit(cfg, t.str());
  return o.within_bound ? kOk : kViolation;
}

int cmd_nets(const RunConfig& cfg) {
  const std::string amb = cfg.space.value_or("lp:2:2");
  const Region region(io::parse_space(amb));
  const std::string kind = cfg.kind.value_or("separated");
  const std::string target = cfg.target.value_or("ball");
  if (target != "ball" && target != "sphere") throw InputError("--target must be ball or sphere");
  const NetTarget tg = target == "ball" ? NetTarget::ball : NetTarget::sphere;
  const double radius = cfg.radius.value_or(0.5);
  const long long budget = cfg.budget.value_or(10000);
  const std::uint64_t seed = cfg.seed.value_or(0);
  NetReport r;
  if (kind == "separated") {
    r = greedy_separated(region, radius, tg, budget, seed);
  } else if (kind == "covering") {
    r = greedy_net(region, radius, tg, budget, seed);
  } else {
    throw InputError("--kind must be separated or covering");
  }
  ex::Csv t{{"space", "kind", "target", "radius", "size", "verified", "retried", "worst_violation", "seed"},
            {{amb, kind, target, format_real(radius), std::to_string(r.size()), yes_no(r.verified),
              yes_no(r.retried), format_real(r.worst_violation), std::to_string(seed)}}};
  emit(cfg, t.str());
  if (cfg.save) {
    Matrix pts(region.ambient_dim(), static_cast<Eigen::Index>(r.size()));
    for (std::size_t j = 0; j < r.size(); ++j) pts.col(static_cast<Eigen::Index>(j)) = r.points[j];
    io::write_basis_csv(std::filesystem::path(*cfg.save), pts);
  }
  return r.verified ? kOk : kNumerical;
}

int cmd_verify(const RunConfig& cfg) {
  const std::string& name = need(cfg.suite, "suite");
  const auto& all = ex::suites();
  const auto it = all.find(name);
  if (it == all.end()) {
    std::ostringstream msg;
    msg << "unknown suite '" << name << "'; available:";
    for (const auto& [k, v] : all) msg << ' ' << k;
    throw InputError(msg.str());
  }
  ex::SuiteParams sp;
  sp.p = cfg.p;
  if (cfg.trials) sp.trials = static_cast<long>(*cfg.trials);
  sp.seed = cfg.seed.value_or(1);
  const ex::SuiteResult r = it->second(sp);
  emit(cfg, r.table().str());
  return r.passed() ? kOk : kViolation;
}

// ---------------------------------------------------------------------------

struct Command {
  CLI::App* app;
  int (*run)(const RunConfig&);
};

int run(int argc, char** argv) {
  CLI::App app{"gapkit: gaps between subspaces, twisted sums and coupling defects"};
  app.require_subcommand(1);
  RunConfig flags;
  std::optional<std::string> config_path;
  std::vector<Command> commands;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", config_path, "JSON run config; its values override flags");
    s->add_option("--seed", flags.seed, "64-bit seed");
    s->add_option("-o,--output", flags.output, "Write CSV here instead of stdout");
  };
  auto add = [&](const char* name, const char* help, int (*fn)(const RunConfig&)) {
    CLI::App* s = app.add_subcommand(name, help);
    common(s);
    commands.push_back({s, fn});
    return s;
  };

  CLI::App* g = add("gap", "Certified bracket for the gap between two subspaces", cmd_gap);
  g->add_option("--ambient", flags.ambient, "Ambient space descriptor, e.g. lp:4:2");
  g->add_option("--E", flags.e_path, "Basis CSV of E");
  g->add_option("--F", flags.f_path, "Basis CSV of F");
  g->add_option("--delta", flags.delta, "Net resolution (default 0.05)");
  g->add_option("--budget", flags.budget, "Multistart count (default 8)");

  CLI::App* b = add("bounds", "Closed-form bounds on an exponent grid", cmd_bounds);
  b->add_option("--p-grid", flags.p_grid, std::string("Comma-separated p values (default ") + kDefaultGrid + ")");
  b->add_option("--q-grid", flags.q_grid, "Comma-separated q values (default as p)");

  CLI::App* w = add("sweep", "Sampled Mazur defects against the closed forms", cmd_sweep);
  w->add_option("--p-grid", flags.p_grid, std::string("Comma-separated p values (default ") + kDefaultGrid + ")");
  w->add_option("--q-grid", flags.q_grid, "Comma-separated q values (default as p)");
  w->add_option("--dim", flags.dim, "Dimension (default 8)");
  w->add_option("--budget", flags.budget, "Family size budget (default 5)");
  w->add_option("--samples", flags.samples, "Sampled families per cell (default 2000)");

  CLI::App* e = add("estimate", "Sampled lower bound on a coupling defect", cmd_estimate);
  e->add_option("--coupling", flags.coupling, "identity | zero | scale:c | mazur:p:q | quotlift(Z;E.csv;F.csv;theta)");
  e->add_option("--space", flags.space, "Space for identity, zero and scale");
  e->add_option("--dim", flags.dim, "Dimension for mazur");
  e->add_option("--kind", flags.kind, "delta | delta_r | d_small (default delta)");
  e->add_option("--r", flags.r, "Exponent for delta_r");
  e->add_option("--budget", flags.budget, "Family size budget (default 4)");
  e->add_option("--samples", flags.samples, "Sampled families (default 256)");
  e->add_option("--witness", flags.witness, "Write the witness family as CSV");

  CLI::App* z = add("znorm", "Build or load a twisted-sum gauge and check it", cmd_znorm);
  z->add_option("--coupling", flags.coupling, "Coupling (default mazur:1.5:2)");
  z->add_option("--space", flags.space, "Space for identity, zero and scale");
  z->add_option("--dim", flags.dim, "Dimension for mazur (default 4)");
  z->add_option("--sigma", flags.sigma, "Gauge constant (default: interpolation bound for mazur)");
  z->add_option("--atoms", flags.atoms, "Atom count (default 2000)");
  z->add_option("--tests", flags.tests, "Test directions among the atoms (default 100)");
  z->add_option("--samples", flags.samples, "Random points for the block checks (default 100)");
  z->add_option("--save", flags.save, "Write the gauge to this file");
  z->add_option("--load", flags.load, "Read a gauge file instead of building one");

  CLI::App* q = add("quotient", "Quotient coupling defect against the gap budget", cmd_quotient);
  q->add_option("--ambient", flags.ambient, "Ambient space (default lp:6:1)");
  q->add_option("--E", flags.e_path, "Basis CSV of E");
  q->add_option("--F", flags.f_path, "Basis CSV of F");
  q->add_option("--theta", flags.theta, "Lift constant (default 1.01)");
  q->add_option("--delta", flags.delta, "Gap net resolution (default 0.02)");
  q->add_option("--budget", flags.budget, "Family size budget (default 3)");
  q->add_option("--samples", flags.samples, "Sampled families (default 384)");

  CLI::App* o = add("omega", "Ray-matching coupling between nearby subspaces", cmd_omega);
  o->add_option("--ambient", flags.ambient, "Ambient space descriptor");
  o->add_option("--X", flags.x_path, "Basis CSV of X");
  o->add_option("--Y", flags.y_path, "Basis CSV of Y");
  o->add_option("--sigma", flags.sigma, "Matching scale (default 0.05)");
  o->add_option("--rays", flags.rays, "Sampled rays per sphere (default 600)");
  o->add_option("--families", flags.families, "Random families in the post-check (default 2000)");

  CLI::App* n = add("nets", "Greedy separated sets and covering nets", cmd_nets);
  n->add_option("--space", flags.space, "Space descriptor (default lp:2:2)");
  n->add_option("--kind", flags.kind, "separated | covering (default separated)");
  n->add_option("--target", flags.target, "ball | sphere (default ball)");
  n->add_option("--radius", flags.radius, "Radius in (0, 2] (default 0.5)");
  n->add_option("--budget", flags.budget, "Consecutive-rejection stop (default 10000)");
  n->add_option("--save", flags.save, "Write the points as CSV columns");

  CLI::App* v = add("verify", "Run a named verification suite", cmd_verify);
  v->add_option("suite", flags.suite, "Suite name");
  v->add_option("--p", flags.p, "Restrict to one exponent");
  v->add_option("--trials", flags.trials, "Trials, instances, pairs or seeds, per suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kInput;
  }

  for (const Command& c : commands) {
    if (!c.app->parsed()) continue;
    RunConfig cfg = flags;
    cfg.command = c.app->get_name();
    if (config_path) {
      const RunConfig file = load_run_config(*config_path);
      if (!file.command.empty() && file.command != cfg.command) {
        throw InputError(*config_path + ": config is for '" + file.command + "', not '" + cfg.command + "'");
      }
      cfg.overlay(file);
    }
    return c.run(cfg);
  }
  return kInput;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const NumericalError& e) {
    std::cerr << "gapkit: " << e.what() << '\n';
    return kNumerical;
  } catch (const InputError& e) {
    std::cerr << "gapkit: " << e.what() << '\n';
    return kInput;
  } catch (const UnsupportedError& e) {
    std::cerr << "gapkit: " << e.what() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "gapkit: " << e.what() << '\n';
    return kInput;
  }
}
