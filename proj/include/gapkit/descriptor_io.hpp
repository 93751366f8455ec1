#ifndef GAPKIT_DESCRIPTOR_IO_HPP
#define GAPKIT_DESCRIPTOR_IO_HPP

// Text forms of spaces, subspace bases, couplings, witness families and
// stored gauges.
//
// Space grammar (whitespace around tokens is ignored):
//
//   space := "lp:" n ":" p                     lp:4:2, lp:4:inf
//          | "wlp:" p "[" w ("," w)* "]"       weighted l_p
//          | "qlr:" n ":" r                    quasi-normed l_r, 0 < r < 1
//          | "block:" p "[" space ("," space)* "]"
//          | "quot(" space ";" path ")"        path names a basis CSV of the kernel
//          | "dual(" space ")"
//
// Basis CSV: one basis vector per column under the header b1,b2,...; lines
// starting with '#' are comments.  Relative paths resolve against the
// directory given to the parser.
//
// Coupling grammar: identity | zero | scale:c | mazur:p:q
//                 | quotlift(space;E.csv;F.csv;theta)
// identity, zero and scale need a space; mazur needs a dimension.

#include "gapkit/znorm.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gapkit::io {

inline constexpr const char* kCsvVersion = "# gapkit-csv 1";
inline constexpr const char* kGaugeVersion = "# gapkit-gauge 1";

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

inline double parse_real(const std::string& s, const std::string& what) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) throw InputError(what + ": not a number: '" + s + "'");
  return v;
}

inline long long parse_integer(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) throw InputError(what + ": not an integer: '" + s + "'");
  return v;
}

inline Exponent parse_exponent(const std::string& s, const std::string& what) {
  const double v = parse_real(s, what);
  return std::isinf(v) ? Exponent::infinity() : Exponent(v);
}

class SpaceParser {
 public:
  SpaceParser(std::string_view text, std::filesystem::path base) : text_(text), base_(std::move(base)) {}

  Space parse_all() {
    Space s = parse();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters");
    return s;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw InputError("space descriptor '" + std::string(text_) + "': " + why + " at offset " +
                     std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(std::string_view lit) {
    skip_ws();
    if (text_.substr(pos_, lit.size()) == lit) {
      pos_ += lit.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view lit) {
    if (!accept(lit)) fail("expected '" + std::string(lit) + "'");
  }

  // A run of characters up to one of the delimiters.
  std::string token(std::string_view delims) {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && delims.find(text_[pos_]) == std::string_view::npos) ++pos_;
    const std::string t = trim(text_.substr(start, pos_ - start));
    if (t.empty()) fail("empty field");
    return t;
  }

  Space parse() {
    if (accept("lp:")) {
      const auto n = parse_integer(token(":"), "lp dimension");
      expect(":");
      return Space::lp(n, parse_exponent(token(",;)]"), "lp exponent"));
    }
    if (accept("wlp:")) {
      const Exponent p = parse_exponent(token("["), "wlp exponent");
      expect("[");
      std::vector<double> w;
      do {
        w.push_back(parse_real(token(",]"), "wlp weight"));
      } while (accept(","));
      expect("]");
      return Space::weighted_lp(p, Eigen::Map<Vector>(w.data(), static_cast<Eigen::Index>(w.size())));
    }
    if (accept("qlr:")) {
      const auto n = parse_integer(token(":"), "qlr dimension");
      expect(":");
      return Space::quasi_lr(n, parse_real(token(",;)]"), "qlr exponent"));
    }
    if (accept("block:")) {
      const Exponent p = parse_exponent(token("["), "block exponent");
      expect("[");
      std::vector<Space> blocks;
      do {
        blocks.push_back(parse());
      } while (accept(","));
      expect("]");
      return Space::block_sum(p, std::move(blocks));
    }
    if (accept("quot(")) {
      Space parent = parse();
      expect(";");
      const std::string path = token(")");
      expect(")");
      return Space::quotient(parent, read_subspace(parent, path));
    }
    if (accept("dual(")) {
      Space inner = parse();
      expect(")");
      return Space::dual(inner);
    }
    fail("unknown space");
  }

  Subspace read_subspace(const Space& parent, const std::string& path);

  std::string_view text_;
  std::filesystem::path base_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& path) {
  const std::filesystem::path p(path);
  return p.is_absolute() || base.empty() ? p : base / p;
}

/// Columns of a basis CSV.  Errors name the file.
inline Matrix read_basis_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError(file.string() + ": cannot open");
  std::string line;
  std::size_t cols = 0;
  std::vector<std::vector<double>> rows;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::vector<std::string> fields = detail::split(t, ',');
    if (cols == 0) {
      for (std::size_t j = 0; j < fields.size(); ++j) {
        if (fields[j] != "b" + std::to_string(j + 1)) {
          throw InputError(file.string() + ": header must be b1,b2,...");
        }
      }
      cols = fields.size();
      continue;
    }
    if (fields.size() != cols) {
      throw InputError(file.string() + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(cols) + " fields");
    }
    std::vector<double> row;
    for (const std::string& f : fields) {
      row.push_back(detail::parse_real(f, file.string() + ":" + std::to_string(lineno)));
    }
    rows.push_back(std::move(row));
  }
  if (cols == 0 || rows.empty()) throw InputError(file.string() + ": no basis vectors");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  if (!m.allFinite()) throw InputError(file.string() + ": non-finite entry");
  return m;
}

inline void write_basis_csv(std::ostream& out, const Matrix& basis) {
  for (Eigen::Index j = 0; j < basis.cols(); ++j) out << (j ? "," : "") << "b" << j + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < basis.rows(); ++i) {
    for (Eigen::Index j = 0; j < basis.cols(); ++j) out << (j ? "," : "") << format_real(basis(i, j));
    out << '\n';
  }
}

inline void write_basis_csv(const std::filesystem::path& file, const Matrix& basis) {
  std::ofstream out(file);
  if (!out) throw InputError(file.string() + ": cannot write");
  write_basis_csv(out, basis);
}

/// Subspace of `parent` spanned by the columns of a basis CSV; `path` is kept
/// as the subspace's source.
inline Subspace load_subspace(const Space& parent, const std::string& path,
                              const std::filesystem::path& base = {}) {
  const std::filesystem::path file = resolve(base, path);
  const Matrix b = read_basis_csv(file);
  try {
    Subspace s(parent, b);
    s.set_source(path);
    return s;
  } catch (const InputError& e) {
    throw InputError(file.string() + ": " + e.what());
  }
}

inline Subspace detail::SpaceParser::read_subspace(const Space& parent, const std::string& path) {
  return load_subspace(parent, path, base_);
}

inline Space parse_space(std::string_view text, const std::filesystem::path& base = {}) {
  return detail::SpaceParser(text, base).parse_all();
}

/// Inverse of parse_space.  Quotients need a kernel with a recorded source.
inline std::string format_space(const Space& s) {
  const auto& node = s.node().v;
  switch (s.kind()) {
    case SpaceKind::lp: {
      const auto& n = std::get<gapkit::detail::LpNode>(node);
      return "lp:" + std::to_string(n.dim) + ":" + n.p.to_string();
    }
    case SpaceKind::weighted_lp: {
      const auto& n = std::get<gapkit::detail::WeightedLpNode>(node);
      std::string out = "wlp:" + n.p.to_string() + "[";
      for (Eigen::Index i = 0; i < n.weights.size(); ++i) out += (i ? "," : "") + format_real(n.weights[i]);
      return out + "]";
    }
    case SpaceKind::quasi_lr: {
      const auto& n = std::get<gapkit::detail::QuasiLrNode>(node);
      return "qlr:" + std::to_string(n.dim) + ":" + format_real(n.r);
    }
    case SpaceKind::block_sum: {
      const auto& n = std::get<gapkit::detail::BlockSumNode>(node);
      std::string out = "block:" + n.outer.to_string() + "[";
      for (std::size_t i = 0; i < n.blocks.size(); ++i) out += (i ? "," : "") + format_space(n.blocks[i]);
      return out + "]";
    }
    case SpaceKind::quotient: {
      const auto& n = std::get<gapkit::detail::QuotientNode>(node);
      if (n.kernel.source().empty()) throw InputError("format_space: quotient kernel has no file");
      return "quot(" + format_space(n.parent) + ";" + n.kernel.source() + ")";
    }
    case SpaceKind::dual:
      return "dual(" + format_space(std::get<gapkit::detail::DualNode>(node).inner) + ")";
    case SpaceKind::atomic_gauge:
      break;
  }
  throw InputError("format_space: gauge spaces are stored with write_gauge");
}

// ---------------------------------------------------------------------------
// Couplings.

struct CouplingContext {
  std::optional<Space> space;
  Eigen::Index dim = 0;
  std::filesystem::path base;
};

inline Coupling parse_coupling(const std::string& text, const CouplingContext& ctx) {
  const std::string t = detail::trim(text);
  auto need_space = [&](const char* what) -> const Space& {
    if (!ctx.space) throw InputError(std::string("coupling '") + what + "' needs a space");
    return *ctx.space;
  };
  if (t == "identity") return identity_coupling(need_space("identity"));
  if (t == "zero") return zero_coupling(need_space("zero"), need_space("zero"));
  if (t.rfind("scale:", 0) == 0) {
    return scale_coupling(need_space("scale"), detail::parse_real(detail::trim(t.substr(6)), "scale factor"));
  }
  if (t.rfind("mazur:", 0) == 0) {
    const std::vector<std::string> f = detail::split(t.substr(6), ':');
    if (f.size() != 2) throw InputError("coupling '" + t + "': expected mazur:p:q");
    const Eigen::Index n = ctx.dim > 0 ? ctx.dim : ctx.space ? ctx.space->dim() : 0;
    if (n < 1) throw InputError("coupling '" + t + "' needs a dimension");
    return mazur_coupling(n, detail::parse_real(f[0], "mazur p"), detail::parse_real(f[1], "mazur q"));
  }
  if (t.rfind("quotlift(", 0) == 0 && t.back() == ')') {
    const std::string inner = t.substr(9, t.size() - 10);
    const std::size_t c3 = inner.rfind(';');
    const std::size_t c2 = c3 == std::string::npos ? c3 : inner.rfind(';', c3 - 1);
    const std::size_t c1 = c2 == std::string::npos || c2 == 0 ? std::string::npos : inner.rfind(';', c2 - 1);
    if (c1 == std::string::npos) throw InputError("coupling '" + t + "': expected quotlift(Z;E;F;theta)");
    const Space Z = parse_space(inner.substr(0, c1), ctx.base);
    const Subspace E = load_subspace(Z, detail::trim(inner.substr(c1 + 1, c2 - c1 - 1)), ctx.base);
    const Subspace F = load_subspace(Z, detail::trim(inner.substr(c2 + 1, c3 - c2 - 1)), ctx.base);
    return quotient_coupling(Z, E, F, detail::parse_real(detail::trim(inner.substr(c3 + 1)), "quotlift theta"));
  }
  throw InputError("unknown coupling '" + t + "'");
}

// ---------------------------------------------------------------------------
// Witness families: one row per coordinate.

inline void write_witness_csv(std::ostream& out, const DefectEstimate& e) {
  out << kCsvVersion << '\n'
      << "# kind=" << to_string(e.kind) << " r=" << format_real(e.r) << " value=" << format_real(e.value)
      << " budget=" << e.budget << " samples=" << e.samples << " seed=" << e.seed << '\n'
      << "vector,side,coord,value\n";
  for (std::size_t k = 0; k < e.witness.size(); ++k) {
    const Vector& v = e.witness.vectors[k];
    const char* side = e.witness.sides[k] == Side::x ? "x" : "y";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      out << k << ',' << side << ',' << i << ',' << format_real(v[i]) << '\n';
    }
  }
}

inline Family read_witness_csv(std::istream& in) {
  Family f;
  std::string line;
  bool header = false;
  std::vector<double> cur;
  long cur_index = -1;
  Side cur_side = Side::x;
  auto flush = [&] {
    if (cur_index >= 0) f.push(Eigen::Map<Vector>(cur.data(), static_cast<Eigen::Index>(cur.size())), cur_side);
    cur.clear();
  };
  while (std::getline(in, line)) {
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!header) {
      if (t != "vector,side,coord,value") throw InputError("witness CSV: bad header");
      header = true;
      continue;
    }
    const std::vector<std::string> fld = detail::split(t, ',');
    if (fld.size() != 4 || (fld[1] != "x" && fld[1] != "y")) throw InputError("witness CSV: bad row '" + t + "'");
    const long idx = static_cast<long>(detail::parse_integer(fld[0], "witness vector"));
    if (idx != cur_index) {
      flush();
      cur_index = idx;
      cur_side = fld[1] == "x" ? Side::x : Side::y;
    }
    cur.push_back(detail::parse_real(fld[3], "witness value"));
  }
  flush();
  return f;
}

// ---------------------------------------------------------------------------
// Stored gauges: a header of key=value comment lines followed by a CSV with
// one row per atom (role atom) or test direction (roles test_x, test_y).

struct GaugeHeader {
  std::string coupling;
  std::string domain;
  std::string codomain;
  double sigma = 0.0;
};

inline void write_gauge(std::ostream& out, const ZNorm& z, const std::string& coupling) {
  const auto& g = gapkit::detail::gauge_node(z);
  const Eigen::Index dx = g.block_x.dim(), dy = g.block_y.dim();
  out << kGaugeVersion << '\n'
      << "# coupling=" << coupling << '\n'
      << "# domain=" << format_space(z.coupling.domain) << '\n'
      << "# codomain=" << format_space(z.coupling.codomain) << '\n'
      << "# dims=" << dx << ',' << dy << '\n'
      << "# sigma=" << format_real(z.sigma) << '\n'
      << "# tests=" << z.tests_x.cols() << ',' << z.tests_y.cols() << '\n'
      << "# atoms=" << g.atoms_x.cols() << '\n'
      << "role";
  for (Eigen::Index i = 0; i < dx; ++i) out << ",x" << i + 1;
  for (Eigen::Index i = 0; i < dy; ++i) out << ",y" << i + 1;
  out << '\n';
  auto row = [&](const char* role, const Vector& a, const Vector& b) {
    out << role;
    for (Eigen::Index i = 0; i < dx; ++i) out << ',' << format_real(a[i]);
    for (Eigen::Index i = 0; i < dy; ++i) out << ',' << format_real(b[i]);
    out << '\n';
  };
  for (Eigen::Index j = 0; j < g.atoms_x.cols(); ++j) row("atom", g.atoms_x.col(j), g.atoms_y.col(j));
  for (Eigen::Index j = 0; j < z.tests_x.cols(); ++j) row("test_x", z.tests_x.col(j), Vector::Zero(dy));
  for (Eigen::Index j = 0; j < z.tests_y.cols(); ++j) row("test_y", Vector::Zero(dx), z.tests_y.col(j));
}

inline ZNorm read_gauge(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError(file.string() + ": cannot open");
  const std::string where = file.string();
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kGaugeVersion) {
    throw InputError(where + ": not a gauge file");
  }
  GaugeHeader h;
  Eigen::Index dx = 0, dy = 0;
  std::vector<Vector> ax, ay, tx, ty;
  bool have_columns = false;
  while (std::getline(in, line)) {
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const std::size_t eq = t.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = detail::trim(t.substr(1, eq - 1));
      const std::string val = detail::trim(t.substr(eq + 1));
      if (key == "coupling") h.coupling = val;
      if (key == "domain") h.domain = val;
      if (key == "codomain") h.codomain = val;
      if (key == "sigma") h.sigma = detail::parse_real(val, where + ": sigma");
      if (key == "dims") {
        const auto d = detail::split(val, ',');
        if (d.size() != 2) throw InputError(where + ": dims must be dx,dy");
        dx = detail::parse_integer(d[0], where + ": dims");
        dy = detail::parse_integer(d[1], where + ": dims");
      }
      continue;
    }
    const std::vector<std::string> f = detail::split(t, ',');
    if (!have_columns) {
      if (f.empty() || f[0] != "role" || static_cast<Eigen::Index>(f.size()) != 1 + dx + dy) {
        throw InputError(where + ": column header does not match dims");
      }
      have_columns = true;
      continue;
    }
    if (static_cast<Eigen::Index>(f.size()) != 1 + dx + dy) throw InputError(where + ": short row");
    Vector a(dx), b(dy);
    for (Eigen::Index i = 0; i < dx; ++i) a[i] = detail::parse_real(f[static_cast<std::size_t>(1 + i)], where);
    for (Eigen::Index i = 0; i < dy; ++i) b[i] = detail::parse_real(f[static_cast<std::size_t>(1 + dx + i)], where);
    if (f[0] == "atom") {
      ax.push_back(a);
      ay.push_back(b);
    } else if (f[0] == "test_x") {
      tx.push_back(a);
    } else if (f[0] == "test_y") {
      ty.push_back(b);
    } else {
      throw InputError(where + ": unknown role '" + f[0] + "'");
    }
  }
  if (ax.empty()) throw InputError(where + ": no atoms");
  const std::filesystem::path base = file.parent_path();
  CouplingContext ctx{parse_space(h.domain, base), dx, base};
  Coupling c = parse_coupling(h.coupling, ctx);
  if (c.domain.dim() != dx || c.codomain.dim() != dy) throw InputError(where + ": coupling does not match dims");
  auto columns = [](const std::vector<Vector>& v, Eigen::Index rows) {
    Matrix m(rows, static_cast<Eigen::Index>(v.size()));
    for (std::size_t j = 0; j < v.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = v[j];
    return m;
  };
  return znorm_from_atoms(c, h.sigma, columns(ax, dx), columns(ay, dy), columns(tx, dx), columns(ty, dy));
}

}  // namespace gapkit::io

#endif  // GAPKIT_DESCRIPTOR_IO_HPP
