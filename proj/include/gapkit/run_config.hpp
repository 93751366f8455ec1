#ifndef GAPKIT_RUN_CONFIG_HPP
#define GAPKIT_RUN_CONFIG_HPP

// Parameters of one CLI run, stored as JSON.  Unset fields are omitted;
// non-finite reals are written as the strings "inf" / "-inf".

#include "gapkit/core.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

namespace gapkit {

struct RunConfig {
  std::string command;

  std::optional<std::string> ambient, space, coupling, e_path, f_path, x_path, y_path;
  std::optional<std::string> kind, target, suite, p_grid, q_grid, load, save, output, witness;
  std::optional<double> p, q, sigma, theta, delta, r, radius;
  std::optional<long long> dim, budget, samples, atoms, tests, rays, families, trials;
  std::optional<std::uint64_t> seed;

  bool operator==(const RunConfig&) const = default;

  template <class Self, class F>
  static void for_each_field(Self& c, F&& f) {
    f("ambient", c.ambient);
    f("space", c.space);
    f("coupling", c.coupling);
    f("E", c.e_path);
    f("F", c.f_path);
    f("X", c.x_path);
    f("Y", c.y_path);
    f("kind", c.kind);
    f("target", c.target);
    f("suite", c.suite);
    f("p_grid", c.p_grid);
    f("q_grid", c.q_grid);
    f("load", c.load);
    f("save", c.save);
    f("output", c.output);
    f("witness", c.witness);
    f("p", c.p);
    f("q", c.q);
    f("sigma", c.sigma);
    f("theta", c.theta);
    f("delta", c.delta);
    f("r", c.r);
    f("radius", c.radius);
    f("dim", c.dim);
    f("budget", c.budget);
    f("samples", c.samples);
    f("atoms", c.atoms);
    f("tests", c.tests);
    f("rays", c.rays);
    f("families", c.families);
    f("trials", c.trials);
    f("seed", c.seed);
  }

  /// Fields set in `o` replace those here; the command is kept unless `o` names one.
  void overlay(const RunConfig& o) {
    if (!o.command.empty()) command = o.command;
    auto copy = [](auto& dst, const auto& src) {
      if (src) dst = src;
    };
    copy(ambient, o.ambient), copy(space, o.space), copy(coupling, o.coupling);
    copy(e_path, o.e_path), copy(f_path, o.f_path), copy(x_path, o.x_path), copy(y_path, o.y_path);
    copy(kind, o.kind), copy(target, o.target), copy(suite, o.suite);
    copy(p_grid, o.p_grid), copy(q_grid, o.q_grid), copy(load, o.load), copy(save, o.save);
    copy(output, o.output), copy(witness, o.witness);
    copy(p, o.p), copy(q, o.q), copy(sigma, o.sigma), copy(theta, o.theta);
    copy(delta, o.delta), copy(r, o.r), copy(radius, o.radius);
    copy(dim, o.dim), copy(budget, o.budget), copy(samples, o.samples), copy(atoms, o.atoms);
    copy(tests, o.tests), copy(rays, o.rays), copy(families, o.families), copy(trials, o.trials);
    copy(seed, o.seed);
  }
};

namespace detail {

inline nlohmann::json real_to_json(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

inline double real_from_json(const nlohmann::json& j, const std::string& key) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw InputError("config: '" + key + "' must be a number");
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  if (!c.command.empty()) j["command"] = c.command;
  RunConfig::for_each_field(c, [&](const char* key, const auto& field) {
    if (!field) return;
    using T = typename std::decay_t<decltype(field)>::value_type;
    if constexpr (std::is_same_v<T, double>) {
      j[key] = detail::real_to_json(*field);
    } else {
      j[key] = *field;
    }
  });
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("config: expected a JSON object");
  RunConfig c;
  std::size_t known = 0;
  if (j.contains("command")) {
    if (!j["command"].is_string()) throw InputError("config: 'command' must be a string");
    c.command = j["command"].get<std::string>();
    ++known;
  }
  RunConfig::for_each_field(c, [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    ++known;
    const nlohmann::json& v = j[key];
    using T = typename std::decay_t<decltype(field)>::value_type;
    if constexpr (std::is_same_v<T, double>) {
      field = detail::real_from_json(v, key);
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw InputError(std::string("config: '") + key + "' must be a string");
      field = v.get<std::string>();
    } else {
      if (!v.is_number_integer()) throw InputError(std::string("config: '") + key + "' must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) {
          field = v.get<T>();
        } else if (v.get<long long>() >= 0) {
          field = static_cast<T>(v.get<long long>());
        } else {
          throw InputError(std::string("config: '") + key + "' must be nonnegative");
        }
      } else {
        field = v.get<T>();
      }
    }
  });
  if (known != j.size()) {
    for (const auto& [key, value] : j.items()) {
      bool found = key == "command";
      RunConfig::for_each_field(c, [&](const char* k, const auto&) { found = found || key == k; });
      if (!found) throw InputError("config: unknown key '" + key + "'");
    }
  }
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError(file.string() + ": cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(file.string() + ": " + e.what());
  }
  try {
    return run_config_from_json(j);
  } catch (const InputError& e) {
    throw InputError(file.string() + ": " + e.what());
  }
}

inline void save_run_config(const std::filesystem::path& file, const RunConfig& c) {
  std::ofstream out(file);
  if (!out) throw InputError(file.string() + ": cannot write");
  out << to_json(c).dump(2) << '\n';
}

}  // namespace gapkit

#endif  // GAPKIT_RUN_CONFIG_HPP
