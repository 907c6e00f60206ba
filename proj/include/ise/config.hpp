#pragma once

// INI run configuration:
//
//   [system]    fixture = case1_stable
//               or n1, n2, m1, m2 and A, C1, C2, W, V, Sigma0, each either
//               inline rows "a, b; c, d" or a path to a row-major .csv file
//               (relative paths resolve against the config file's directory)
//   [delays]    lambda1, lambda2, grid1, grid2 (comma lists)
//   [sim]       steps, runs, seed
//   [analysis]  restarts, iterations, tolerance, divergence_factor,
//               bisect_tol, horizon
//
// Unknown sections or keys are rejected.

#include "ise/analysis.hpp"
#include "ise/csv.hpp"
#include "ise/model.hpp"
#include "ise/structured_norm.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace ise {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string fixture;  // empty when matrices are given explicitly
  SystemModel model;
  DelayModel delays{0.5, 0.5};
  std::vector<double> grid1{0.0, 0.5, 1.0};
  std::vector<double> grid2{0.0, 0.5, 1.0};
  std::size_t steps = 50;
  std::size_t runs = 1000;
  std::uint64_t seed = 1;
  NormSolverOptions solver;
  double divergence_factor = 1e12;
  double bisect_tol = 0.01;
  std::size_t horizon = 500;
};

namespace detail {

using boost::property_tree::ptree;

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"system", {"fixture", "n1", "n2", "m1", "m2", "A", "C1", "C2", "W", "V", "Sigma0"}},
      {"delays", {"lambda1", "lambda2", "grid1", "grid2"}},
      {"sim", {"steps", "runs", "seed"}},
      {"analysis", {"restarts", "iterations", "tolerance", "divergence_factor", "bisect_tol", "horizon"}},
  };
  return s;
}

inline std::string key_name(const std::string& section, const std::string& key) { return section + "." + key; }

inline double get_double(const ptree& sec, const std::string& section, const std::string& key, double def) {
  const auto v = sec.get_optional<std::string>(key);
  if (!v) return def;
  try {
    return parse_double(*v, key_name(section, key));
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
}

inline std::uint64_t get_uint(const ptree& sec, const std::string& section, const std::string& key,
                              std::uint64_t def) {
  const auto v = sec.get_optional<std::string>(key);
  if (!v) return def;
  std::uint64_t out = 0;
  const char* b = v->data();
  const char* e = b + v->size();
  auto res = std::from_chars(b, e, out);
  if (v->empty() || res.ec != std::errc() || res.ptr != e)
    throw ConfigError(key_name(section, key) + ": expected a non-negative integer, got '" + *v + "'");
  return out;
}

inline std::vector<double> get_list(const ptree& sec, const std::string& section, const std::string& key,
                                    const std::vector<double>& def) {
  const auto v = sec.get_optional<std::string>(key);
  if (!v) return def;
  try {
    const Matrix row = parse_matrix_rows(*v, ';', key_name(section, key));
    if (row.rows() != 1) throw ConfigError(key_name(section, key) + ": expected a single list");
    return std::vector<double>(row.data(), row.data() + row.size());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
}

inline Matrix get_matrix(const ptree& sec, const std::string& key, const std::filesystem::path& base) {
  const auto v = sec.get_optional<std::string>(key);
  if (!v) throw ConfigError("system." + key + ": missing");
  try {
    if (v->size() >= 4 && v->compare(v->size() - 4, 4, ".csv") == 0) {
      std::filesystem::path p(*v);
      if (p.is_relative()) p = base / p;
      return read_matrix_csv(p.string());
    }
    return parse_matrix_rows(*v, ';', "system." + key);
  } catch (const IoError& e) {
    throw ConfigError(std::string("system.") + key + ": " + e.what());
  }
}

inline void check_shape(const Matrix& M, Index r, Index c, const std::string& key) {
  if (M.rows() != r || M.cols() != c)
    throw ConfigError("system." + key + ": expected " + std::to_string(r) + "x" + std::to_string(c) + ", got " +
                      std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
}

inline std::string list_to_string(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
  return s;
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in, const std::filesystem::path& base = ".") {
  using detail::ptree;
  ptree pt;
  try {
    boost::property_tree::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  const auto& schema = detail::config_schema();
  for (const auto& [section, body] : pt) {
    const auto it = schema.find(section);
    if (it == schema.end()) {
      if (body.empty()) throw ConfigError("key '" + section + "' outside any section");
      throw ConfigError("unknown section [" + section + "]");
    }
    for (const auto& kv : body)
      if (!it->second.count(kv.first)) throw ConfigError("unknown key " + detail::key_name(section, kv.first));
  }
  const ptree empty;
  auto section = [&](const char* name) -> const ptree& {
    const auto c = pt.get_child_optional(name);
    return c ? *c : empty;
  };

  RunConfig cfg;
  const ptree& sys = section("system");
  const bool has_fixture = sys.count("fixture") > 0;
  bool has_explicit = false;
  for (const char* k : {"n1", "n2", "m1", "m2", "A", "C1", "C2", "W", "V", "Sigma0"})
    if (sys.count(k)) has_explicit = true;
  if (has_fixture == has_explicit)
    throw ConfigError("system: give exactly one of 'fixture' or the explicit model keys");

  if (has_fixture) {
    cfg.fixture = sys.get<std::string>("fixture");
    try {
      const Fixture fx = fixture(cfg.fixture);
      cfg.model = fx.model;
      cfg.delays = fx.delays;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("system.fixture: ") + e.what());
    }
  } else {
    SystemModel& m = cfg.model;
    for (const char* k : {"n1", "n2", "m1", "m2"}) {
      if (!sys.count(k)) throw ConfigError(std::string("system.") + k + ": missing");
      const auto v = detail::get_uint(sys, "system", k, 0);
      if (v == 0) throw ConfigError(std::string("system.") + k + ": must be positive");
    }
    m.n1 = static_cast<Index>(detail::get_uint(sys, "system", "n1", 0));
    m.n2 = static_cast<Index>(detail::get_uint(sys, "system", "n2", 0));
    m.m1 = static_cast<Index>(detail::get_uint(sys, "system", "m1", 0));
    m.m2 = static_cast<Index>(detail::get_uint(sys, "system", "m2", 0));
    m.A = detail::get_matrix(sys, "A", base);
    m.C1 = detail::get_matrix(sys, "C1", base);
    m.C2 = detail::get_matrix(sys, "C2", base);
    m.W = detail::get_matrix(sys, "W", base);
    m.V = detail::get_matrix(sys, "V", base);
    m.Sigma0 = detail::get_matrix(sys, "Sigma0", base);
    detail::check_shape(m.A, m.n(), m.n(), "A");
    detail::check_shape(m.C1, m.m1, m.n1, "C1");
    detail::check_shape(m.C2, m.m2, m.n2, "C2");
    detail::check_shape(m.W, m.n(), m.n(), "W");
    detail::check_shape(m.V, m.m(), m.m(), "V");
    detail::check_shape(m.Sigma0, m.n(), m.n(), "Sigma0");
  }

  const ptree& dl = section("delays");
  const double l1 = detail::get_double(dl, "delays", "lambda1", cfg.delays.lambda1);
  const double l2 = detail::get_double(dl, "delays", "lambda2", cfg.delays.lambda2);
  auto prob = [](double v, const std::string& key) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(key + ": must lie in [0, 1]");
  };
  prob(l1, "delays.lambda1");
  prob(l2, "delays.lambda2");
  cfg.delays = {l1, l2};
  cfg.grid1 = detail::get_list(dl, "delays", "grid1", cfg.grid1);
  cfg.grid2 = detail::get_list(dl, "delays", "grid2", cfg.grid2);
  for (double v : cfg.grid1) prob(v, "delays.grid1");
  for (double v : cfg.grid2) prob(v, "delays.grid2");

  const ptree& sim = section("sim");
  cfg.steps = detail::get_uint(sim, "sim", "steps", cfg.steps);
  cfg.runs = detail::get_uint(sim, "sim", "runs", cfg.runs);
  cfg.seed = detail::get_uint(sim, "sim", "seed", cfg.seed);
  if (cfg.steps < 1) throw ConfigError("sim.steps: must be at least 1");
  if (cfg.runs < 1) throw ConfigError("sim.runs: must be at least 1");

  const ptree& an = section("analysis");
  cfg.solver.restarts = static_cast<int>(detail::get_uint(an, "analysis", "restarts", cfg.solver.restarts));
  cfg.solver.iterations = static_cast<int>(detail::get_uint(an, "analysis", "iterations", cfg.solver.iterations));
  cfg.solver.tolerance = detail::get_double(an, "analysis", "tolerance", cfg.solver.tolerance);
  cfg.divergence_factor = detail::get_double(an, "analysis", "divergence_factor", cfg.divergence_factor);
  cfg.bisect_tol = detail::get_double(an, "analysis", "bisect_tol", cfg.bisect_tol);
  cfg.horizon = detail::get_uint(an, "analysis", "horizon", cfg.horizon);
  if (!(cfg.solver.tolerance > 0)) throw ConfigError("analysis.tolerance: must be positive");
  if (!(cfg.divergence_factor > 0)) throw ConfigError("analysis.divergence_factor: must be positive");
  if (!(cfg.bisect_tol > 0)) throw ConfigError("analysis.bisect_tol: must be positive");
  if (cfg.horizon < 1) throw ConfigError("analysis.horizon: must be at least 1");
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  return parse_config(in, std::filesystem::path(path).parent_path());
}

// Canonical form: every key spelled out, matrices inline at full precision.
inline std::string normalized_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "[system]\n";
  if (!cfg.fixture.empty()) {
    os << "fixture = " << cfg.fixture << '\n';
  } else {
    const SystemModel& m = cfg.model;
    os << "n1 = " << m.n1 << "\nn2 = " << m.n2 << "\nm1 = " << m.m1 << "\nm2 = " << m.m2 << '\n'
       << "A = " << matrix_to_inline(m.A) << '\n'
       << "C1 = " << matrix_to_inline(m.C1) << '\n'
       << "C2 = " << matrix_to_inline(m.C2) << '\n'
       << "W = " << matrix_to_inline(m.W) << '\n'
       << "V = " << matrix_to_inline(m.V) << '\n'
       << "Sigma0 = " << matrix_to_inline(m.Sigma0) << '\n';
  }
  os << "\n[delays]\n"
     << "lambda1 = " << format_double(cfg.delays.lambda1) << '\n'
     << "lambda2 = " << format_double(cfg.delays.lambda2) << '\n'
     << "grid1 = " << detail::list_to_string(cfg.grid1) << '\n'
     << "grid2 = " << detail::list_to_string(cfg.grid2) << '\n'
     << "\n[sim]\n"
     << "steps = " << cfg.steps << '\n'
     << "runs = " << cfg.runs << '\n'
     << "seed = " << cfg.seed << '\n'
     << "\n[analysis]\n"
     << "restarts = " << cfg.solver.restarts << '\n'
     << "iterations = " << cfg.solver.iterations << '\n'
     << "tolerance = " << format_double(cfg.solver.tolerance) << '\n'
     << "divergence_factor = " << format_double(cfg.divergence_factor) << '\n'
     << "bisect_tol = " << format_double(cfg.bisect_tol) << '\n'
     << "horizon = " << cfg.horizon << '\n';
  return os.str();
}

}  // namespace ise
