#pragma once

// Subcommand front end. Exit codes: 0 ok, 1 model validation or numerical
// failure, 2 usage / config / I/O error.

#include "ise/analysis.hpp"
#include "ise/config.hpp"
#include "ise/filter.hpp"
#include "ise/gains.hpp"
#include "ise/montecarlo.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ise::cli {

enum ExitCode { kOk = 0, kInvalid = 1, kUsage = 2 };

namespace detail {

struct ValidationFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Writes to --out when given, otherwise to the default stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw IoError("cannot write '" + path + "'");
    }
    os_ = file_ ? file_.get() : &fallback;
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_ = nullptr;
};

inline void require_valid(const RunConfig& cfg, std::ostream& err) {
  const ValidationReport rep = validate_model(cfg.model);
  if (rep.ok()) return;
  for (const auto& v : rep.violations) err << "invalid model: " << v << '\n';
  throw ValidationFailed("model failed validation");
}

inline std::pair<int, double> parse_fix(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) throw ConfigError("--fix: expected lambda1=<v> or lambda2=<v>");
  const std::string key = spec.substr(0, eq);
  int which = 0;
  if (key == "lambda1") which = 1;
  else if (key == "lambda2") which = 2;
  else throw ConfigError("--fix: unknown probability '" + key + "'");
  double v = 0.0;
  try {
    v = parse_double(spec.substr(eq + 1), "--fix");
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("--fix: value must lie in [0, 1]");
  return {which, v};
}

inline void write_gains_csv(std::ostream& os, const GainSet& g, Index m) {
  os << "outcome,row";
  for (Index j = 1; j <= m; ++j) os << ",col_" << j;
  os << '\n';
  for (DelayOutcome o : kAllOutcomes) {
    const Matrix& D = g[o];
    for (Index i = 0; i < D.rows(); ++i) {
      os << o.label() << ',' << (i + 1);
      for (Index j = 0; j < D.cols(); ++j) os << ',' << format_double(D(i, j));
      os << '\n';
    }
  }
}

}  // namespace detail

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optimal estimation for two-area systems with delayed cross measurements", "ise"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string cfg_path, out_path;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", cfg_path, "INI run configuration")->required();
    sub->add_option("-o,--out", out_path, "write the result here instead of stdout");
  };

  auto* validate = app.add_subcommand("validate", "check the model in a config");
  add_common(validate);
  bool dump = false;
  validate->add_flag("--dump-normalized", dump, "print the canonical form of the config");

  auto* gains = app.add_subcommand("gains", "print the four structured gains for a prior covariance");
  add_common(gains);
  std::string p_path;
  gains->add_option("--p", p_path, "prior covariance, row-major CSV")->required();

  auto* filter = app.add_subcommand("filter", "simulate one run and write the trajectory CSV");
  add_common(filter);
  std::optional<std::size_t> steps_opt;
  std::optional<std::uint64_t> seed_opt;
  filter->add_option("--steps", steps_opt, "horizon (default sim.steps)");
  filter->add_option("--seed", seed_opt, "seed (default sim.seed)");

  auto* sweep_cmd = app.add_subcommand("sweep", "Monte-Carlo trace of E(P_t) over the lambda grid");
  add_common(sweep_cmd);
  std::optional<std::size_t> runs_opt;
  sweep_cmd->add_option("--steps", steps_opt, "horizon (default sim.steps)");
  sweep_cmd->add_option("--runs", runs_opt, "runs per cell (default sim.runs)");
  sweep_cmd->add_option("--seed", seed_opt, "seed (default sim.seed)");

  auto* iterate = app.add_subcommand("iterate-g", "trace series of Y_{t+1} = g(Y_t)");
  add_common(iterate);
  iterate->add_option("--steps", steps_opt, "iterations (default analysis.horizon)");

  auto* bounded = app.add_subcommand("bounded", "r1..r4 sufficient boundedness test");
  add_common(bounded);
  bool as_csv = false;
  std::string cert_dir;
  bounded->add_flag("--csv", as_csv, "CSV instead of text");
  bounded->add_option("--certificates", cert_dir, "directory for the certifying X matrices");

  auto* critical = app.add_subcommand("critical", "bounds on the critical delay probability");
  add_common(critical);
  std::string fix;
  bool empirical = false;
  critical->add_option("--fix", fix, "held probability, lambda1=<v> or lambda2=<v>")->required();
  critical->add_flag("--empirical", empirical, "also bisect on Y-iteration divergence");
  critical->add_flag("--csv", as_csv, "CSV instead of text");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "ise: " << e.what() << '\n';
    return kUsage;
  }

  try {
    const RunConfig cfg = load_config(cfg_path);
    detail::Sink sink(out_path, out);
    std::ostream& os = *sink;

    if (validate->parsed()) {
      const ValidationReport rep = validate_model(cfg.model);
      if (dump) os << normalized_config(cfg);
      if (!rep.ok()) {
        for (const auto& v : rep.violations) err << "invalid model: " << v << '\n';
        return kInvalid;
      }
      if (!dump) os << "valid\n";
      return kOk;
    }

    detail::require_valid(cfg, err);

    if (gains->parsed()) {
      const Matrix P = read_matrix_csv(p_path);
      if (P.rows() != cfg.model.n() || P.cols() != cfg.model.n())
        throw ConfigError("--p: expected a " + std::to_string(cfg.model.n()) + "x" + std::to_string(cfg.model.n()) +
                          " matrix");
      detail::write_gains_csv(os, optimal_gains(cfg.model, P), cfg.model.m());
    } else if (filter->parsed()) {
      SeededRng rng(seed_opt.value_or(cfg.seed), 0);
      write_trajectory_csv(os, run_filter(cfg.model, cfg.delays, steps_opt.value_or(cfg.steps), rng));
    } else if (sweep_cmd->parsed()) {
      const auto grid = lambda_grid(cfg.grid1, cfg.grid2);
      write_sweep_csv(os, sweep(cfg.model, grid, runs_opt.value_or(cfg.runs), steps_opt.value_or(cfg.steps),
                                seed_opt.value_or(cfg.seed)));
    } else if (iterate->parsed()) {
      const YSequence seq =
          iterate_Y(cfg.model, cfg.delays, steps_opt.value_or(cfg.horizon), {cfg.divergence_factor, 1e-8});
      os << "t,trace_Y\n";
      for (std::size_t k = 0; k < seq.trace.size(); ++k)
        os << YSequence::time_of(k) << ',' << format_double(seq.trace[k]) << '\n';
      if (seq.diverged) err << "Y-iteration diverged after " << seq.trace.size() << " values\n";
    } else if (bounded->parsed()) {
      const BoundednessReport rep = boundedness_test(cfg.model, cfg.delays, cfg.solver);
      if (as_csv)
        write_boundedness_csv(os, rep);
      else
        write_boundedness_text(os, rep);
      if (!cert_dir.empty()) {
        std::filesystem::create_directories(cert_dir);
        const char* names[4] = {"X_blockdiag.csv", "X_lower.csv", "X_upper.csv", "X_full.csv"};
        const auto certs = rep.certificates();
        for (int k = 0; k < 4; ++k) write_matrix_csv((std::filesystem::path(cert_dir) / names[k]).string(), certs[k]);
      }
    } else if (critical->parsed()) {
      const auto [which, value] = detail::parse_fix(fix);
      const RValues rv = compute_r_values(cfg.model, cfg.solver);
      CriticalBounds cb = critical_bounds(rv, try_alpha(cfg.model), value, which);
      if (empirical) {
        const EmpiricalCritical ec =
            empirical_critical(cfg.model, value, which, {cfg.horizon, cfg.divergence_factor, cfg.bisect_tol});
        cb.empirical = ec.estimate;
        cb.h_diverges = ec.h_diverges;
      }
      if (as_csv)
        write_critical_csv(os, cb);
      else
        write_critical_text(os, cb);
    }
    return kOk;
  } catch (const ConfigError& e) {
    err << "ise: config error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    err << "ise: " << e.what() << '\n';
    return kUsage;
  } catch (const detail::ValidationFailed&) {
    return kInvalid;
  } catch (const std::exception& e) {
    err << "ise: " << e.what() << '\n';
    return kInvalid;
  }
}

inline int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace ise::cli
