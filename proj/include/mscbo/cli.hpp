#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mscbo/harness.hpp"

namespace mscbo {

// Command-line front end. Exit codes: 0 on success, 1 on usage errors
// (unknown flags, ids, malformed parameters), 2 on numerical or I/O failure.

namespace cli_detail {

inline std::pair<std::string, double> parse_param(const std::string& kv) {
  const auto pos = kv.find('=');
  if (pos == std::string::npos || pos == 0 || pos + 1 == kv.size())
    throw std::invalid_argument("expected --param key=value, got: " + kv);
  const std::string key = kv.substr(0, pos);
  char* end = nullptr;
  const double value = std::strtod(kv.c_str() + pos + 1, &end);
  if (end == kv.c_str() + pos + 1 || *end != '\0')
    throw std::invalid_argument("non-numeric value in --param " + kv);
  return {key, value};
}

inline std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::istringstream in(csv);
  std::string field;
  while (std::getline(in, field, ',')) {
    if (field.empty()) continue;
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end == field.c_str() || *end != '\0')
      throw std::invalid_argument("non-numeric list entry: " + field);
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty numeric list: " + csv);
  return out;
}

// Config files carry the same keys as the CLI: problem, dim, runs, seed,
// out, format, plus any solver parameter. File values sit between the
// defaults and explicit command-line flags.
struct file_config {
  std::optional<std::string> problem;
  std::optional<std::size_t> dim;
  std::optional<std::size_t> runs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::vector<std::pair<std::string, double>> params;
};

inline file_config load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw std::invalid_argument("malformed config file " + path + ": " +
                                ex.what());
  }
  file_config cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "problem" || key == "function") cfg.problem = value.get<std::string>();
    else if (key == "dim") cfg.dim = value.get<std::size_t>();
    else if (key == "runs") cfg.runs = value.get<std::size_t>();
    else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
    else if (key == "out") cfg.out = value.get<std::string>();
    else if (key == "format") cfg.format = value.get<std::string>();
    else if (key == "mode") continue;
    else cfg.params.emplace_back(key, value.get<double>());
  }
  return cfg;
}

inline void print_summary(const std::string& label, const mc_summary& s) {
  std::printf("%s runs=%zu success_rate=%.4g mean_error=%.6g mean_wall_time_s=%.4g\n",
              label.c_str(), s.runs, s.success_rate, s.mean_error,
              s.mean_wall_time);
}

struct common_options {
  std::string problem;
  std::size_t dim = 10;
  std::size_t runs = 20;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "csv";
  unsigned workers = 0;
  std::vector<std::string> raw_params;
};

inline void add_common(CLI::App* cmd, common_options& opt,
                       const char* problem_flag, const char* problem_help) {
  cmd->add_option(problem_flag, opt.problem, problem_help);
  cmd->add_option("--dim", opt.dim, "problem dimension d");
  cmd->add_option("--runs", opt.runs, "number of Monte Carlo runs");
  cmd->add_option("--seed", opt.seed, "base seed; run k uses seed+k");
  cmd->add_option("--out", opt.out, "output file path");
  cmd->add_option("--format", opt.format, "output format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--workers", opt.workers,
                  "worker threads (0 = auto, MSCBO_THREADS overrides)");
  cmd->add_option("--param", opt.raw_params,
                  "solver parameter override key=value (repeatable)");
}

// Resolves --problem <id|file> into an experiment config: file values (if a
// config file is given) sit under explicit CLI flags, and --param overrides
// are appended after the file's parameter keys.
inline experiment_config resolve_config(const CLI::App* cmd,
                                        common_options& opt,
                                        const std::string& mode,
                                        const std::string& default_id,
                                        bool (*is_known)(const std::string&)) {
  experiment_config config;
  config.mode = mode;
  std::string id = opt.problem.empty() ? default_id : opt.problem;
  if (!opt.problem.empty() && !is_known(opt.problem)) {
    if (!std::filesystem::exists(opt.problem))
      throw std::invalid_argument("unknown problem id or missing config file: " +
                                  opt.problem);
    const file_config cfg = load_config_file(opt.problem);
    id = cfg.problem.value_or(default_id);
    if (!is_known(id))
      throw std::invalid_argument("config file names unknown problem id: " + id);
    if (cfg.dim && cmd->count("--dim") == 0) opt.dim = *cfg.dim;
    if (cfg.runs && cmd->count("--runs") == 0) opt.runs = *cfg.runs;
    if (cfg.seed && cmd->count("--seed") == 0) opt.seed = *cfg.seed;
    if (cfg.out && cmd->count("--out") == 0) opt.out = *cfg.out;
    if (cfg.format && cmd->count("--format") == 0) opt.format = *cfg.format;
    config.params = cfg.params;
  }
  for (const auto& kv : opt.raw_params) config.params.push_back(parse_param(kv));
  config.problem = id;
  config.dim = opt.dim;
  config.runs = opt.runs;
  config.base_seed = opt.seed;
  config.out_path = opt.out;
  config.format = opt.format;
  config.workers = opt.workers;
  return config;
}

// Shared tail of the three Monte Carlo subcommands.
inline int run_experiment(const experiment_config& config,
                          const std::string& label) {
  const auto summary = monte_carlo(config);
  print_summary(label, summary);
  if (!config.out_path.empty())
    emit_results(summary, config.out_path, config.format);
  if (all_runs_failed(summary)) {
    std::cerr << "numerical failure: every run failed\n";
    return 2;
  }
  return 0;
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Multiscale consensus-based optimization for bi-level, "
               "tri-level and min-max problems"};
  app.require_subcommand(1);

  cli_detail::common_options bi_opt, tri_opt, mm_opt;

  auto* bi_cmd = app.add_subcommand(
      "bilevel", "solve a bi-level benchmark with Monte Carlo repetition");
  cli_detail::add_common(bi_cmd, bi_opt, "--problem",
                         "benchmark id (i..vi) or JSON config file");

  auto* tri_cmd = app.add_subcommand(
      "trilevel", "solve a tri-level benchmark with Monte Carlo repetition");
  cli_detail::add_common(tri_cmd, tri_opt, "--problem",
                         "benchmark id (A..C) or JSON config file");

  auto* mm_cmd = app.add_subcommand(
      "minmax", "solve a min-max benchmark via the bi-level reduction");
  cli_detail::add_common(mm_cmd, mm_opt, "--function",
                         "benchmark id (a..d) or JSON config file");

  auto* conv_cmd = app.add_subcommand(
      "converge",
      "compare the coupled two-scale system against the solver over an "
      "eps sweep");
  std::string conv_problem = "i";
  std::size_t conv_dim = 2;
  std::string conv_eps = "0.5,0.1,0.02";
  std::size_t conv_seeds = 10;
  std::uint64_t conv_seed = 0;
  double conv_T = 5.0;
  std::vector<double> conv_kappas;
  std::string conv_out;
  unsigned conv_workers = 0;
  std::vector<std::string> conv_params;
  conv_cmd->add_option("--problem", conv_problem, "bi-level benchmark id");
  conv_cmd->add_option("--dim", conv_dim, "problem dimension d");
  conv_cmd->add_option("--eps", conv_eps,
                       "comma-separated eps values, strictly decreasing");
  conv_cmd->add_option("--seeds", conv_seeds, "seeds per eps value");
  conv_cmd->add_option("--seed", conv_seed, "base seed");
  conv_cmd->add_option("--horizon", conv_T, "physical time horizon T");
  conv_cmd->add_option("--kappa", conv_kappas,
                       "drift-strengthening factors to sweep (default 1.0 0.1)");
  conv_cmd->add_option("--out", conv_out, "JSON report path");
  conv_cmd->add_option("--workers", conv_workers, "worker threads (0 = auto)");
  conv_cmd->add_option("--param", conv_params,
                       "solver parameter override key=value (repeatable)");

  auto* diag_cmd = app.add_subcommand(
      "diagnose-recurrence",
      "evaluate the fast-drift recurrence bound on random states");
  std::size_t diag_samples = 1000;
  std::string diag_problem = "i";
  std::size_t diag_dim = 10;
  std::uint64_t diag_seed = 0;
  double diag_kappa = -1.0;  // default: 1/sqrt(M) - 0.01
  std::vector<std::string> diag_params;
  diag_cmd->add_option("--samples", diag_samples, "number of random states");
  diag_cmd->add_option("--problem", diag_problem, "bi-level benchmark id");
  diag_cmd->add_option("--dim", diag_dim, "problem dimension d");
  diag_cmd->add_option("--seed", diag_seed, "base seed");
  diag_cmd->add_option("--kappa", diag_kappa,
                       "drift factor (default 1/sqrt(M) - 0.01)");
  diag_cmd->add_option("--param", diag_params,
                       "solver parameter override key=value (repeatable)");

  try {
    app.parse(argc, argv);

    if (bi_cmd->parsed()) {
      const auto config =
          cli_detail::resolve_config(bi_cmd, bi_opt, "bilevel", "i",
                                     is_bilevel_id);
      return cli_detail::run_experiment(config,
                                        "bilevel problem=" + config.problem);
    }

    if (tri_cmd->parsed()) {
      const auto config =
          cli_detail::resolve_config(tri_cmd, tri_opt, "trilevel", "A",
                                     is_trilevel_id);
      return cli_detail::run_experiment(config,
                                        "trilevel problem=" + config.problem);
    }

    if (mm_cmd->parsed()) {
      const auto config = cli_detail::resolve_config(mm_cmd, mm_opt, "minmax",
                                                     "a", is_minmax_id);
      return cli_detail::run_experiment(config,
                                        "minmax function=" + config.problem);
    }

    if (conv_cmd->parsed()) {
      if (!is_bilevel_id(conv_problem))
        throw std::invalid_argument("converge: unknown problem id: " +
                                    conv_problem);
      bi_level_params params;
      params.N = 20;  // the sweep runs at reduced population sizes
      params.M = 5;
      for (const auto& kv : conv_params) {
        const auto [key, value] = cli_detail::parse_param(kv);
        apply_param(params, key, value);
      }
      const auto eps_values = cli_detail::parse_double_list(conv_eps);
      if (conv_kappas.empty()) conv_kappas = {1.0, 0.1};
      const auto problem = builtin_bilevel(conv_problem, conv_dim);
      std::vector<eps_sweep_report> reports;
      for (double kappa : conv_kappas) {
        bi_level_params p = params;
        p.kappa = kappa;
        reports.push_back(eps_sweep(problem, p, eps_values, conv_T, conv_seeds,
                                    conv_seed, conv_workers));
        const auto& rep = reports.back();
        std::printf("converge problem=%s kappa=%g solver_mean=%.6g\n",
                    conv_problem.c_str(), kappa, rep.solver_mean);
        for (std::size_t k = 0; k < rep.eps_values.size(); ++k)
          std::printf("  eps=%-8g discrepancy=%.6g std_error=%.6g\n",
                      rep.eps_values[k], rep.discrepancies[k],
                      rep.std_errors[k]);
      }
      if (!conv_out.empty()) emit_results(reports, conv_out);
      return 0;
    }

    if (diag_cmd->parsed()) {
      if (!is_bilevel_id(diag_problem))
        throw std::invalid_argument("diagnose-recurrence: unknown problem id: " +
                                    diag_problem);
      bi_level_params params;
      for (const auto& kv : diag_params) {
        const auto [key, value] = cli_detail::parse_param(kv);
        apply_param(params, key, value);
      }
      if (diag_kappa > 0.0) params.kappa = diag_kappa;
      else params.kappa = 1.0 / std::sqrt(static_cast<double>(params.M)) - 0.01;
      const auto problem = builtin_bilevel(diag_problem, diag_dim);

      std::size_t satisfied = 0;
      double min_margin = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < diag_samples; ++s) {
        rng_stream stream(diag_seed, rng_site::diagnostics, s);
        ensemble X(params.N, problem.n);
        X.fill_uniform(stream, params.init_lo, params.init_hi);
        std::vector<ensemble> Y;
        for (std::size_t i = 0; i < params.N; ++i) {
          Y.emplace_back(params.M, problem.m);
          Y.back().fill_uniform(stream, params.init_lo, params.init_hi);
        }
        const auto report = drift_recurrence_check(X, Y, problem, params);
        if (report.satisfied) ++satisfied;
        min_margin = std::min(min_margin, report.bound - report.inner_product);
      }
      std::printf(
          "diagnose-recurrence samples=%zu kappa=%.6g satisfied=%zu (%.1f%%) "
          "min_margin=%.6g\n",
          diag_samples, params.kappa, satisfied,
          100.0 * static_cast<double>(satisfied) /
              static_cast<double>(diag_samples),
          min_margin);
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  } catch (const numerical_error& ex) {
    std::cerr << "numerical failure: " << ex.what() << "\n";
    return 2;
  } catch (const io_error& ex) {
    std::cerr << "i/o failure: " << ex.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  } catch (const std::exception& ex) {
    std::cerr << "failure: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}

inline int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.reserve(args.size() + 1);
  full.push_back("mscbo");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const auto& a : full) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace mscbo
