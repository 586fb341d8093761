#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mscbo/bilevel.hpp"
#include "mscbo/multiscale_sim.hpp"
#include "mscbo/parallel.hpp"
#include "mscbo/trilevel.hpp"

namespace mscbo {

// Monte Carlo experiment driver: repeated seeded solver runs, aggregation,
// and CSV/JSON result files.

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct run_record {
  std::uint64_t seed = 0;
  double error = std::numeric_limits<double>::quiet_NaN();
  bool success = false;
  double wall_time = 0.0;
  bool failed = false;        // hard failure; excluded from the means
  std::string failure_message;
};

struct mc_summary {
  std::size_t runs = 0;
  double success_rate = std::numeric_limits<double>::quiet_NaN();
  double mean_error = std::numeric_limits<double>::quiet_NaN();
  double mean_wall_time = std::numeric_limits<double>::quiet_NaN();
  std::vector<run_record> per_run;
};

inline double compute_error(const bi_level_result& result,
                            const optimum_pair& optimum) {
  return l2_dist(result.x_star, optimum.x) + l2_dist(result.y_star, optimum.y);
}

inline double compute_error(const tri_level_result& result,
                            const optimum_triple& optimum) {
  return l2_dist(result.x_star, optimum.x) +
         l2_dist(result.y_star, optimum.y) + l2_dist(result.r_star, optimum.r);
}

struct experiment_config {
  std::string mode = "bilevel";  // bilevel | trilevel | minmax | converge
  std::string problem = "i";
  std::size_t dim = 10;
  std::size_t runs = 20;
  std::uint64_t base_seed = 0;
  std::string out_path;
  std::string format = "csv";  // csv | json
  unsigned workers = 0;        // 0 = auto
  // flat key=value parameter overrides, applied over the defaults
  std::vector<std::pair<std::string, double>> params;
};

namespace detail {

inline bool set_both(double& a, double& b, double v) {
  a = v;
  b = v;
  return true;
}

inline std::size_t to_count(const std::string& key, double v) {
  if (!(v >= 1.0) || v != std::floor(v))
    throw std::invalid_argument("parameter " + key +
                                " must be a positive integer");
  return static_cast<std::size_t>(v);
}

}  // namespace detail

inline void apply_param(bi_level_params& p, const std::string& key, double v) {
  if (key == "alpha") p.alpha = v;
  else if (key == "beta") p.beta = v;
  else if (key == "lambda1") p.lambda1 = v;
  else if (key == "lambda2") p.lambda2 = v;
  else if (key == "lambda") detail::set_both(p.lambda1, p.lambda2, v);
  else if (key == "sigma1") p.sigma1 = v;
  else if (key == "sigma2") p.sigma2 = v;
  else if (key == "sigma") detail::set_both(p.sigma1, p.sigma2, v);
  else if (key == "gamma") p.gamma = v;
  else if (key == "delta1") p.delta1 = v;
  else if (key == "delta2") p.delta2 = v;
  else if (key == "delta") detail::set_both(p.delta1, p.delta2, v);
  else if (key == "R1") p.R1 = v;
  else if (key == "R2") p.R2 = v;
  else if (key == "R") detail::set_both(p.R1, p.R2, v);
  else if (key == "kappa") p.kappa = v;
  else if (key == "dt") p.dt = v;
  else if (key == "dtau") p.dtau = v;
  else if (key == "Tx") p.Tx = v;
  else if (key == "Ty") p.Ty = v;
  else if (key == "N") p.N = detail::to_count(key, v);
  else if (key == "M") p.M = detail::to_count(key, v);
  else if (key == "init_lo") p.init_lo = v;
  else if (key == "init_hi") p.init_hi = v;
  else
    throw std::invalid_argument("unknown bi-level parameter: " + key);
}

inline void apply_param(tri_level_params& p, const std::string& key,
                        double v) {
  if (key == "alpha1") p.alpha1 = v;
  else if (key == "alpha2") p.alpha2 = v;
  else if (key == "alpha3") p.alpha3 = v;
  else if (key == "alpha") { p.alpha1 = p.alpha2 = p.alpha3 = v; }
  else if (key == "lambda") p.lambda = v;
  else if (key == "sigma") p.sigma = v;
  else if (key == "gamma") p.gamma = v;
  else if (key == "delta") p.delta = v;
  else if (key == "Q") p.Q = v;
  else if (key == "dt") p.dt = v;
  else if (key == "Tx") p.Tx = v;
  else if (key == "Ty") p.Ty = v;
  else if (key == "Tr") p.Tr = v;
  else if (key == "N") p.N = detail::to_count(key, v);
  else if (key == "M") p.M = detail::to_count(key, v);
  else if (key == "P") p.P = detail::to_count(key, v);
  else if (key == "init_lo") p.init_lo = v;
  else if (key == "init_hi") p.init_hi = v;
  else
    throw std::invalid_argument("unknown tri-level parameter: " + key);
}

namespace detail {

inline void aggregate(mc_summary& summary) {
  std::size_t successes = 0;
  std::size_t completed = 0;
  double error_sum = 0.0;
  double wall_sum = 0.0;
  for (const auto& r : summary.per_run) {
    if (r.failed) continue;
    ++completed;
    error_sum += r.error;
    wall_sum += r.wall_time;
    if (r.success) ++successes;
  }
  summary.runs = summary.per_run.size();
  summary.success_rate = summary.runs == 0
                             ? std::numeric_limits<double>::quiet_NaN()
                             : static_cast<double>(successes) /
                                   static_cast<double>(summary.runs);
  summary.mean_error = completed == 0
                           ? std::numeric_limits<double>::quiet_NaN()
                           : error_sum / static_cast<double>(completed);
  summary.mean_wall_time = completed == 0
                               ? std::numeric_limits<double>::quiet_NaN()
                               : wall_sum / static_cast<double>(completed);
}

// Runs `runs` seeded solver calls concurrently and folds them in seed order.
template <class RunFn>
mc_summary monte_carlo_impl(std::size_t runs, std::uint64_t base_seed,
                            unsigned workers, RunFn&& run_one) {
  if (runs < 1) throw std::invalid_argument("monte_carlo: runs must be >= 1");
  mc_summary summary;
  summary.per_run.resize(runs);
  parallel_for(runs, workers, [&](std::size_t k) {
    const std::uint64_t seed = base_seed + k;
    run_record rec;
    rec.seed = seed;
    try {
      run_one(seed, rec);
    } catch (const std::exception& ex) {
      rec.failed = true;
      rec.failure_message = ex.what();
      rec.error = std::numeric_limits<double>::quiet_NaN();
      rec.success = false;
    }
    summary.per_run[k] = std::move(rec);
  });
  for (const auto& r : summary.per_run)
    if (r.failed)
      std::cerr << "warning: run with seed " << r.seed
                << " failed and is excluded from the means: "
                << r.failure_message << "\n";
  aggregate(summary);
  return summary;
}

}  // namespace detail

inline mc_summary monte_carlo(const bi_level_problem& problem,
                              bi_level_params params, std::size_t runs,
                              std::uint64_t base_seed, unsigned workers = 0) {
  params.workers = 1;  // concurrency lives at the run level
  return detail::monte_carlo_impl(
      runs, base_seed, workers, [&](std::uint64_t seed, run_record& rec) {
        const auto result = run_bilevel(problem, params, seed);
        if (!result.error)
          throw std::invalid_argument(
              "monte_carlo: problem has no known optimum");
        rec.error = *result.error;
        rec.success = *result.success;
        rec.wall_time = result.wall_time;
      });
}

inline mc_summary monte_carlo(const tri_level_problem& problem,
                              tri_level_params params, std::size_t runs,
                              std::uint64_t base_seed, unsigned workers = 0) {
  params.workers = 1;
  return detail::monte_carlo_impl(
      runs, base_seed, workers, [&](std::uint64_t seed, run_record& rec) {
        const auto result = run_trilevel(problem, params, seed);
        if (!result.error)
          throw std::invalid_argument(
              "monte_carlo: problem has no known optimum");
        rec.error = *result.error;
        rec.success = *result.success;
        rec.wall_time = result.wall_time;
      });
}

/// Runs the experiment described by a config: builds the builtin problem for
/// the mode, applies the parameter overrides and dispatches.
inline mc_summary monte_carlo(const experiment_config& config) {
  if (config.mode == "bilevel" || config.mode == "minmax") {
    bi_level_params params;
    for (const auto& [key, value] : config.params)
      apply_param(params, key, value);
    const auto problem = config.mode == "minmax"
                             ? builtin_minmax(config.problem, config.dim)
                             : builtin_bilevel(config.problem, config.dim);
    return monte_carlo(problem, params, config.runs, config.base_seed,
                       config.workers);
  }
  if (config.mode == "trilevel") {
    tri_level_params params;
    for (const auto& [key, value] : config.params)
      apply_param(params, key, value);
    return monte_carlo(builtin_trilevel(config.problem, config.dim), params,
                       config.runs, config.base_seed, config.workers);
  }
  throw std::invalid_argument("monte_carlo: unsupported mode: " + config.mode);
}

inline bool all_runs_failed(const mc_summary& summary) {
  if (summary.per_run.empty()) return false;
  for (const auto& r : summary.per_run)
    if (!r.failed) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Serialization. Doubles are written with 17 significant digits so that both
// formats round-trip bit-exactly.

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::string to_csv(const mc_summary& summary) {
  std::ostringstream out;
  out << "seed,error,success,wall_time_s\n";
  for (const auto& r : summary.per_run)
    out << r.seed << ',' << detail::fmt17(r.error) << ',' << (r.success ? 1 : 0)
        << ',' << detail::fmt17(r.wall_time) << '\n';
  out << "aggregate," << detail::fmt17(summary.mean_error) << ','
      << detail::fmt17(summary.success_rate) << ','
      << detail::fmt17(summary.mean_wall_time) << '\n';
  return out.str();
}

inline nlohmann::json to_json(const mc_summary& summary) {
  nlohmann::json j;
  j["runs"] = summary.runs;
  j["success_rate"] = summary.success_rate;
  j["mean_error"] = summary.mean_error;
  j["mean_wall_time"] = summary.mean_wall_time;
  j["per_run"] = nlohmann::json::array();
  for (const auto& r : summary.per_run) {
    nlohmann::json jr;
    jr["seed"] = r.seed;
    jr["error"] = r.error;
    jr["success"] = r.success;
    jr["wall_time_s"] = r.wall_time;
    if (r.failed) {
      jr["failed"] = true;
      jr["message"] = r.failure_message;
    }
    j["per_run"].push_back(std::move(jr));
  }
  return j;
}

inline nlohmann::json to_json(const eps_sweep_report& report) {
  nlohmann::json j;
  j["observable"] = report.observable;
  j["kappa"] = report.kappa;
  j["horizon"] = report.horizon;
  j["seeds"] = report.seeds;
  j["solver_mean"] = report.solver_mean;
  j["rows"] = nlohmann::json::array();
  for (std::size_t k = 0; k < report.eps_values.size(); ++k) {
    j["rows"].push_back({{"eps", report.eps_values[k]},
                         {"discrepancy", report.discrepancies[k]},
                         {"std_error", report.std_errors[k]}});
  }
  return j;
}

namespace detail {

inline double json_double(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN()
                     : j.get<double>();
}

}  // namespace detail

inline mc_summary summary_from_json(const nlohmann::json& j) {
  mc_summary summary;
  summary.runs = j.at("runs").get<std::size_t>();
  summary.success_rate = detail::json_double(j.at("success_rate"));
  summary.mean_error = detail::json_double(j.at("mean_error"));
  summary.mean_wall_time = detail::json_double(j.at("mean_wall_time"));
  for (const auto& jr : j.at("per_run")) {
    run_record r;
    r.seed = jr.at("seed").get<std::uint64_t>();
    r.error = detail::json_double(jr.at("error"));
    r.success = jr.at("success").get<bool>();
    r.wall_time = detail::json_double(jr.at("wall_time_s"));
    if (jr.contains("failed")) {
      r.failed = jr.at("failed").get<bool>();
      r.failure_message = jr.value("message", "");
    }
    summary.per_run.push_back(std::move(r));
  }
  return summary;
}

inline mc_summary summary_from_csv(const std::string& text) {
  mc_summary summary;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "seed,error,success,wall_time_s")
    throw io_error("summary_from_csv: bad header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string seed_field, error_field, success_field, wall_field;
    std::getline(row, seed_field, ',');
    std::getline(row, error_field, ',');
    std::getline(row, success_field, ',');
    std::getline(row, wall_field, ',');
    if (seed_field == "aggregate") {
      summary.mean_error = std::strtod(error_field.c_str(), nullptr);
      summary.success_rate = std::strtod(success_field.c_str(), nullptr);
      summary.mean_wall_time = std::strtod(wall_field.c_str(), nullptr);
      break;
    }
    run_record r;
    r.seed = std::strtoull(seed_field.c_str(), nullptr, 10);
    r.error = std::strtod(error_field.c_str(), nullptr);
    r.success = success_field == "1";
    r.wall_time = std::strtod(wall_field.c_str(), nullptr);
    summary.per_run.push_back(std::move(r));
  }
  summary.runs = summary.per_run.size();
  return summary;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open output file: " + path);
  out << text;
  if (!out) throw io_error("failed writing output file: " + path);
}

inline void emit_results(const mc_summary& summary, const std::string& path,
                         const std::string& format) {
  if (format == "csv") {
    write_text_file(path, to_csv(summary));
  } else if (format == "json") {
    write_text_file(path, to_json(summary).dump(2) + "\n");
  } else {
    throw std::invalid_argument("unknown output format: " + format);
  }
}

inline void emit_results(const std::vector<eps_sweep_report>& reports,
                         const std::string& path) {
  nlohmann::json j;
  j["reports"] = nlohmann::json::array();
  for (const auto& r : reports) j["reports"].push_back(to_json(r));
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace mscbo
