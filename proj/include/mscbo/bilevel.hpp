#pragma once

#include <chrono>
#include <optional>
#include <vector>

#include "mscbo/consensus.hpp"
#include "mscbo/dynamics.hpp"
#include "mscbo/ensemble.hpp"
#include "mscbo/objectives.hpp"
#include "mscbo/parallel.hpp"
#include "mscbo/rng.hpp"
#include "mscbo/solver_common.hpp"

namespace mscbo {

// Two-population driver. An outer X-population relaxes toward a
// forward-looking average of its consensus point, while each X-particle owns
// a fast Y-subpopulation that runs several inner steps per outer step. The
// Y-subpopulations and the averaging accumulators persist across outer
// iterations.

struct bi_level_params {
  double alpha = 1e15;
  double beta = 1e15;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double sigma1 = 2.0;
  double sigma2 = 2.0;
  double gamma = 0.75;   // forward-looking averaging weight, in (0, 1]
  double delta1 = 1e-5;
  double delta2 = 1e-5;
  double R1 = 10.0;
  double R2 = 10.0;
  double kappa = 1.0;    // fast-drift strengthening factor, > 0
  double dt = 0.1;
  double dtau = 0.1;
  double Tx = 50.0;
  double Ty = 0.5;
  std::size_t N = 100;   // X-population size
  std::size_t M = 25;    // Y-subpopulation size per X-particle
  double init_lo = -1.0;
  double init_hi = 3.0;
  unsigned workers = 1;  // 0 = auto (MSCBO_THREADS / hardware)
  bool record_trace = false;

  void validate() const {
    if (N < 2 || M < 1)
      throw std::invalid_argument("bi_level_params: need N >= 2 and M >= 1");
    if (alpha < 0.0 || beta < 0.0)
      throw std::invalid_argument("bi_level_params: sharpness must be >= 0");
    if (!(gamma > 0.0) || gamma > 1.0)
      throw std::invalid_argument("bi_level_params: gamma must be in (0, 1]");
    if (!(kappa > 0.0))
      throw std::invalid_argument("bi_level_params: kappa must be positive");
    if (!(init_lo <= init_hi))
      throw std::invalid_argument(
          "bi_level_params: initialization box is empty");
    x_step().validate();
    y_step().validate();
  }

  step_params x_step() const { return {lambda1, sigma1, delta1, R1, dt}; }
  step_params y_step() const { return {lambda2, sigma2, delta2, R2, dtau}; }
};

struct bi_level_result {
  vec x_star;
  vec y_star;
  std::optional<double> error;    // absent when the optimum is unknown
  std::optional<bool> success;    // error <= success_threshold
  double wall_time = 0.0;         // seconds
  std::vector<trace_entry> trace;
  double max_abs_coord = 0.0;     // largest |coordinate| seen during the run
  ensemble final_x;               // X-population at the final outer step
  ensemble final_v;               // per-branch Y-consensus points at the end
};

inline bi_level_result run_bilevel(const bi_level_problem& problem,
                                   const bi_level_params& params,
                                   std::uint64_t seed) {
  params.validate();
  if (problem.n < 1 || problem.m < 1 || !problem.upper || !problem.lower)
    throw std::invalid_argument("run_bilevel: incomplete problem definition");
  if (problem.optimum &&
      (problem.optimum->x.size() != problem.n ||
       problem.optimum->y.size() != problem.m))
    throw std::invalid_argument("run_bilevel: optimum dimension mismatch");

  const auto t_begin = std::chrono::steady_clock::now();

  const std::size_t n = problem.n;
  const std::size_t m = problem.m;
  const std::size_t outer_steps = detail::step_count(params.Tx, params.dt, "Tx");
  const std::size_t inner_steps =
      detail::step_count(params.Ty, params.dtau, "Ty");
  const step_params px = params.x_step();
  const step_params py = params.y_step();
  // each averaging fold retains gamma of the running average
  const double fresh_weight = 1.0 - params.gamma;

  ensemble X(params.N, n);
  {
    rng_stream init(seed, rng_site::init_x);
    X.fill_uniform(init, params.init_lo, params.init_hi);
  }
  std::vector<ensemble> Y;
  Y.reserve(params.N);
  for (std::size_t i = 0; i < params.N; ++i) {
    Y.emplace_back(params.M, m);
    rng_stream init(seed, rng_site::init_y, i);
    Y.back().fill_uniform(init, params.init_lo, params.init_hi);
  }

  ensemble Z = X;                    // forward-looking averages, one per branch
  ensemble V(params.N, m);           // latest Y-consensus per branch
  ensemble X_next(params.N, n);
  std::vector<double> branch_max(params.N, 0.0);

  bi_level_result result;

  for (std::size_t t = 0; t < outer_steps; ++t) {
    parallel_for(params.N, params.workers, [&](std::size_t i) {
     try {
      thread_local consensus_workspace ws;
      thread_local vec v, target, scaled, noise, z_fresh;
      v.resize(m);
      target.resize(m);
      scaled.resize(m);
      z_fresh.resize(n);

      rng_stream stream(seed, rng_site::phase, t, i);
      const cspan xi = X.particle(i);
      const std::span<double> zi = Z.particle(i);
      double max_abs = branch_max[i];

      auto lower_value = [&](std::size_t j) {
        return problem.lower(xi, Y[i].particle(j));
      };
      ws.consensus_into(Y[i], params.beta, v, lower_value);

      noise.resize(m);
      for (std::size_t tau = 0; tau < inner_steps; ++tau) {
        for (std::size_t k = 0; k < m; ++k) target[k] = params.kappa * v[k];
        for (std::size_t j = 0; j < params.M; ++j) {
          stream.fill_normal(noise, std::sqrt(params.dtau));
          detail::cbo_em_step_into(Y[i].particle(j), target, py, noise);
          detail::check_particle_state(Y[i].particle(j), t, i, "Y", max_abs);
        }
        ws.consensus_into(Y[i], params.beta, v, lower_value);
        for (std::size_t k = 0; k < m; ++k) scaled[k] = v[k] / params.kappa;
        ws.consensus_into(X, params.alpha, z_fresh, [&](std::size_t k) {
          return problem.upper(X.particle(k), scaled);
        });
        for (std::size_t k = 0; k < n; ++k)
          zi[k] = detail::fla_mix(zi[k], z_fresh[k], fresh_weight);
      }
      std::copy(v.begin(), v.end(), V.particle(i).begin());

      noise.resize(n);
      stream.fill_normal(noise, std::sqrt(params.dt));
      auto xi_next = X_next.particle(i);
      std::copy(xi.begin(), xi.end(), xi_next.begin());
      detail::cbo_em_step_into(xi_next, zi, px, noise);
      detail::check_particle_state(xi_next, t, i, "X", max_abs);
      branch_max[i] = max_abs;
     } catch (const numerical_error&) {
      throw;
     } catch (const std::exception& ex) {
      throw numerical_error("bi-level run failed at outer step " +
                            std::to_string(t) + ", branch " +
                            std::to_string(i) + ": " + ex.what());
     }
    });
    std::swap(X, X_next);

    if (params.record_trace) {
      trace_entry entry;
      entry.step = t;
      entry.mean_x = X.mean();
      entry.mean_consensus = Z.mean();
      entry.best_upper = problem.upper(X.particle(0), V.particle(0));
      for (std::size_t i = 1; i < params.N; ++i)
        entry.best_upper = std::min(
            entry.best_upper, problem.upper(X.particle(i), V.particle(i)));
      result.trace.push_back(std::move(entry));
    }
  }

  // Solution extraction: consensus of the final X-population against the
  // averaged Y-consensus, and the beta-weighted average of the per-branch
  // consensus points (carrying the 1/kappa rescale).
  const vec x_bar = X.mean();
  const vec v_bar = V.mean();
  result.x_star = x_consensus(X, v_bar, problem.upper, params.alpha,
                              params.kappa);
  {
    consensus_workspace ws;
    vec scaled(m);
    result.y_star.resize(m);
    ws.consensus_into(V, params.beta, result.y_star, [&](std::size_t r) {
      const cspan vr = V.particle(r);
      for (std::size_t k = 0; k < m; ++k) scaled[k] = vr[k] / params.kappa;
      return problem.lower(x_bar, scaled);
    });
    for (auto& y : result.y_star) y /= params.kappa;
  }

  for (double b : branch_max)
    result.max_abs_coord = std::max(result.max_abs_coord, b);
  if (problem.optimum) {
    result.error = l2_dist(result.x_star, problem.optimum->x) +
                   l2_dist(result.y_star, problem.optimum->y);
    result.success = *result.error <= success_threshold;
  }
  result.final_x = std::move(X);
  result.final_v = std::move(V);
  result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin)
          .count();
  return result;
}

}  // namespace mscbo
