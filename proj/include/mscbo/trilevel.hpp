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

// Three-population driver. Each X-particle owns a Y-subpopulation, and each
// Y-subpopulation is represented at the innermost level by a single
// R-subpopulation attached to its consensus point, so the particle counts are
// N, N*M and N*P. Two layers of forward-looking averaging fold the innermost
// consensus into the Y-consensus and the Y-consensus into the X-target.
// The drift-strengthening factor is fixed at 1 at this level.

struct tri_level_params {
  double alpha1 = 1e15;
  double alpha2 = 1e15;
  double alpha3 = 1e15;
  double lambda = 1.0;
  double sigma = 2.0;
  double gamma = 0.75;
  double delta = 1e-5;
  double Q = 10.0;  // shared truncation radius
  double dt = 0.1;  // single time step for all three loops
  double Tx = 50.0;
  double Ty = 0.5;
  double Tr = 0.5;
  std::size_t N = 100;
  std::size_t M = 50;
  std::size_t P = 25;
  double init_lo = -1.0;
  double init_hi = 3.0;
  unsigned workers = 1;
  bool record_trace = false;

  void validate() const {
    if (N < 2 || M < 1 || P < 1)
      throw std::invalid_argument(
          "tri_level_params: need N >= 2, M >= 1, P >= 1");
    if (alpha1 < 0.0 || alpha2 < 0.0 || alpha3 < 0.0)
      throw std::invalid_argument("tri_level_params: sharpness must be >= 0");
    if (!(gamma > 0.0) || gamma > 1.0)
      throw std::invalid_argument("tri_level_params: gamma must be in (0, 1]");
    if (!(init_lo <= init_hi))
      throw std::invalid_argument(
          "tri_level_params: initialization box is empty");
    step().validate();
  }

  step_params step() const { return {lambda, sigma, delta, Q, dt}; }
};

struct tri_level_result {
  vec x_star;
  vec y_star;
  vec r_star;
  std::optional<double> error;
  std::optional<bool> success;
  double wall_time = 0.0;
  std::vector<trace_entry> trace;
  double max_abs_coord = 0.0;
  std::size_t y_particle_total = 0;  // N*M
  std::size_t r_particle_total = 0;  // N*P
};

inline tri_level_result run_trilevel(const tri_level_problem& problem,
                                     const tri_level_params& params,
                                     std::uint64_t seed) {
  params.validate();
  if (problem.n < 1 || problem.m < 1 || problem.p < 1 || !problem.upper ||
      !problem.middle || !problem.inner)
    throw std::invalid_argument("run_trilevel: incomplete problem definition");
  if (problem.optimum &&
      (problem.optimum->x.size() != problem.n ||
       problem.optimum->y.size() != problem.m ||
       problem.optimum->r.size() != problem.p))
    throw std::invalid_argument("run_trilevel: optimum dimension mismatch");

  const auto t_begin = std::chrono::steady_clock::now();

  const std::size_t n = problem.n;
  const std::size_t m = problem.m;
  const std::size_t p = problem.p;
  const std::size_t outer_steps = detail::step_count(params.Tx, params.dt, "Tx");
  const std::size_t mid_steps = detail::step_count(params.Ty, params.dt, "Ty");
  const std::size_t inner_steps = detail::step_count(params.Tr, params.dt, "Tr");
  const step_params sp = params.step();
  // each averaging fold retains gamma of the running average
  const double fresh_weight = 1.0 - params.gamma;

  ensemble X(params.N, n);
  {
    rng_stream init(seed, rng_site::init_x);
    X.fill_uniform(init, params.init_lo, params.init_hi);
  }
  std::vector<ensemble> Y, R;
  Y.reserve(params.N);
  R.reserve(params.N);
  for (std::size_t i = 0; i < params.N; ++i) {
    Y.emplace_back(params.M, m);
    rng_stream init_y(seed, rng_site::init_y, i);
    Y.back().fill_uniform(init_y, params.init_lo, params.init_hi);
    R.emplace_back(params.P, p);
    rng_stream init_r(seed, rng_site::init_r, i);
    R.back().fill_uniform(init_r, params.init_lo, params.init_hi);
  }

  ensemble Z = X;
  ensemble V(params.N, m);   // final Y-consensus per branch
  ensemble RC(params.N, p);  // final R-consensus per branch
  ensemble X_next(params.N, n);
  std::vector<double> branch_max(params.N, 0.0);

  tri_level_result result;
  result.y_particle_total = params.N * params.M;
  result.r_particle_total = params.N * params.P;

  for (std::size_t t = 0; t < outer_steps; ++t) {
    parallel_for(params.N, params.workers, [&](std::size_t i) {
     try {
      thread_local consensus_workspace ws;
      thread_local vec v, r, v_fresh, z_fresh, noise;
      v.resize(m);
      r.resize(p);
      v_fresh.resize(m);
      z_fresh.resize(n);

      rng_stream stream(seed, rng_site::phase, t, i);
      const cspan xi = X.particle(i);
      const std::span<double> zi = Z.particle(i);
      double max_abs = branch_max[i];

      // Initial Y-consensus, weighted against the arithmetic mean of the
      // current R-subpopulation.
      {
        const vec r_mean = R[i].mean();
        ws.consensus_into(Y[i], params.alpha2, v, [&](std::size_t j) {
          return problem.middle(xi, Y[i].particle(j), r_mean);
        });
      }

      for (std::size_t tau = 0; tau < mid_steps; ++tau) {
        auto inner_value = [&](std::size_t k) {
          return problem.inner(xi, v, R[i].particle(k));
        };
        ws.consensus_into(R[i], params.alpha3, r, inner_value);
        for (std::size_t s = 0; s < inner_steps; ++s) {
          noise.resize(p);
          for (std::size_t k = 0; k < params.P; ++k) {
            stream.fill_normal(noise, std::sqrt(params.dt));
            detail::cbo_em_step_into(R[i].particle(k), r, sp, noise);
            detail::check_particle_state(R[i].particle(k), t, i, "R", max_abs);
          }
          ws.consensus_into(R[i], params.alpha3, r, inner_value);
          ws.consensus_into(Y[i], params.alpha2, v_fresh, [&](std::size_t j) {
            return problem.middle(xi, Y[i].particle(j), r);
          });
          for (std::size_t k = 0; k < m; ++k)
            v[k] = detail::fla_mix(v[k], v_fresh[k], fresh_weight);
        }

        noise.resize(m);
        for (std::size_t j = 0; j < params.M; ++j) {
          stream.fill_normal(noise, std::sqrt(params.dt));
          detail::cbo_em_step_into(Y[i].particle(j), v, sp, noise);
          detail::check_particle_state(Y[i].particle(j), t, i, "Y", max_abs);
        }
        ws.consensus_into(Y[i], params.alpha2, v, [&](std::size_t j) {
          return problem.middle(xi, Y[i].particle(j), r);
        });
        ws.consensus_into(X, params.alpha1, z_fresh, [&](std::size_t q) {
          return problem.upper(X.particle(q), v, r);
        });
        for (std::size_t k = 0; k < n; ++k)
          zi[k] = detail::fla_mix(zi[k], z_fresh[k], fresh_weight);
      }
      std::copy(v.begin(), v.end(), V.particle(i).begin());
      std::copy(r.begin(), r.end(), RC.particle(i).begin());

      noise.resize(n);
      stream.fill_normal(noise, std::sqrt(params.dt));
      auto xi_next = X_next.particle(i);
      std::copy(xi.begin(), xi.end(), xi_next.begin());
      detail::cbo_em_step_into(xi_next, zi, sp, noise);
      detail::check_particle_state(xi_next, t, i, "X", max_abs);
      branch_max[i] = max_abs;
     } catch (const numerical_error&) {
      throw;
     } catch (const std::exception& ex) {
      throw numerical_error("tri-level run failed at outer step " +
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
      entry.best_upper =
          problem.upper(X.particle(0), V.particle(0), RC.particle(0));
      for (std::size_t i = 1; i < params.N; ++i)
        entry.best_upper =
            std::min(entry.best_upper,
                     problem.upper(X.particle(i), V.particle(i),
                                   RC.particle(i)));
      result.trace.push_back(std::move(entry));
    }
  }

  const vec x_bar = X.mean();
  const vec v_bar = V.mean();
  const vec r_bar = RC.mean();
  consensus_workspace ws;
  result.x_star.resize(n);
  ws.consensus_into(X, params.alpha1, result.x_star, [&](std::size_t k) {
    return problem.upper(X.particle(k), v_bar, r_bar);
  });
  result.y_star.resize(m);
  ws.consensus_into(V, params.alpha2, result.y_star, [&](std::size_t k) {
    return problem.middle(x_bar, V.particle(k), r_bar);
  });
  result.r_star.resize(p);
  ws.consensus_into(RC, params.alpha3, result.r_star, [&](std::size_t k) {
    return problem.inner(x_bar, v_bar, RC.particle(k));
  });

  for (double b : branch_max)
    result.max_abs_coord = std::max(result.max_abs_coord, b);
  if (problem.optimum) {
    result.error = l2_dist(result.x_star, problem.optimum->x) +
                   l2_dist(result.y_star, problem.optimum->y) +
                   l2_dist(result.r_star, problem.optimum->r);
    result.success = *result.error <= success_threshold;
  }
  result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin)
          .count();
  return result;
}

}  // namespace mscbo
