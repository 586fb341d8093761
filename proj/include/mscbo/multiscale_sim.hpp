#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mscbo/bilevel.hpp"
#include "mscbo/consensus.hpp"
#include "mscbo/dynamics.hpp"
#include "mscbo/ensemble.hpp"
#include "mscbo/parallel.hpp"

namespace mscbo {

// Direct integration of the coupled fast-slow particle system at finite
// time-scale separation eps, the frozen fast equation, and the recurrence
// diagnostic for the fast drift. These are the empirical counterparts of the
// averaging limit that the bi-level driver approximates.

struct coupled_state {
  ensemble X;
  std::vector<ensemble> Y;  // one sub-ensemble per X-particle
  double t = 0.0;
};

namespace detail {

// Fast steps must resolve the 1/eps-stiff drift: the effective fast step
// dt/eps is kept at or below this.
inline constexpr double fast_step_ref = 0.1;

inline double coupled_step_size(double dt, double eps) {
  return std::min(dt, eps * fast_step_ref);
}

}  // namespace detail

/// Euler-Maruyama integration of the coupled two-scale system. The Y-drift
/// and diffusion carry the 1/eps and 1/sqrt(eps) factors; the step size is
/// shrunk so the effective fast step never exceeds 0.1. Returns snapshots at
/// the requested times (clamped to step boundaries) plus the final state.
inline std::vector<coupled_state> simulate_coupled(
    const bi_level_problem& problem, const bi_level_params& params, double eps,
    double T, std::uint64_t seed, std::vector<double> sample_times = {}) {
  params.validate();
  if (!(eps > 0.0))
    throw std::invalid_argument("simulate_coupled: eps must be positive");
  if (!(T > 0.0))
    throw std::invalid_argument("simulate_coupled: horizon must be positive");

  const std::size_t n = problem.n;
  const std::size_t m = problem.m;
  const double dt_max = detail::coupled_step_size(params.dt, eps);
  const auto n_steps =
      static_cast<std::size_t>(std::ceil(T / dt_max - 1e-9));
  const double dt = T / static_cast<double>(n_steps);

  const step_params px{params.lambda1, params.sigma1, params.delta1, params.R1,
                       dt};
  const step_params py{params.lambda2 / eps, params.sigma2 / std::sqrt(eps),
                       params.delta2, params.R2, dt};

  coupled_state state;
  state.X = ensemble(params.N, n);
  {
    rng_stream init(seed, rng_site::init_x);
    state.X.fill_uniform(init, params.init_lo, params.init_hi);
  }
  state.Y.reserve(params.N);
  for (std::size_t i = 0; i < params.N; ++i) {
    state.Y.emplace_back(params.M, m);
    rng_stream init(seed, rng_site::init_y, i);
    state.Y.back().fill_uniform(init, params.init_lo, params.init_hi);
  }

  std::sort(sample_times.begin(), sample_times.end());
  std::size_t next_sample = 0;
  std::vector<coupled_state> out;
  while (next_sample < sample_times.size() && sample_times[next_sample] <= 0.0) {
    out.push_back(state);
    ++next_sample;
  }

  consensus_workspace ws;
  ensemble V(params.N, m);
  ensemble X_next(params.N, n);
  vec target(m), noise(std::max(n, m)), z(n);

  for (std::size_t step = 0; step < n_steps; ++step) {
    for (std::size_t i = 0; i < params.N; ++i) {
      ws.consensus_into(state.Y[i], params.beta, V.particle(i),
                        [&](std::size_t j) {
                          return problem.lower(state.X.particle(i),
                                               state.Y[i].particle(j));
                        });
    }
    vec& scaled = ws.scaled_buffer();
    scaled.resize(m);
    for (std::size_t i = 0; i < params.N; ++i) {
      rng_stream stream(seed, rng_site::coupled, step, i);
      const cspan vi = V.particle(i);

      for (std::size_t k = 0; k < m; ++k) target[k] = params.kappa * vi[k];
      std::span<double> ynoise(noise.data(), m);
      for (std::size_t j = 0; j < params.M; ++j) {
        stream.fill_normal(ynoise, std::sqrt(dt));
        detail::cbo_em_step_into(state.Y[i].particle(j), target, py, ynoise);
        if (!all_finite(state.Y[i].particle(j)))
          throw numerical_error("simulate_coupled: non-finite Y state at eps " +
                                std::to_string(eps) + ", step " +
                                std::to_string(step));
      }

      for (std::size_t k = 0; k < m; ++k) scaled[k] = vi[k] / params.kappa;
      ws.consensus_into(state.X, params.alpha, z, [&](std::size_t k) {
        return problem.upper(state.X.particle(k), scaled);
      });
      std::span<double> xnoise(noise.data(), n);
      stream.fill_normal(xnoise, std::sqrt(dt));
      auto xi_next = X_next.particle(i);
      const cspan xi = state.X.particle(i);
      std::copy(xi.begin(), xi.end(), xi_next.begin());
      detail::cbo_em_step_into(xi_next, z, px, xnoise);
      if (!all_finite(xi_next))
        throw numerical_error("simulate_coupled: non-finite X state at eps " +
                              std::to_string(eps) + ", step " +
                              std::to_string(step));
    }
    std::swap(state.X, X_next);
    state.t = static_cast<double>(step + 1) * dt;

    while (next_sample < sample_times.size() &&
           state.t >= sample_times[next_sample] - 1e-9) {
      out.push_back(state);
      ++next_sample;
    }
  }
  if (out.empty() || out.back().t < state.t) out.push_back(state);
  return out;
}

/// Integrates the fast system with the slow ensemble frozen and returns, per
/// slow particle, the running time average of the slow consensus point - the
/// discrete counterpart of averaging against the fast invariant measure.
inline std::vector<vec> frozen_fast_run(const ensemble& X,
                                        std::vector<ensemble> Y,
                                        const bi_level_problem& problem,
                                        const bi_level_params& params, double T,
                                        std::uint64_t seed) {
  params.validate();
  if (Y.size() != X.count())
    throw std::invalid_argument(
        "frozen_fast_run: need one Y sub-ensemble per slow particle");
  const std::size_t n = problem.n;
  const std::size_t m = problem.m;
  const std::size_t n_steps = detail::step_count(T, params.dtau, "frozen T");
  const step_params py = params.y_step();

  consensus_workspace ws;
  std::vector<vec> average(X.count(), vec(n, 0.0));
  vec v(m), target(m), noise(m), z(n);

  for (std::size_t step = 0; step < n_steps; ++step) {
    for (std::size_t i = 0; i < X.count(); ++i) {
      rng_stream stream(seed, rng_site::frozen, step, i);
      ws.consensus_into(Y[i], params.beta, v, [&](std::size_t j) {
        return problem.lower(X.particle(i), Y[i].particle(j));
      });
      vec& scaled = ws.scaled_buffer();
      scaled.resize(m);
      for (std::size_t k = 0; k < m; ++k) scaled[k] = v[k] / params.kappa;
      ws.consensus_into(X, params.alpha, z, [&](std::size_t k) {
        return problem.upper(X.particle(k), scaled);
      });
      // running mean; exact fixed point when z is constant in time
      const double inv = 1.0 / static_cast<double>(step + 1);
      for (std::size_t k = 0; k < n; ++k)
        average[i][k] += (z[k] - average[i][k]) * inv;

      for (std::size_t k = 0; k < m; ++k) target[k] = params.kappa * v[k];
      for (std::size_t j = 0; j < Y[i].count(); ++j) {
        stream.fill_normal(noise, std::sqrt(params.dtau));
        detail::cbo_em_step_into(Y[i].particle(j), target, py, noise);
        if (!all_finite(Y[i].particle(j)))
          throw numerical_error("frozen_fast_run: non-finite Y state at step " +
                                std::to_string(step));
      }
    }
  }
  return average;
}

struct recurrence_report {
  double inner_product = 0.0;  // <Y, B(x, Y)>
  double bound = 0.0;          // -lambda2 (xi_bar - kappa sqrt(M)) ||Y||^2
  double xi_bar = 1.0;         // smallest componentwise clamp factor
  double norm_sq = 0.0;        // ||Y||^2
  bool satisfied = false;
};

/// Evaluates the recurrence inequality of the fast drift at one state: the
/// inner product of the stacked Y-state with its drift must stay below
/// -lambda2 (xi_bar - kappa sqrt(M)) ||Y||^2.
inline recurrence_report drift_recurrence_check(
    const ensemble& X, const std::vector<ensemble>& Y,
    const bi_level_problem& problem, const bi_level_params& params) {
  if (Y.size() != X.count())
    throw std::invalid_argument(
        "drift_recurrence_check: need one Y sub-ensemble per slow particle");
  const std::size_t m = problem.m;
  consensus_workspace ws;
  vec v(m);

  recurrence_report report;
  for (std::size_t i = 0; i < X.count(); ++i) {
    ws.consensus_into(Y[i], params.beta, v, [&](std::size_t j) {
      return problem.lower(X.particle(i), Y[i].particle(j));
    });
    for (std::size_t j = 0; j < Y[i].count(); ++j) {
      const cspan yj = Y[i].particle(j);
      for (std::size_t k = 0; k < m; ++k) {
        const double gap = yj[k] - params.kappa * v[k];
        const double drift = -params.lambda2 *
                             psi_truncate_scalar(gap, params.R2);
        report.inner_product += yj[k] * drift;
        report.norm_sq += yj[k] * yj[k];
        const double xi =
            std::abs(gap) <= params.R2 ? 1.0 : params.R2 / std::abs(gap);
        report.xi_bar = std::min(report.xi_bar, xi);
      }
    }
  }
  const double M = static_cast<double>(Y.front().count());
  report.bound =
      -params.lambda2 * (report.xi_bar - params.kappa * std::sqrt(M)) *
      report.norm_sq;
  report.satisfied =
      report.inner_product <= report.bound + 1e-12 * (1.0 + std::abs(report.bound));
  return report;
}

struct eps_sweep_report {
  vec eps_values;     // strictly decreasing
  vec discrepancies;  // |E phi(X_T^eps) - E phi(X_T^solver)| per eps
  vec std_errors;     // standard error of each discrepancy estimate
  double solver_mean = 0.0;
  std::string observable = "tanh(||X||^2)";
  double kappa = 1.0;
  double horizon = 0.0;
  std::size_t seeds = 0;
};

namespace detail {

inline double tanh_norm_sq(cspan x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::tanh(s);
}

inline double mean_of(cspan v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance_of(cspan v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace detail

/// Runs the coupled system over a decreasing list of eps values and compares
/// the bounded observable of the final slow ensemble with the two-time-scale
/// solver run on the same seed set and horizon.
inline eps_sweep_report eps_sweep(const bi_level_problem& problem,
                                  const bi_level_params& params,
                                  const std::vector<double>& eps_values,
                                  double T, std::size_t n_seeds,
                                  std::uint64_t base_seed,
                                  unsigned workers = 0) {
  if (eps_values.empty())
    throw std::invalid_argument("eps_sweep: empty eps list");
  for (std::size_t k = 0; k + 1 < eps_values.size(); ++k)
    if (!(eps_values[k] > eps_values[k + 1]))
      throw std::invalid_argument("eps_sweep: eps must be strictly decreasing");
  if (n_seeds < 2)
    throw std::invalid_argument("eps_sweep: need at least two seeds");

  eps_sweep_report report;
  report.eps_values = eps_values;
  report.kappa = params.kappa;
  report.horizon = T;
  report.seeds = n_seeds;

  // One integration step for the whole sweep, chosen by the stiffest run, so
  // the slow-process discretization is identical across eps and only the
  // time-scale separation varies.
  bi_level_params coupled_params = params;
  coupled_params.dt =
      detail::coupled_step_size(params.dt, eps_values.back());

  bi_level_params solver_params = params;
  solver_params.Tx = T;
  solver_params.workers = 1;

  vec solver_phi(n_seeds, 0.0);
  parallel_for(n_seeds, workers, [&](std::size_t s) {
    const auto result =
        run_bilevel(problem, solver_params, base_seed + s);
    solver_phi[s] = detail::tanh_norm_sq(result.final_x.flat());
  });
  report.solver_mean = detail::mean_of(solver_phi);
  const double solver_var = detail::variance_of(solver_phi);

  for (double eps : eps_values) {
    vec phi(n_seeds, 0.0);
    parallel_for(n_seeds, workers, [&](std::size_t s) {
      const auto states =
          simulate_coupled(problem, coupled_params, eps, T, base_seed + s);
      phi[s] = detail::tanh_norm_sq(states.back().X.flat());
    });
    const double mu = detail::mean_of(phi);
    report.discrepancies.push_back(std::abs(mu - report.solver_mean));
    report.std_errors.push_back(
        std::sqrt((detail::variance_of(phi) + solver_var) /
                  static_cast<double>(n_seeds)));
  }
  return report;
}

}  // namespace mscbo
