#pragma once

#include <cassert>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "mscbo/ensemble.hpp"
#include "mscbo/vec_ops.hpp"

namespace mscbo {

// Exponentially weighted consensus points. Weights are always computed after
// shifting the objective values by their minimum, so the argmin particle
// carries unnormalized weight exactly 1 and the normalizer never drops below
// 1, even at sharpness 1e15.

struct weight_vector {
  vec w;  // nonnegative, sums to 1
};

namespace detail {

// exp(z) underflows to 0 below roughly -745; short-circuit to keep the
// behavior identical across platforms and avoid FP exceptions.
inline double stabilized_exp(double z) { return z < -745.0 ? 0.0 : std::exp(z); }

// Writes the unnormalized shifted-exponential weights and returns their sum
// (always >= 1).
inline double stabilized_weights_into(cspan values, double sharpness,
                                      std::span<double> out) {
  if (sharpness < 0.0 || !std::isfinite(sharpness))
    throw std::invalid_argument("stabilized_weights: sharpness must be >= 0");
  double lo = values[0];
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (!std::isfinite(values[j]))
      throw std::runtime_error(
          "stabilized_weights: non-finite objective value for particle " +
          std::to_string(j));
    lo = std::min(lo, values[j]);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    out[j] = stabilized_exp(-sharpness * (values[j] - lo));
    sum += out[j];
  }
  // the argmin weight is exactly 1, so the normalizer never underflows
  assert(sum >= 1.0);
  return sum;
}

// out = sum_j w[j] * particle_j / wsum, componentwise.
inline void weighted_mean_into(const ensemble& pop, cspan w, double wsum,
                               std::span<double> out) {
  for (auto& x : out) x = 0.0;
  for (std::size_t j = 0; j < pop.count(); ++j) {
    const cspan p = pop.particle(j);
    const double wj = w[j];
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += wj * p[k];
  }
  for (auto& x : out) x /= wsum;
}

}  // namespace detail

inline weight_vector stabilized_weights(cspan values, double sharpness) {
  if (values.empty())
    throw std::invalid_argument("stabilized_weights: empty value list");
  weight_vector wv;
  wv.w.resize(values.size());
  const double sum = detail::stabilized_weights_into(values, sharpness, wv.w);
  for (auto& w : wv.w) w /= sum;
  return wv;
}

inline vec weighted_mean(const ensemble& particles,
                         const weight_vector& weights) {
  if (weights.w.size() != particles.count())
    throw std::invalid_argument(
        "weighted_mean: weight count does not match population size");
  double wsum = 0.0;
  for (double w : weights.w) wsum += w;
  vec out(particles.dim());
  detail::weighted_mean_into(particles, weights.w, wsum, out);
  return out;
}

namespace detail {

// (1-gamma) prev + gamma fresh, written so that prev == fresh is an exact
// fixed point and gamma == 1 replaces exactly.
inline double fla_mix(double prev, double fresh, double gamma) {
  return gamma == 1.0 ? fresh : prev + gamma * (fresh - prev);
}

}  // namespace detail

/// Running convex-combination update z <- (1-gamma) z + gamma z'.
inline vec fla_update(cspan prev, cspan fresh, double gamma) {
  require_same_dim(prev, fresh, "fla_update");
  if (!(gamma > 0.0) || gamma > 1.0)
    throw std::invalid_argument("fla_update: gamma must be in (0, 1]");
  vec out(prev.size());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = detail::fla_mix(prev[k], fresh[k], gamma);
  return out;
}

/// Scratch space for consensus computations in the solver loops; reusing it
/// keeps the inner iterations allocation-free.
class consensus_workspace {
 public:
  // Weighted mean of pop under stabilized weights of value_fn(j).
  template <class ValueFn>
  void consensus_into(const ensemble& pop, double sharpness,
                      std::span<double> out, ValueFn&& value_fn) {
    values_.resize(pop.count());
    weights_.resize(pop.count());
    for (std::size_t j = 0; j < pop.count(); ++j) values_[j] = value_fn(j);
    const double wsum =
        detail::stabilized_weights_into(values_, sharpness, weights_);
    detail::weighted_mean_into(pop, weights_, wsum, out);
#ifndef NDEBUG
    for (std::size_t k = 0; k < out.size(); ++k) {
      double lo = pop.particle(0)[k], hi = lo;
      for (std::size_t j = 1; j < pop.count(); ++j) {
        lo = std::min(lo, pop.particle(j)[k]);
        hi = std::max(hi, pop.particle(j)[k]);
      }
      assert(out[k] >= lo - 1e-12 && out[k] <= hi + 1e-12);
    }
#endif
  }

  vec& scaled_buffer() { return scaled_; }

 private:
  vec values_;
  vec weights_;
  vec scaled_;
};

/// Consensus of the Y-population for frozen x, weighted by exp(-beta G).
template <class LowerFn>
vec y_consensus(cspan x, const ensemble& Y, LowerFn&& G, double beta) {
  consensus_workspace ws;
  vec out(Y.dim());
  ws.consensus_into(Y, beta, out,
                    [&](std::size_t j) { return G(x, Y.particle(j)); });
  return out;
}

/// Consensus of the X-population, weighted by exp(-alpha F(X^k, y_ref/kappa)).
template <class UpperFn>
vec x_consensus(const ensemble& X, cspan y_ref, UpperFn&& F, double alpha,
                double kappa) {
  if (!(kappa > 0.0))
    throw std::invalid_argument("x_consensus: kappa must be positive");
  consensus_workspace ws;
  vec& y_scaled = ws.scaled_buffer();
  y_scaled.assign(y_ref.begin(), y_ref.end());
  for (auto& v : y_scaled) v /= kappa;
  vec out(X.dim());
  ws.consensus_into(X, alpha, out, [&](std::size_t k) {
    return F(X.particle(k), y_scaled);
  });
  return out;
}

}  // namespace mscbo
