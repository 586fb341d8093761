#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include "mscbo/rng.hpp"
#include "mscbo/vec_ops.hpp"

namespace mscbo {

// Truncated anisotropic Euler-Maruyama stepping, shared by every driver.
// Drift magnitudes are clamped componentwise to the truncation radius, and
// the diagonal diffusion amplitude is floored at delta so it stays positive
// definite.

struct step_params {
  double lambda = 1.0;  // drift rate, > 0
  double sigma = 2.0;   // noise strength, >= 0
  double delta = 1e-5;  // noise floor, >= 0
  double radius = 10.0; // truncation radius, > 0
  double dt = 0.1;      // time step, > 0

  void validate() const {
    if (!(radius > 0.0) || !(dt > 0.0))
      throw std::invalid_argument(
          "step_params: radius and dt must be positive");
    if (lambda < 0.0 || sigma < 0.0 || delta < 0.0)
      throw std::invalid_argument(
          "step_params: lambda, sigma and delta must be nonnegative");
  }
};

inline double psi_truncate_scalar(double v, double radius) {
  if (v > radius) return radius;
  if (v < -radius) return -radius;
  return v;
}

inline double noise_scale_scalar(double v, double delta, double radius) {
  return delta + std::min(std::abs(v), radius);
}

/// Componentwise magnitude clamp to [-radius, radius].
inline vec psi_truncate(cspan v, double radius) {
  if (!(radius > 0.0))
    throw std::invalid_argument("psi_truncate: radius must be positive");
  vec out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k)
    out[k] = psi_truncate_scalar(v[k], radius);
  return out;
}

/// Componentwise min(|v_k|, radius); nonnegative output.
inline vec phi_truncate(cspan v, double radius) {
  if (!(radius > 0.0))
    throw std::invalid_argument("phi_truncate: radius must be positive");
  vec out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k)
    out[k] = std::min(std::abs(v[k]), radius);
  return out;
}

/// Diagonal of the diffusion matrix: delta + min(|v_k|, radius).
inline vec noise_scale(cspan v, double delta, double radius) {
  if (!(radius > 0.0) || delta < 0.0)
    throw std::invalid_argument(
        "noise_scale: radius must be positive and delta nonnegative");
  vec out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k)
    out[k] = noise_scale_scalar(v[k], delta, radius);
  return out;
}

namespace detail {

// In-place step; noise carries per-component variance p.dt already.
inline void cbo_em_step_into(std::span<double> particle, cspan consensus,
                             const step_params& p, cspan noise) {
  for (std::size_t k = 0; k < particle.size(); ++k) {
    const double gap = particle[k] - consensus[k];
    particle[k] += -p.lambda * psi_truncate_scalar(gap, p.radius) * p.dt +
                   p.sigma * noise_scale_scalar(gap, p.delta, p.radius) *
                       noise[k];
  }
}

}  // namespace detail

/// One anisotropic Euler-Maruyama update of a single particle toward the
/// given consensus point. `noise` must be a pre-sampled Gaussian increment
/// with per-component variance p.dt.
inline vec cbo_em_step(cspan particle, cspan consensus, const step_params& p,
                       cspan noise) {
  require_same_dim(particle, consensus, "cbo_em_step");
  require_same_dim(particle, noise, "cbo_em_step");
  p.validate();
  vec out(particle.begin(), particle.end());
  detail::cbo_em_step_into(out, consensus, p, noise);
  return out;
}

/// i.i.d. Gaussian increment with mean 0 and per-component variance dt.
inline vec sample_increment(std::size_t dim, double dt, rng_stream& stream) {
  if (!(dt > 0.0))
    throw std::invalid_argument("sample_increment: dt must be positive");
  vec out(dim);
  stream.fill_normal(out, std::sqrt(dt));
  return out;
}

}  // namespace mscbo
