#pragma once

#include <cmath>
#include <cstddef>
#include <iostream>
#include <stdexcept>
#include <string>

#include "mscbo/vec_ops.hpp"

namespace mscbo {

/// A run counts as successful when its total distance to the known optimum is
/// at most this.
inline constexpr double success_threshold = 0.25;

/// Raised when a run produces non-finite objective values or particle states;
/// the CLI maps it to exit code 2.
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct trace_entry {
  std::size_t step = 0;
  vec mean_x;
  vec mean_consensus;
  double best_upper = 0.0;
};

namespace detail {

// floor(T/dt) with a guard against 49.999... artifacts; warns when T is not
// an integer multiple of dt.
inline std::size_t step_count(double horizon, double dt, const char* name) {
  if (!(horizon >= dt))
    throw std::invalid_argument(std::string(name) +
                                ": horizon must be at least one time step");
  const double ratio = horizon / dt;
  const auto steps = static_cast<std::size_t>(std::floor(ratio + 1e-9));
  if (std::abs(horizon - static_cast<double>(steps) * dt) >
      1e-6 * std::max(1.0, std::abs(horizon))) {
    std::cerr << "warning: " << name << " horizon " << horizon
              << " is not an integer multiple of the step " << dt
              << "; running " << steps << " steps\n";
  }
  return steps;
}

inline void check_particle_state(cspan state, std::size_t outer_step,
                                 std::size_t branch, const char* population,
                                 double& max_abs) {
  for (double x : state) {
    if (!std::isfinite(x))
      throw numerical_error("non-finite " + std::string(population) +
                            " state at outer step " +
                            std::to_string(outer_step) + ", branch " +
                            std::to_string(branch));
    max_abs = std::max(max_abs, std::abs(x));
  }
}

}  // namespace detail

}  // namespace mscbo
