#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

#include "mscbo/vec_ops.hpp"

namespace mscbo {

// Benchmark objectives and the composite bi-/tri-level test problems built
// from them. All of them attain their global minimum value 0, at the origin
// unless stated otherwise.

using bilevel_fn = std::function<double(cspan x, cspan y)>;
using trilevel_fn = std::function<double(cspan x, cspan y, cspan r)>;

struct objective_fn {
  std::function<double(cspan)> eval;
  std::size_t dim = 0;
};

struct optimum_pair {
  vec x;
  vec y;
};

struct optimum_triple {
  vec x;
  vec y;
  vec r;
};

struct bi_level_problem {
  bilevel_fn upper;  // F(x, y), minimized over x
  bilevel_fn lower;  // G(x, y), minimized over y for frozen x
  std::size_t n = 0;
  std::size_t m = 0;
  std::optional<optimum_pair> optimum;
};

struct tri_level_problem {
  trilevel_fn upper;   // F(x, y, r)
  trilevel_fn middle;  // G(x, y, r)
  trilevel_fn inner;   // E(x, y, r)
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t p = 0;
  std::optional<optimum_triple> optimum;
};

namespace detail {

inline void require_finite_input(cspan x, const char* what) {
  for (std::size_t k = 0; k < x.size(); ++k)
    if (!std::isfinite(x[k]))
      throw std::invalid_argument(std::string(what) +
                                  ": non-finite input at component " +
                                  std::to_string(k));
}

}  // namespace detail

inline double ackley(cspan x) {
  if (x.empty()) throw std::invalid_argument("ackley: empty input");
  detail::require_finite_input(x, "ackley");
  const double d = static_cast<double>(x.size());
  double sq = 0.0, cs = 0.0;
  for (double xi : x) {
    sq += xi * xi;
    cs += std::cos(2.0 * std::numbers::pi * xi);
  }
  return -20.0 * std::exp(-0.2 * std::sqrt(sq / d)) - std::exp(cs / d) +
         std::numbers::e + 20.0;
}

inline double rastrigin(cspan x) {
  detail::require_finite_input(x, "rastrigin");
  double s = 0.0;
  for (double xi : x)
    s += xi * xi + 1.5 * (1.0 - std::cos(2.0 * std::numbers::pi * xi));
  return s;
}

// Levy variant with arguments 1 + x_i/4, so the minimizer sits at the origin.
// The middle factor carries a +1 inside its sin^2 argument.
inline double levy(cspan x) {
  if (x.size() < 2) throw std::invalid_argument("levy: requires dim >= 2");
  detail::require_finite_input(x, "levy");
  constexpr double pi = std::numbers::pi;
  const std::size_t d = x.size();
  const double s0 = std::sin(pi * (1.0 + x[0] / 4.0));
  double total = s0 * s0;
  for (std::size_t i = 0; i + 1 < d; ++i) {
    const double w = x[i] / 4.0;
    const double s = std::sin(pi * (1.0 + w) + 1.0);
    total += w * w * (1.0 + 10.0 * s * s);
  }
  const double wd = x[d - 1] / 4.0;
  const double sd = std::sin(2.0 * pi * (1.0 + wd));
  total += wd * wd * (1.0 + sd * sd);
  return total;
}

namespace detail {

// Componentwise difference into a per-thread scratch buffer, to keep the
// composite objectives allocation-free in the solver loops.
inline cspan diff_scratch(cspan a, cspan b) {
  thread_local vec scratch;
  scratch.resize(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) scratch[k] = a[k] - b[k];
  return scratch;
}

inline double sum_sq_diff(cspan a, cspan b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

inline double sum_sq(cspan a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

inline double dot(cspan a, cspan b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline vec ones(std::size_t d) { return vec(d, 1.0); }
inline vec zeros(std::size_t d) { return vec(d, 0.0); }

}  // namespace detail

/// Reduces min_x max_y F to a bi-level problem by minimizing G = -F at the
/// lower level.
inline bi_level_problem minmax_as_bilevel(
    bilevel_fn F, std::size_t n, std::size_t m,
    std::optional<optimum_pair> saddle = std::nullopt) {
  bi_level_problem prob;
  prob.upper = F;
  prob.lower = [F](cspan x, cspan y) { return -F(x, y); };
  prob.n = n;
  prob.m = m;
  prob.optimum = std::move(saddle);
  return prob;
}

/// The min-max benchmark couplings, keyed "a".."d". All have their saddle
/// point at the origin.
inline bi_level_problem builtin_minmax(const std::string& id, std::size_t d) {
  using detail::dot;
  using detail::sum_sq;
  if (id == "c" && d < 2)
    throw std::invalid_argument("min-max function c requires dim >= 2");
  bilevel_fn F;
  if (id == "a") {
    F = [](cspan x, cspan y) { return ackley(x) - ackley(y); };
  } else if (id == "b") {
    F = [](cspan x, cspan y) {
      return rastrigin(x) - rastrigin(y) - 2.0 * dot(x, y);
    };
  } else if (id == "c") {
    F = [](cspan x, cspan y) { return levy(x) - levy(y); };
  } else if (id == "d") {
    F = [](cspan x, cspan y) { return sum_sq(x) - sum_sq(y) - 2.0 * dot(x, y); };
  } else {
    throw std::invalid_argument("unknown min-max function id: " + id);
  }
  return minmax_as_bilevel(std::move(F), d, d,
                           optimum_pair{detail::zeros(d), detail::zeros(d)});
}

/// The bi-level benchmark problems, keyed "i".."vi". The optimum is the
/// origin except for (ii), whose solution is the all-ones pair.
inline bi_level_problem builtin_bilevel(const std::string& id, std::size_t d) {
  using detail::diff_scratch;
  using detail::dot;
  using detail::sum_sq;
  using detail::sum_sq_diff;

  if (id == "vi" && d < 2)
    throw std::invalid_argument("bi-level problem vi requires dim >= 2");

  bi_level_problem prob;
  prob.n = prob.m = d;
  prob.optimum = optimum_pair{detail::zeros(d), detail::zeros(d)};

  const bilevel_fn g_quadratic = [](cspan x, cspan y) {
    return sum_sq_diff(x, y);
  };
  const bilevel_fn g_ackley = [](cspan x, cspan y) {
    return ackley(diff_scratch(x, y));
  };

  if (id == "i") {
    prob.upper = [](cspan x, cspan y) { return sum_sq(x) + sum_sq(y); };
    prob.lower = g_quadratic;
  } else if (id == "ii") {
    prob.upper = [](cspan x, cspan y) {
      double s = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k)
        s += (x[k] - 1.0) * (x[k] - 1.0) + (y[k] - 1.0) * (y[k] - 1.0);
      return s;
    };
    prob.lower = g_quadratic;
    prob.optimum = optimum_pair{detail::ones(d), detail::ones(d)};
  } else if (id == "iii") {
    prob.upper = [](cspan x, cspan y) {
      return sum_sq(x) + sum_sq(y) + 2.0 * dot(x, y);
    };
    prob.lower = g_quadratic;
  } else if (id == "iv") {
    prob.upper = [](cspan x, cspan y) { return ackley(x) + ackley(y); };
    prob.lower = g_quadratic;
  } else if (id == "v") {
    prob.upper = [](cspan x, cspan y) {
      return rastrigin(x) + rastrigin(y) + 2.0 * dot(x, y);
    };
    prob.lower = g_ackley;
  } else if (id == "vi") {
    prob.upper = [](cspan x, cspan y) { return levy(x) + levy(y); };
    prob.lower = g_ackley;
  } else {
    throw std::invalid_argument("unknown bi-level problem id: " + id);
  }
  return prob;
}

/// The tri-level benchmark problems, keyed "A".."C". The optimum is the
/// origin except for (C), whose solution is all-ones in all three blocks.
inline tri_level_problem builtin_trilevel(const std::string& id,
                                          std::size_t d) {
  using detail::diff_scratch;
  using detail::sum_sq;
  using detail::sum_sq_diff;
  if ((id == "A" || id == "B") && d < 2)
    throw std::invalid_argument("tri-level problem " + id +
                                " requires dim >= 2");

  tri_level_problem prob;
  prob.n = prob.m = prob.p = d;
  prob.optimum =
      optimum_triple{detail::zeros(d), detail::zeros(d), detail::zeros(d)};

  if (id == "A") {
    prob.upper = [](cspan x, cspan y, cspan) { return sum_sq(x) + sum_sq(y); };
    prob.middle = [](cspan x, cspan y, cspan) {
      return levy(diff_scratch(x, y));
    };
    prob.inner = [](cspan, cspan y, cspan r) {
      return levy(diff_scratch(r, y));
    };
  } else if (id == "B") {
    prob.upper = [](cspan x, cspan y, cspan r) {
      return sum_sq(x) + sum_sq(y) + sum_sq_diff(r, x);
    };
    prob.middle = [](cspan x, cspan y, cspan) {
      return levy(diff_scratch(x, y));
    };
    prob.inner = [](cspan, cspan y, cspan r) {
      return rastrigin(diff_scratch(r, y));
    };
  } else if (id == "C") {
    prob.upper = [](cspan x, cspan y, cspan r) {
      double s = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k)
        s += (x[k] - 1.0) * (x[k] - 1.0) + (y[k] - 1.0) * (y[k] - 1.0) +
             (r[k] - 1.0) * (r[k] - 1.0);
      return s;
    };
    prob.middle = [](cspan x, cspan y, cspan) { return sum_sq_diff(y, x); };
    prob.inner = [](cspan, cspan y, cspan r) { return sum_sq_diff(r, y); };
    prob.optimum =
        optimum_triple{detail::ones(d), detail::ones(d), detail::ones(d)};
  } else {
    throw std::invalid_argument("unknown tri-level problem id: " + id);
  }
  return prob;
}

using builtin_problem_t = std::variant<bi_level_problem, tri_level_problem>;

inline bool is_bilevel_id(const std::string& id) {
  return id == "i" || id == "ii" || id == "iii" || id == "iv" || id == "v" ||
         id == "vi";
}
inline bool is_trilevel_id(const std::string& id) {
  return id == "A" || id == "B" || id == "C";
}
inline bool is_minmax_id(const std::string& id) {
  return id == "a" || id == "b" || id == "c" || id == "d";
}

/// Looks up any benchmark id: bi-level "i".."vi", tri-level "A".."C", or
/// min-max "a".."d" (routed through the G = -F reduction).
inline builtin_problem_t builtin_problem(const std::string& id,
                                         std::size_t d) {
  if (is_bilevel_id(id)) return builtin_bilevel(id, d);
  if (is_trilevel_id(id)) return builtin_trilevel(id, d);
  if (is_minmax_id(id)) return builtin_minmax(id, d);
  throw std::invalid_argument("unknown benchmark id: " + id);
}

}  // namespace mscbo
