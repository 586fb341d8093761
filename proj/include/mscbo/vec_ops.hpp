#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mscbo {

using vec = std::vector<double>;
using cspan = std::span<const double>;

inline void require_same_dim(cspan a, cspan b, const char* what) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
}

inline bool all_finite(cspan v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double l2_norm(cspan v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double linf_norm(cspan v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double l2_dist(cspan a, cspan b) {
  require_same_dim(a, b, "l2_dist");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

inline vec scaled(cspan v, double c) {
  vec out(v.begin(), v.end());
  for (auto& x : out) x *= c;
  return out;
}

}  // namespace mscbo
