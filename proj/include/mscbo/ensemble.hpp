#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "mscbo/rng.hpp"
#include "mscbo/vec_ops.hpp"

namespace mscbo {

/// A population of equally sized particles, stored contiguously row-major.
class ensemble {
 public:
  ensemble() : count_(0), dim_(0) {}

  ensemble(std::size_t count, std::size_t dim)
      : count_(count), dim_(dim), data_(count * dim, 0.0) {
    if (count == 0 || dim == 0)
      throw std::invalid_argument("ensemble: count and dim must be positive");
  }

  static ensemble from_particles(const std::vector<vec>& particles) {
    if (particles.empty())
      throw std::invalid_argument("ensemble: empty particle list");
    ensemble e(particles.size(), particles.front().size());
    for (std::size_t i = 0; i < particles.size(); ++i) {
      if (particles[i].size() != e.dim_)
        throw std::invalid_argument("ensemble: ragged particle dimensions");
      std::copy(particles[i].begin(), particles[i].end(),
                e.data_.begin() + static_cast<std::ptrdiff_t>(i * e.dim_));
    }
    return e;
  }

  std::size_t count() const { return count_; }
  std::size_t dim() const { return dim_; }

  std::span<double> particle(std::size_t i) {
    return {data_.data() + i * dim_, dim_};
  }
  cspan particle(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }

  std::span<double> flat() { return data_; }
  cspan flat() const { return data_; }

  vec mean() const {
    vec m(dim_, 0.0);
    for (std::size_t i = 0; i < count_; ++i) {
      const cspan p = particle(i);
      for (std::size_t k = 0; k < dim_; ++k) m[k] += p[k];
    }
    for (auto& x : m) x /= static_cast<double>(count_);
    return m;
  }

  void fill_uniform(rng_stream& stream, double lo, double hi) {
    stream.fill_uniform(data_, lo, hi);
  }

  bool operator==(const ensemble& other) const = default;

 private:
  std::size_t count_;
  std::size_t dim_;
  std::vector<double> data_;
};

}  // namespace mscbo
