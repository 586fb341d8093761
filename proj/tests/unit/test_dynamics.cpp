#include <catch2/catch_amalgamated.hpp>

#include "mscbo/dynamics.hpp"

using namespace mscbo;

TEST_CASE("psi truncation clamps componentwise magnitudes") {
  CHECK(psi_truncate(vec{3.0, -15.0}, 10.0) == vec{3.0, -10.0});
  CHECK(psi_truncate(vec{0.0, 0.0}, 1.0) == vec{0.0, 0.0});
  CHECK(psi_truncate(vec{10.0, -10.0}, 10.0) == vec{10.0, -10.0});
  CHECK_THROWS_AS(psi_truncate(vec{1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("psi truncation is idempotent with bounded sup norm") {
  rng_stream stream(31, rng_site::diagnostics);
  for (int rep = 0; rep < 100; ++rep) {
    vec v(6);
    stream.fill_uniform(v, -40.0, 40.0);
    const double radius = stream.uniform(0.5, 20.0);
    const vec once = psi_truncate(v, radius);
    CHECK(psi_truncate(once, radius) == once);
    CHECK(linf_norm(once) <= radius);
  }
}

TEST_CASE("phi truncation returns clipped magnitudes in [0, R]") {
  CHECK(phi_truncate(vec{-3.0, 15.0}, 10.0) == vec{3.0, 10.0});
  CHECK(phi_truncate(vec{0.0}, 10.0) == vec{0.0});
  CHECK(phi_truncate(vec{10.0}, 10.0) == vec{10.0});
  rng_stream stream(37, rng_site::diagnostics);
  for (int rep = 0; rep < 100; ++rep) {
    vec v(4);
    stream.fill_uniform(v, -30.0, 30.0);
    const double radius = stream.uniform(0.5, 12.0);
    for (double c : phi_truncate(v, radius)) {
      CHECK(c >= 0.0);
      CHECK(c <= radius);
    }
  }
}

TEST_CASE("noise scale applies the floor") {
  CHECK(noise_scale(vec{0.0, 0.0}, 1e-5, 10.0) == vec{1e-5, 1e-5});
  CHECK(noise_scale(vec{2.0}, 0.0, 10.0) == vec{2.0});
  CHECK(noise_scale(vec{20.0}, 0.1, 10.0) == vec{10.1});
  rng_stream stream(41, rng_site::diagnostics);
  for (int rep = 0; rep < 50; ++rep) {
    vec v(5);
    stream.fill_uniform(v, -25.0, 25.0);
    const double delta = stream.uniform(0.0, 0.5);
    for (double c : noise_scale(v, delta, 10.0)) CHECK(c >= delta);
  }
}

TEST_CASE("em step handles drift, clamping and fixed points") {
  step_params p;
  p.lambda = 1.0;
  p.sigma = 0.0;
  p.delta = 0.0;
  p.radius = 10.0;
  p.dt = 0.1;

  // consensus is a fixed point when the noise floor is zero
  step_params noisy = p;
  noisy.sigma = 3.0;
  const vec at_consensus =
      cbo_em_step(vec{1.0, -2.0}, vec{1.0, -2.0}, noisy, vec{0.4, -0.9});
  CHECK(at_consensus == vec{1.0, -2.0});

  CHECK(cbo_em_step(vec{1.0}, vec{0.0}, p, vec{0.0}) == vec{0.9});

  step_params clamped = p;
  clamped.radius = 0.5;
  CHECK(cbo_em_step(vec{1.0}, vec{0.0}, clamped, vec{0.0}) == vec{0.95});

  CHECK_THROWS_AS(cbo_em_step(vec{1.0}, vec{0.0, 1.0}, p, vec{0.0}),
                  std::invalid_argument);
}

TEST_CASE("noise-free step contracts by exactly 1 - lambda dt") {
  rng_stream stream(43, rng_site::diagnostics);
  step_params p;
  p.sigma = 0.0;
  p.radius = 50.0;
  for (int rep = 0; rep < 50; ++rep) {
    vec particle(3), consensus(3);
    stream.fill_uniform(particle, -10.0, 10.0);
    stream.fill_uniform(consensus, -10.0, 10.0);
    p.lambda = stream.uniform(0.1, 5.0);
    p.dt = stream.uniform(0.01, 0.19);
    const vec out = cbo_em_step(particle, consensus, p, vec(3, 0.0));
    const double factor = 1.0 - p.lambda * p.dt;
    CHECK_THAT(l2_dist(out, consensus),
               Catch::Matchers::WithinRel(factor * l2_dist(particle, consensus),
                                          1e-13));
  }
}

TEST_CASE("em step has odd symmetry") {
  rng_stream stream(47, rng_site::diagnostics);
  step_params p;
  p.lambda = 1.2;
  p.sigma = 1.7;
  p.delta = 0.05;
  p.radius = 4.0;
  p.dt = 0.1;
  for (int rep = 0; rep < 50; ++rep) {
    vec particle(4), consensus(4), noise(4);
    stream.fill_uniform(particle, -8.0, 8.0);
    stream.fill_uniform(consensus, -8.0, 8.0);
    stream.fill_normal(noise, std::sqrt(p.dt));
    const vec pos = cbo_em_step(particle, consensus, p, noise);
    vec neg_particle = scaled(particle, -1.0);
    vec neg_consensus = scaled(consensus, -1.0);
    vec neg_noise = scaled(noise, -1.0);
    const vec neg = cbo_em_step(neg_particle, neg_consensus, p, neg_noise);
    for (std::size_t k = 0; k < 4; ++k) CHECK(neg[k] == -pos[k]);
  }
}

TEST_CASE("sampled increments are deterministic per substream") {
  rng_stream a(123, rng_site::phase, 4, 9);
  rng_stream b(123, rng_site::phase, 4, 9);
  const vec va = sample_increment(16, 0.1, a);
  const vec vb = sample_increment(16, 0.1, b);
  CHECK(va == vb);

  rng_stream c(123, rng_site::phase, 4, 10);
  CHECK(sample_increment(16, 0.1, c) != va);
}

TEST_CASE("sampled increments match the requested moments") {
  const std::size_t n = 100000;
  const double dt = 0.04;
  rng_stream stream(2024, rng_site::phase, 0, 0);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = sample_increment(1, dt, stream)[0];
    sum += w;
    sum_sq += w * w;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = sum_sq / static_cast<double>(n) - mean * mean;
  // standard-error band: 4 sqrt(dt/n) for the mean, 5% for the variance
  CHECK(std::abs(mean) <= 4.0 * std::sqrt(dt / static_cast<double>(n)));
  CHECK(std::abs(var - dt) <= 0.05 * dt);
}
