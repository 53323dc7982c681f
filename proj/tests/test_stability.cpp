#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tcd/signal.hpp"
#include "tcd/stability.hpp"

using namespace tcd;

TEST_CASE("layer_stats closed cases") {
  const FrameSequence constant(10, Frame{3.0, 4.0});
  const auto c = layer_stats(constant);
  CHECK(c.magnitude == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(c.flux == 0.0);

  FrameSequence alternating;
  for (int t = 0; t < 9; ++t) alternating.push_back(t % 2 ? Frame{-1.0, 2.0, -2.0} : Frame{1.0, -2.0, 2.0});
  const auto a = layer_stats(alternating);
  CHECK(a.magnitude == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(a.flux == doctest::Approx(6.0).epsilon(1e-14));

  CHECK_THROWS_AS(layer_stats(FrameSequence(1, Frame{1.0})), std::invalid_argument);
}

TEST_CASE("layer_stats matches the loop oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto h = oracle::random_states(seed, 1, 30 + seed, 8);
    const auto got = layer_stats(h.layers[0]);
    const auto ref = oracle::magnitude_flux(h.layers[0]);
    CHECK(std::abs(got.magnitude - ref.m) <= 1e-9);
    CHECK(std::abs(got.flux - ref.f) <= 1e-9);
  }
}

TEST_CASE("layer_stability") {
  CHECK(layer_stability(1.0, 1.0, 1e-6) == doctest::Approx(1.0 / 2.000001).epsilon(1e-15));
  CHECK(layer_stability(1.0, 1.0, 1e-6) < 0.5);
  CHECK(layer_stability(1.0, 1.0, 1e-6) > 0.49999974);
  CHECK(layer_stability(0.0, 3.0, 1e-6) == 0.0);
  const double m = 100.0;
  CHECK(std::abs(layer_stability(m, 0.0, 1e-6) - 1.0) <= 1e-6 / m);
  CHECK_THROWS_AS(layer_stability(-1.0, 0.0, 1e-6), std::invalid_argument);
  CHECK_THROWS_AS(layer_stability(1.0, -1.0, 1e-6), std::invalid_argument);
}

TEST_CASE("pool_stability") {
  const std::vector<double> s = {0.2, 0.6, 0.7};
  const std::vector<double> equal = {0.3, 0.3, 0.3};
  const auto uniform = pool_stability(s, equal, 4.0);
  for (double w : uniform.weights) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(uniform.pooled == doctest::Approx(0.5).epsilon(1e-14));

  const std::vector<double> spread = {0.0, 0.5, 1.0};
  const auto zero_tau = pool_stability(s, spread, 0.0);
  for (double w : zero_tau.weights) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  const std::vector<double> two_s = {0.25, 0.75};
  const std::vector<double> r = {0.1, 0.9};
  const auto p = pool_stability(two_s, r, 4.0);
  const double e0 = std::exp(0.4), e1 = std::exp(3.6);
  CHECK(std::abs(p.weights[0] - e0 / (e0 + e1)) <= 1e-12);
  CHECK(std::abs(p.weights[1] - e1 / (e0 + e1)) <= 1e-12);
  CHECK(std::abs(p.pooled - (0.25 * e0 + 0.75 * e1) / (e0 + e1)) <= 1e-12);

  CHECK_THROWS_AS(pool_stability({}, {}, 4.0), std::invalid_argument);
  const std::vector<double> one = {0.5};
  CHECK_THROWS_AS(pool_stability(two_s, one, 4.0), std::invalid_argument);
}

TEST_CASE("window and scale maps") {
  CHECK(map_window(0.0, 8.0, 30.0) == 8.0);
  CHECK(map_window(1.0, 8.0, 30.0) == 30.0);
  CHECK(map_window(0.5, 8.0, 30.0) == 19.0);
  CHECK(map_scale(0.0, 0.3, 1.5) == 0.3);
  CHECK(map_scale(1.0, 0.3, 1.5) == 1.5);
  CHECK(map_scale(0.25, 0.3, 1.5) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK_THROWS_AS(map_window(1.2, 8.0, 30.0), std::invalid_argument);
  CHECK_THROWS_AS(map_scale(-0.1, 0.3, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(map_window(0.5, 30.0, 8.0), std::invalid_argument);
}

TEST_CASE("match_layer_ratios picks the same normalized depth") {
  const std::vector<double> dec = {0.1, 0.2, 0.3, 0.4};
  CHECK(match_layer_ratios(dec, 2) == std::vector<double>{0.2, 0.4});
  CHECK(match_layer_ratios(dec, 4) == dec);
  const std::vector<double> two = {0.3, 0.9};
  CHECK(match_layer_ratios(two, 2) == two);
  CHECK(match_layer_ratios(two, 1) == std::vector<double>{0.9});
}

TEST_CASE("estimate_stability on random fixtures") {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto h = oracle::random_states(seed, 3, 25, 4, 0.1 + 2.0 * u(gen));
    const std::vector<double> ratios = {u(gen), u(gen), u(gen)};
    const auto rep = estimate_stability(h, ratios, {});
    CHECK(rep.pooled >= 0.0);
    CHECK(rep.pooled <= 1.0);
    CHECK(rep.window_ms >= 8.0);
    CHECK(rep.window_ms <= 30.0);
    CHECK(rep.lambda >= 0.3);
    CHECK(rep.lambda <= 1.5);
    CHECK(rep.window_ms == doctest::Approx(8.0 + 22.0 * rep.pooled).epsilon(1e-12));
    double pooled = 0.0, wsum = 0.0;
    for (std::size_t l = 0; l < 3; ++l) {
      const auto ref = oracle::magnitude_flux(h.layers[l]);
      CHECK(std::abs(rep.per_layer[l].stability - ref.m / (ref.m + ref.f + 1e-6)) <= 1e-9);
      pooled += std::exp(4.0 * ratios[l]) * rep.per_layer[l].stability;
      wsum += std::exp(4.0 * ratios[l]);
    }
    CHECK(std::abs(rep.pooled - pooled / wsum) <= 1e-9);
  }
}

TEST_CASE("state blur never increases flux") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto h = oracle::random_states(100 + seed, 2, 40, 6);
    for (std::size_t w : {3u, 5u, 9u}) {
      const auto b = blur_states(h, w);
      for (std::size_t l = 0; l < 2; ++l)
        CHECK(layer_stats(b.layers[l]).flux <= layer_stats(h.layers[l]).flux + 1e-12);
    }
  }
}
