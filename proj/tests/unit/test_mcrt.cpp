#include <doctest.h>

#include <cmath>
#include <random>

#include "livorlab/mcrt.hpp"
#include "support.hpp"

using namespace livorlab;
using namespace livorlab::mcrt;

namespace {

// Random stack in the tested envelope: 1-3 layers, mu_a in [0, 2], mu_s in
// [0.1, 20], g in [0, 0.95], n in [1, 1.5], finite or semi-infinite bottom.
LayerStack random_stack(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LayerStack s;
  s.ambient_n = 1.0;
  const int layers = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < layers; ++i) {
    Layer l;
    l.mu_a = 2.0 * u(rng);
    l.mu_s = 0.1 + 19.9 * u(rng);
    l.g = 0.95 * u(rng);
    l.n = 1.0 + 0.5 * u(rng);
    l.thickness_mm = (i + 1 == layers && u(rng) < 0.5) ? kInfiniteThickness : 0.05 + 1.95 * u(rng);
    s.layers.push_back(l);
  }
  return s;
}

SimConfig config(std::uint64_t photons, std::uint64_t seed, bool roulette = true) {
  SimConfig c;
  c.photon_count = photons;
  c.seed = seed;
  c.enable_roulette = roulette;
  return c;
}

}  // namespace

TEST_SUITE("mcrt") {

TEST_CASE("specular reflectance closed forms") {
  CHECK(specular_reflectance(1.0, 1.0) == 0.0);
  CHECK(specular_reflectance(1.0, 1.5) == doctest::Approx(0.04).epsilon(1e-15));
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> n(1.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    const double a = n(rng), b = n(rng);
    CHECK(specular_reflectance(a, b) == specular_reflectance(b, a));
  }
}

TEST_CASE("fresnel reflectance at normal incidence and beyond the critical angle") {
  double cos_t = 0.0;
  CHECK(fresnel_reflectance(1.0, 1.5, 1.0, cos_t) == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(cos_t == doctest::Approx(1.0));
  // sin(theta_c) = 1/1.5; 60 degrees is past it
  CHECK(fresnel_reflectance(1.5, 1.0, std::cos(60.0 * 3.14159265358979 / 180.0), cos_t) == 1.0);
  CHECK(fresnel_reflectance(1.4, 1.4, 0.3, cos_t) == 0.0);
}

TEST_CASE("property: weight is conserved without roulette") {
  std::mt19937_64 rng(20240);
  for (int trial = 0; trial < 20; ++trial) {
    const auto stack = random_stack(rng);
    const auto r = simulate(stack, config(2'000, 100 + trial, false), 1);
    CHECK(std::abs(r.total() - 1.0) <= 1e-9);
    CHECK(r.r_specular >= 0.0);
    CHECK(r.r_diffuse >= 0.0);
    CHECK(r.transmittance >= 0.0);
    CHECK(r.absorbed >= 0.0);
    if (stack.layers.back().semi_infinite()) CHECK(r.transmittance == 0.0);
  }
}

TEST_CASE("roulette conserves weight in expectation") {
  const LayerStack stack{1.0, {Layer{0.3, 8.0, 0.8, 1.4, 1.5}}};
  double sum = 0.0, sum2 = 0.0;
  const int seeds = 30;
  for (int s = 0; s < seeds; ++s) {
    const double t = simulate(stack, config(2'000, 900 + s), 1).total();
    sum += t;
    sum2 += t * t;
  }
  const double mean = sum / seeds;
  const double se = std::sqrt(std::max(sum2 / seeds - mean * mean, 0.0) / (seeds - 1));
  CHECK(std::abs(mean - 1.0) <= 3.0 * se + 1e-12);
}

TEST_CASE("simulate is bit-identical across worker counts and runs") {
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 3; ++trial) {
    const auto stack = random_stack(rng);
    auto cfg = config(12'000, 5 + trial);
    cfg.batch_size = 1'000;
    const auto ref = simulate(stack, cfg, 1);
    CHECK(simulate(stack, cfg, 1) == ref);
    CHECK(simulate(stack, cfg, 2) == ref);
    CHECK(simulate(stack, cfg, 8) == ref);
  }
}

TEST_CASE("different seeds give different tallies") {
  const LayerStack stack{1.0, {Layer{0.1, 5.0, 0.5, 1.4}}};
  CHECK_FALSE(simulate(stack, config(2'000, 1), 1) == simulate(stack, config(2'000, 2), 1));
}

TEST_CASE("Beer-Lambert slab") {
  const LayerStack stack{1.0, {Layer{1.0, 0.0, 0.0, 1.0, 1.0}}};
  const auto r = simulate(stack, config(200'000, 3), 1);
  CHECK(std::abs(r.transmittance - std::exp(-1.0)) <= 3.0 * r.transmittance_stderr);
  CHECK(r.r_diffuse == 0.0);
}

TEST_CASE("specular reflection is deducted at entry") {
  const LayerStack stack{1.0, {Layer{1.0, 0.0, 0.0, 1.5, 1.0}}};
  const auto r = simulate(stack, config(1'000, 3), 1);
  CHECK(r.r_specular == doctest::Approx(0.04).epsilon(1e-12));
}

TEST_CASE("matched, non-absorbing slab: reflected plus transmitted is one") {
  const LayerStack stack{1.0, {Layer{0.0, 5.0, 0.7, 1.0, 0.8}}};
  const auto r = simulate(stack, config(20'000, 8), 1);
  const double se = std::hypot(r.r_diffuse_stderr, r.transmittance_stderr);
  CHECK(std::abs(r.r_diffuse + r.transmittance - 1.0) <= 3.0 * se + 1e-12);
}

TEST_CASE("stderr shrinks as the inverse square root of photon count") {
  const LayerStack stack{1.0, {Layer{0.5, 2.0, 0.5, 1.0, 0.5}}};
  const auto small = simulate(stack, config(10'000, 4), 1);
  const auto large = simulate(stack, config(1'000'000, 4), 1);
  const double ratio = small.r_diffuse_stderr / large.r_diffuse_stderr;
  CHECK(ratio == doctest::Approx(10.0).epsilon(0.2));
}

TEST_CASE("semi-infinite reflectance falls with mu_a and rises with mu_s'") {
  auto run = [](double mu_a, double mu_s) {
    const LayerStack stack{1.0, {Layer{mu_a, mu_s, 0.0, 1.4}}};
    return simulate(stack, config(5'000, 21), 1);
  };
  const double mus[] = {0.5, 2.0, 8.0};
  const double mua[] = {0.02, 0.2, 2.0};
  for (double s : mus) {
    for (std::size_t i = 0; i + 1 < 3; ++i) {
      const auto a = run(mua[i], s), b = run(mua[i + 1], s);
      CHECK(b.r_diffuse <= a.r_diffuse + 3.0 * std::hypot(a.r_diffuse_stderr, b.r_diffuse_stderr));
    }
  }
  for (double a : mua) {
    for (std::size_t i = 0; i + 1 < 3; ++i) {
      const auto x = run(a, mus[i]), y = run(a, mus[i + 1]);
      CHECK(y.r_diffuse >= x.r_diffuse - 3.0 * std::hypot(x.r_diffuse_stderr, y.r_diffuse_stderr));
    }
  }
}

TEST_CASE("stack and config validation") {
  CHECK_THROWS_AS(simulate(LayerStack{1.0, {}}, config(10, 1)), Error);
  CHECK_THROWS_AS(simulate(LayerStack{1.0, {Layer{-1.0, 1.0, 0.0, 1.0}}}, config(10, 1)), Error);
  CHECK_THROWS_AS(simulate(LayerStack{1.0, {Layer{0.1, 1.0, 1.0, 1.0}}}, config(10, 1)), Error);
  CHECK_THROWS_AS(simulate(LayerStack{1.0, {Layer{0.1, 1.0, 0.0, 1.0}, Layer{0.1, 1.0, 0.0, 1.0, 1.0}}}, config(10, 1)),
                  Error);
  CHECK_THROWS_AS(simulate(LayerStack{1.0, {Layer{0.1, 1.0, 0.0, 1.0}}}, config(0, 1)), Error);
}

TEST_CASE("stream generator: distinct streams, values in (0, 1]") {
  StreamRng a(1, 0), b(1, 1), c(1, 0);
  bool differ = false;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.uniform();
    CHECK(x > 0.0);
    CHECK(x <= 1.0);
    CHECK(x == c.uniform());
    differ |= x != b.uniform();
  }
  CHECK(differ);
}

}  // TEST_SUITE
