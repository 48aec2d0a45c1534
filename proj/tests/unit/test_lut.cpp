#include <doctest.h>

#include <cmath>
#include <random>

#include "livorlab/lut.hpp"
#include "support.hpp"

using namespace livorlab;
using namespace livorlab::mcrt;

namespace {

SimConfig sim(std::uint64_t photons, std::uint64_t seed) {
  SimConfig c;
  c.photon_count = photons;
  c.seed = seed;
  return c;
}

LutAxis axis(std::string_view name, std::vector<double> nodes) { return {std::string(name), std::move(nodes)}; }

}  // namespace

TEST_SUITE("lut") {

TEST_CASE("1x1 grid equals a direct simulation") {
  const auto tmpl = default_lut_template();
  const auto lut = build_lut(tmpl, {axis(kAxisMuA, {0.3}), axis(kAxisMuSPrime, {2.0})}, sim(3'000, 77), 1);
  auto stack = tmpl.stack;
  stack.layers[tmpl.variable_layer].mu_a = 0.3;
  stack.layers[tmpl.variable_layer].mu_s = 2.0 / (1.0 - stack.layers[tmpl.variable_layer].g);
  const auto direct = simulate(stack, sim(3'000, 77), 1);
  REQUIRE(lut.values().size() == 1);
  CHECK(lut.values()[0] == direct.r_diffuse);
  CHECK(lut.stderrs()[0] == direct.r_diffuse_stderr);
}

TEST_CASE("default template and axes") {
  const auto t = default_lut_template();
  REQUIRE(t.stack.layers.size() == 1);
  CHECK(t.stack.layers[0].n == 1.4);
  CHECK(t.stack.layers[0].semi_infinite());
  CHECK(t.stack.ambient_n == 1.0);
  const auto axes = default_lut_axes();
  REQUIRE(axes.size() == 2);
  CHECK(axes[0].nodes.size() == 16);
  CHECK(axes[0].nodes.front() == doctest::Approx(0.005));
  CHECK(axes[0].nodes.back() == doctest::Approx(5.0));
  CHECK(axes[1].nodes.size() == 12);
  CHECK(axes[1].nodes.front() == doctest::Approx(0.3));
  CHECK(axes[1].nodes.back() == doctest::Approx(10.0));
}

TEST_CASE("interpolation: node identity, midpoint mean, convex combination") {
  const auto& lut = testing::small_lut();
  const auto& a = lut.axes()[lut.axis_index(kAxisMuA)].nodes;
  const auto& s = lut.axes()[lut.axis_index(kAxisMuSPrime)].nodes;
  auto at = [&](double x, double y) {
    double c[2];
    c[lut.axis_index(kAxisMuA)] = x;
    c[lut.axis_index(kAxisMuSPrime)] = y;
    return lut_reflectance(lut, c);
  };
  auto node = [&](std::size_t i, std::size_t j) {
    std::size_t idx[2];
    idx[lut.axis_index(kAxisMuA)] = i;
    idx[lut.axis_index(kAxisMuSPrime)] = j;
    return lut.values()[lut.flat_index(idx)];
  };
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) CHECK(at(a[i], s[j]) == node(i, j));

  CHECK(at(0.5 * (a[3] + a[4]), s[2]) == doctest::Approx(0.5 * (node(3, 2) + node(4, 2))).epsilon(1e-14));

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t i = rng() % (a.size() - 1), j = rng() % (s.size() - 1);
    const double x = a[i] + u(rng) * (a[i + 1] - a[i]);
    const double y = s[j] + u(rng) * (s[j + 1] - s[j]);
    const double corners[] = {node(i, j), node(i + 1, j), node(i, j + 1), node(i + 1, j + 1)};
    const double v = at(x, y);
    CHECK(v >= *std::min_element(std::begin(corners), std::end(corners)) - 1e-15);
    CHECK(v <= *std::max_element(std::begin(corners), std::end(corners)) + 1e-15);
  }
}

TEST_CASE("no extrapolation") {
  const auto& lut = testing::small_lut();
  double c[2] = {0.001, 1.0};
  if (lut.axis_index(kAxisMuA) == 1) std::swap(c[0], c[1]);
  try {
    lut_reflectance(lut, c);
    FAIL("extrapolated");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::OutOfGrid);
  }
}

TEST_CASE("build is deterministic across runs and worker counts") {
  const std::vector<LutAxis> axes{LutAxis::log_spaced(std::string(kAxisMuA), 0.01, 2.0, 3),
                                  LutAxis::log_spaced(std::string(kAxisMuSPrime), 0.5, 5.0, 3)};
  const auto ref = serialize_lut(build_lut(default_lut_template(), axes, sim(1'500, 5), 1));
  CHECK(serialize_lut(build_lut(default_lut_template(), axes, sim(1'500, 5), 1)) == ref);
  CHECK(serialize_lut(build_lut(default_lut_template(), axes, sim(1'500, 5), 2)) == ref);
  CHECK(serialize_lut(build_lut(default_lut_template(), axes, sim(1'500, 5), 8)) == ref);
  CHECK(serialize_lut(build_lut(default_lut_template(), axes, sim(1'500, 6), 1)) != ref);
}

TEST_CASE("values fall along mu_a at fixed mu_s'") {
  const auto& lut = testing::small_lut();
  const std::size_t ia = lut.axis_index(kAxisMuA), is = lut.axis_index(kAxisMuSPrime);
  const auto na = lut.axes()[ia].nodes.size(), ns = lut.axes()[is].nodes.size();
  for (std::size_t j = 0; j < ns; ++j) {
    for (std::size_t i = 0; i + 1 < na; ++i) {
      std::size_t p[2], q[2];
      p[ia] = i, p[is] = j, q[ia] = i + 1, q[is] = j;
      const auto a = lut.flat_index(p), b = lut.flat_index(q);
      const double se = std::hypot(lut.stderrs()[a], lut.stderrs()[b]);
      CHECK(lut.values()[b] <= lut.values()[a] + 3.0 * se);
    }
  }
}

TEST_CASE("FLUT1 round trip") {
  const auto& lut = testing::small_lut();
  const auto bytes = serialize_lut(lut);
  CHECK(bytes.substr(0, 5) == "FLUT1");
  CHECK(deserialize_lut(bytes) == lut);

  testing::TempDir dir;
  save_lut(lut, dir / "a.flut");
  CHECK(load_lut(dir / "a.flut") == lut);
  CHECK(testing::read_file(dir / "a.flut") == bytes);
}

TEST_CASE("corrupt FLUT1 input is rejected") {
  const auto bytes = serialize_lut(testing::small_lut());
  CHECK_THROWS_AS(deserialize_lut("FLUT2" + bytes.substr(5)), Error);
  CHECK_THROWS_AS(deserialize_lut(bytes.substr(0, bytes.size() - 8)), Error);
  CHECK_THROWS_AS(deserialize_lut(""), Error);
}

TEST_CASE("grid validation") {
  const auto tmpl = default_lut_template();
  CHECK_THROWS_AS(build_lut(tmpl, {axis(kAxisMuA, {0.1, 0.1}), axis(kAxisMuSPrime, {1.0})}, sim(10, 1)), Error);
  CHECK_THROWS_AS(build_lut(tmpl, {axis(kAxisMuA, {0.1}), axis("g", {1.0})}, sim(10, 1)), Error);
  CHECK_THROWS_AS(build_lut(tmpl, {axis(kAxisMuA, {}), axis(kAxisMuSPrime, {1.0})}, sim(10, 1)), Error);
  try {
    build_lut(tmpl, {LutAxis::log_spaced(std::string(kAxisMuA), 0.01, 1, 100),
                     LutAxis::log_spaced(std::string(kAxisMuSPrime), 0.5, 5, 100)},
              sim(10, 1));
    FAIL("oversized grid accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::GridTooLarge);
  }
}

TEST_CASE("log-spaced axes") {
  const auto a = LutAxis::log_spaced("mu_a", 0.01, 1.0, 3);
  REQUIRE(a.nodes.size() == 3);
  CHECK(a.nodes[0] == 0.01);
  CHECK(a.nodes[1] == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(a.nodes[2] == 1.0);
}

}  // TEST_SUITE
