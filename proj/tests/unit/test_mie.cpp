#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "livorlab/mie.hpp"
#include "livorlab/mie_reference.hpp"
#include "support.hpp"

using namespace livorlab;
using namespace livorlab::mie;

TEST_SUITE("mie") {

TEST_CASE("vanishing sphere") {
  const auto r = mie_single({1e-9, {1.5, 0.0}});
  CHECK(r.q_sca <= 1e-30);
  CHECK(std::abs(r.anisotropy_g) < 1e-6);
}

TEST_CASE("non-absorbing sphere conserves energy") {
  const auto r = mie_single({5.0, {1.5, 0.0}});
  CHECK(std::abs(r.q_ext - r.q_sca) < 1e-10 * r.q_ext);
}

TEST_CASE("x = 1, m = 1.5 against the reference series") {
  const auto a = mie_single({1.0, {1.5, 0.0}});
  const auto b = mie_reference({1.0, {1.5, 0.0}});
  CHECK(testing::rel_err(a.q_ext, b.q_ext) <= 1e-8);
  CHECK(testing::rel_err(a.q_sca, b.q_sca) <= 1e-8);
  CHECK(testing::rel_err(a.anisotropy_g, b.anisotropy_g) <= 1e-8);
}

TEST_CASE("reference series reproduces the classic BHMIE test case") {
  // sphere of radius 0.525 um, m = 1.55, in vacuum at 632.8 nm: Q_sca = Q_ext = 3.10543
  const double x = 2.0 * std::numbers::pi * 0.525 / 0.6328;
  const auto r = mie_reference({x, {1.55, 0.0}});
  CHECK(r.q_ext == doctest::Approx(3.10543).epsilon(2e-6));
  CHECK(r.q_sca == doctest::Approx(3.10543).epsilon(2e-6));
}

TEST_CASE("reference series in the Rayleigh limit") {
  const double x = 1e-3;
  const std::complex<double> m(1.33, 0.0);
  const double closed = 8.0 / 3.0 * std::pow(x, 4) * std::norm((m * m - 1.0) / (m * m + 2.0));
  CHECK(testing::rel_err(mie_reference({x, m}).q_sca, closed) <= 1e-3);
  CHECK(testing::rel_err(mie_single({x, m}).q_sca, closed) <= 1e-3);
}

TEST_CASE("property: production series agrees with the reference") {
  std::mt19937_64 rng(7001);
  std::uniform_real_distribution<double> logx(std::log(0.1), std::log(50.0));
  std::uniform_real_distribution<double> re(1.01, 1.8);
  std::uniform_real_distribution<double> logk(std::log(1e-6), std::log(1.0));
  for (int trial = 0; trial < 60; ++trial) {
    const double x = std::exp(logx(rng));
    const std::complex<double> m(re(rng), trial % 3 == 0 ? 0.0 : std::exp(logk(rng)));
    const auto a = mie_single({x, m});
    const auto b = mie_reference({x, m});
    INFO("x = " << x << ", m = " << m);
    CHECK(testing::rel_err(a.q_ext, b.q_ext) <= 1e-8);
    CHECK(testing::rel_err(a.q_sca, b.q_sca) <= 1e-8);
    CHECK(std::abs(a.anisotropy_g - b.anisotropy_g) <= 1e-8 * std::max(std::abs(b.anisotropy_g), 1e-3));
    CHECK(a.q_sca <= a.q_ext + 1e-12);
    CHECK(std::abs(a.anisotropy_g) <= 1.0);
    if (m.imag() == 0.0) CHECK(std::abs(a.q_ext - a.q_sca) <= 1e-10 * a.q_ext);
  }
}

TEST_CASE("invalid queries") {
  CHECK_THROWS_AS(mie_single({0.0, {1.5, 0.0}}), Error);
  CHECK_THROWS_AS(mie_single({1.0, {1.5, -0.1}}), Error);
  CHECK_THROWS_AS(mie_single({1.0, {0.0, 0.0}}), Error);
}

TEST_CASE("truncation order") {
  CHECK(truncation_order(1.0) == 7);
  CHECK(truncation_order(1e-9) >= 1);
}

TEST_CASE("bulk scattering is linear in number density") {
  ScattererModel m;
  m.number_density_per_mm3 = 1e8;
  const auto a = bulk_scattering(m, 550.0);
  m.number_density_per_mm3 = 2e8;
  const auto b = bulk_scattering(m, 550.0);
  CHECK(b.mu_s_per_mm == doctest::Approx(2.0 * a.mu_s_per_mm).epsilon(1e-12));
  CHECK(b.g == doctest::Approx(a.g).epsilon(1e-12));
}

TEST_CASE("monodisperse population is the single sphere scaled by density and area") {
  ScattererModel m;
  m.distribution = Monodisperse{0.4};
  m.number_density_per_mm3 = 3e8;
  const double wl = 560.0;
  const auto bulk = bulk_scattering(m, wl);
  const double r_um = 0.4;
  const double x = 2.0 * std::numbers::pi * r_um * m.n_medium / (wl * 1e-3);
  const auto single = mie_single({x, {m.n_particle / m.n_medium, 0.0}});
  const double area_mm2 = std::numbers::pi * (r_um * 1e-3) * (r_um * 1e-3);
  CHECK(bulk.mu_s_per_mm == doctest::Approx(single.q_sca * area_mm2 * m.number_density_per_mm3).epsilon(1e-12));
  CHECK(bulk.g == doctest::Approx(single.anisotropy_g).epsilon(1e-12));
}

TEST_CASE("narrow log-normal converges to the monodisperse result") {
  ScattererModel mono;
  mono.distribution = Monodisperse{0.5};
  mono.number_density_per_mm3 = 1e8;
  ScattererModel narrow = mono;
  narrow.distribution = LogNormal{0.5, 1.0001};
  for (double wl : {450.0, 550.0, 700.0}) {
    const auto a = bulk_scattering(mono, wl);
    const auto b = bulk_scattering(narrow, wl);
    CHECK(testing::rel_err(b.mu_s_per_mm, a.mu_s_per_mm) <= 1e-3);
    CHECK(testing::rel_err(b.g, a.g) <= 1e-3);
  }
}

TEST_CASE("scatterer validation") {
  ScattererModel m;
  m.number_density_per_mm3 = -1.0;
  CHECK_THROWS_AS(m.validate(), Error);
  m.number_density_per_mm3 = 1.0;
  m.distribution = LogNormal{0.5, 0.9};
  CHECK_THROWS_AS(m.validate(), Error);
}

}  // TEST_SUITE
