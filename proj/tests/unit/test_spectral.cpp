#include <doctest.h>

#include <cmath>
#include <random>

#include "livorlab/spectral.hpp"
#include "livorlab/spectral_csv.hpp"
#include "support.hpp"

using namespace livorlab;
using namespace livorlab::spectral;

namespace {

Spectrum counts(std::vector<double> wl, std::vector<double> v) {
  return Spectrum(std::move(wl), std::move(v), SpectrumKind::RawCounts);
}

Spectrum flat(double value, std::vector<double> grid, SpectrumKind kind = SpectrumKind::RawCounts) {
  std::vector<double> v(grid.size(), value);
  return Spectrum(std::move(grid), std::move(v), kind);
}

template <typename F>
void expect_errc(Errc code, F&& f) {
  try {
    f();
    FAIL("no error raised, expected " << to_string(code));
  } catch (const Error& e) {
    CHECK_MESSAGE(e.code() == code, e.what());
  }
}

}  // namespace

TEST_SUITE("spectral") {

TEST_CASE("spectrum construction rejects bad grids") {
  expect_errc(Errc::InvalidArgument, [] { counts({500.0}, {1.0}); });
  expect_errc(Errc::InvalidArgument, [] { counts({500.0, 500.0}, {1.0, 1.0}); });
  expect_errc(Errc::InvalidArgument, [] { counts({500.0, 400.0}, {1.0, 1.0}); });
  expect_errc(Errc::InvalidArgument, [] { counts({500.0, 510.0}, {1.0, NAN}); });
  expect_errc(Errc::InvalidArgument,
              [] { Spectrum({500.0, 510.0}, {0.1, -0.1}, SpectrumKind::Reflectance); });
}

TEST_CASE("normalize: sample equal to white gives one") {
  const auto grid = make_grid(400, 700, 10);
  const auto r = normalize_reflectance(flat(900, grid), flat(900, grid), flat(20, grid));
  for (double v : r.reflectance.values()) CHECK(v == 1.0);
  CHECK(r.reflectance.kind() == SpectrumKind::Reflectance);
}

TEST_CASE("normalize: sample equal to dark gives zero") {
  const auto grid = make_grid(400, 700, 10);
  const auto r = normalize_reflectance(flat(20, grid), flat(900, grid), flat(20, grid));
  for (double v : r.reflectance.values()) CHECK(v == 0.0);
}

TEST_CASE("normalize: midpoint gives one half") {
  const auto grid = make_grid(400, 700, 10);
  std::vector<double> w, d, s;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    d.push_back(10.0 + i);
    w.push_back(1000.0 + 7.0 * i);
    s.push_back(d.back() + 0.5 * (w.back() - d.back()));
  }
  const auto r = normalize_reflectance(counts(grid, s), counts(grid, w), counts(grid, d));
  for (double v : r.reflectance.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("normalize: clamping, warnings and rejection") {
  const std::vector<double> grid{500, 510, 520};
  const auto r = normalize_reflectance(counts(grid, {5, 500, 1040}), counts(grid, {1000, 1000, 1000}),
                                       counts(grid, {10, 10, 10}));
  CHECK(r.reflectance.values()[0] == 0.0);
  CHECK(r.clamped == std::vector<bool>{true, false, false});
  CHECK(r.above_unity == std::vector<bool>{false, false, true});

  expect_errc(Errc::ReflectanceOutOfRange, [&] {
    normalize_reflectance(counts(grid, {500, 500, 1200}), counts(grid, {1000, 1000, 1000}),
                          counts(grid, {10, 10, 10}));
  });
  expect_errc(Errc::DegenerateReference, [&] {
    normalize_reflectance(counts(grid, {500, 500, 500}), counts(grid, {10, 1000, 1000}), counts(grid, {10, 10, 10}));
  });
  expect_errc(Errc::GridMismatch, [&] {
    normalize_reflectance(counts(grid, {500, 500, 500}), counts({500, 510, 521}, {1000, 1000, 1000}),
                          counts(grid, {10, 10, 10}));
  });
}

TEST_CASE("property: normalization is scale invariant") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto b = testing::random_bundle(rng);
    const double k = scale(rng);
    auto scaled = [&](const Spectrum& s) {
      std::vector<double> v(s.values().begin(), s.values().end());
      for (auto& x : v) x *= k;
      return counts({s.wavelengths().begin(), s.wavelengths().end()}, v);
    };
    const auto r1 = normalize_reflectance(b.sample.spectrum, b.white.spectrum, b.dark.spectrum);
    const auto r2 =
        normalize_reflectance(scaled(b.sample.spectrum), scaled(b.white.spectrum), scaled(b.dark.spectrum));
    for (std::size_t i = 0; i < r1.reflectance.size(); ++i) {
      CHECK(testing::rel_err(r2.reflectance.values()[i], r1.reflectance.values()[i]) <= 1e-12);
    }
  }
}

TEST_CASE("absorption: zero concentrations give zero") {
  const auto grid = default_grid();
  const ChromophoreConcentrations zero{{Chromophore::Hb, 0.0}, {Chromophore::O2Hb, 0.0}, {Chromophore::COHb, 0.0}};
  const auto mu = absorption_spectrum(zero, testing::hemoglobin(), grid);
  for (double v : mu.values()) CHECK(v == 0.0);
  CHECK(mu.kind() == SpectrumKind::AbsorptionCoefficient);
}

TEST_CASE("absorption: unit plug-in") {
  const std::vector<ExtinctionRecord> db{
      {Chromophore::Hb, Spectrum({380, 780}, {1.0, 1.0}, SpectrumKind::MolarExtinction)}};
  const auto mu = absorption_spectrum({{Chromophore::Hb, 1.0}}, db, std::vector<double>{400, 550, 700});
  for (double v : mu.values()) CHECK(v == doctest::Approx(std::log(10.0) / 10.0).epsilon(1e-15));
  CHECK(std::log(10.0) / 10.0 == doctest::Approx(0.23026).epsilon(1e-5));
}

TEST_CASE("absorption: missing chromophore and grid range") {
  const std::vector<ExtinctionRecord> db{
      {Chromophore::Hb, Spectrum({380, 780}, {1.0, 1.0}, SpectrumKind::MolarExtinction)}};
  expect_errc(Errc::MissingChromophore, [&] {
    absorption_spectrum({{Chromophore::COHb, 1.0}}, db, std::vector<double>{400, 500});
  });
  expect_errc(Errc::GridOutOfRange,
              [&] { absorption_spectrum({{Chromophore::Hb, 1.0}}, db, std::vector<double>{370, 500}); });
}

TEST_CASE("property: absorption is additive in concentrations") {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> c(0.0, 0.5);
  const auto grid = default_grid();
  for (int trial = 0; trial < 30; ++trial) {
    ChromophoreConcentrations a, b, sum;
    for (auto ch : {Chromophore::Hb, Chromophore::O2Hb, Chromophore::COHb}) {
      const double x = c(rng), y = c(rng);
      a.set(ch, x);
      b.set(ch, y);
      sum.set(ch, x + y);
    }
    const auto ma = absorption_spectrum(a, testing::hemoglobin(), grid);
    const auto mb = absorption_spectrum(b, testing::hemoglobin(), grid);
    const auto ms = absorption_spectrum(sum, testing::hemoglobin(), grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double expect = ma.values()[i] + mb.values()[i];
      CHECK(std::abs(ms.values()[i] - expect) <= 1e-12 * std::max(expect, 1e-300));
    }
  }
}

TEST_CASE("resample: identity, midpoint, constant") {
  const auto src = counts({400, 410, 420, 430}, {1.0, 3.0, 2.0, 8.0});
  const auto same = resample(src, src.wavelengths());
  CHECK(same.values().size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(same.values()[i] == src.values()[i]);

  CHECK(interpolate(src, 405.0) == 2.0);
  CHECK(interpolate(src, 425.0) == 5.0);

  const auto c = flat(0.37, {400, 450, 500}, SpectrumKind::Reflectance);
  const auto r = resample(c, std::vector<double>{401.5, 433.25, 499.9});
  for (double v : r.values()) CHECK(v == doctest::Approx(0.37).epsilon(1e-15));

  expect_errc(Errc::GridOutOfRange, [&] { resample(src, std::vector<double>{399.0, 420.0}); });
}

TEST_CASE("property: resample is idempotent on its own grid") {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const auto src = testing::random_bundle(rng).white.spectrum;
    std::vector<double> grid;
    const double lo = src.min_wavelength(), hi = src.max_wavelength();
    const std::size_t n = 2 + rng() % 50;
    for (std::size_t i = 0; i < n; ++i) grid.push_back(lo + (hi - lo) * (static_cast<double>(i) + u(rng) * 0.5) / n);
    const auto once = resample(src, grid);
    const auto twice = resample(once, grid);
    CHECK(once == twice);
  }
}

TEST_CASE("cohb fraction examples") {
  CHECK(cohb_fraction({{Chromophore::Hb, 1}, {Chromophore::O2Hb, 1}, {Chromophore::COHb, 0}}) == 0.0);
  CHECK(cohb_fraction({{Chromophore::Hb, 0}, {Chromophore::O2Hb, 0}, {Chromophore::COHb, 2}}) == 1.0);
  CHECK(cohb_fraction({{Chromophore::Hb, 1}, {Chromophore::O2Hb, 1}, {Chromophore::COHb, 2}}) == 0.5);
  expect_errc(Errc::ZeroTotalHemoglobin,
              [] { cohb_fraction({{Chromophore::Hb, 0}, {Chromophore::O2Hb, 0}, {Chromophore::COHb, 0}}); });
}

TEST_CASE("property: cohb fraction ignores uniform scaling") {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(1e-4, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double h = u(rng), o = u(rng), co = u(rng), k = u(rng) * 100.0;
    const double f1 = cohb_fraction({{Chromophore::Hb, h}, {Chromophore::O2Hb, o}, {Chromophore::COHb, co}});
    const double f2 =
        cohb_fraction({{Chromophore::Hb, k * h}, {Chromophore::O2Hb, k * o}, {Chromophore::COHb, k * co}});
    CHECK(f2 == doctest::Approx(f1).epsilon(1e-12));
  }
}

TEST_CASE("csv: header errors name line 1") {
  try {
    parse_spectrum_csv("wavelength,value\n500,1\n510,2\n", SpectrumKind::RawCounts);
    FAIL("accepted a bad header");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ParseError);
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("csv: bad tokens name their line") {
  try {
    parse_spectrum_csv("wavelength_nm,value\n500,1\n510,1,5e\n", SpectrumKind::RawCounts);
    FAIL("accepted a bad row");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ParseError);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_spectrum_csv("wavelength_nm,value\n500,1\n510,1 000\n", SpectrumKind::RawCounts), Error);
  CHECK_THROWS_AS(parse_spectrum_csv("wavelength_nm,value\n500,1\n510,1,5\n", SpectrumKind::RawCounts), Error);
}

TEST_CASE("csv: comments before the header and bundle splitting") {
  const std::string text =
      "# MCS 400 export\n"
      "wavelength_nm,sample,white,dark\n"
      "500.0,250.5,1000,10\n"
      "502.0,2.505e2,1e3,1.0e1\n";
  const auto b = parse_bundle_csv(text);
  CHECK(b.sample.text == "wavelength_nm,value\n500.0,250.5\n502.0,2.505e2\n");
  CHECK(b.white.text == "wavelength_nm,value\n500.0,1000\n502.0,1e3\n");
  CHECK(b.dark.spectrum.values()[1] == 10.0);
}

TEST_CASE("property: decimal formatting round trips") {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> expo(-30.0, 30.0);
  std::uniform_real_distribution<double> mant(1.0, 10.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const double v = mant(rng) * std::pow(10.0, expo(rng));
    const auto s = format_decimal(v);
    CHECK(std::stod(s) == v);
  }
  CHECK(format_decimal(0.5) == "0.5");
}

TEST_CASE("property: formatted spectra parse back identically") {
  std::mt19937_64 rng(606);
  for (int trial = 0; trial < 30; ++trial) {
    const auto b = testing::random_bundle(rng);
    const auto r = normalize_reflectance(b.sample.spectrum, b.white.spectrum, b.dark.spectrum).reflectance;
    const auto text = format_spectrum_csv(r);
    const auto back = parse_spectrum_csv(text, SpectrumKind::Reflectance);
    CHECK(back.spectrum == r);
    CHECK(back.text == text);
  }
}

}  // TEST_SUITE
