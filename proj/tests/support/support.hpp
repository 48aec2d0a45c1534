#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <sodium.h>
#include <stdlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "livorlab/eln.hpp"
#include "livorlab/extinction.hpp"
#include "livorlab/inverse.hpp"
#include "livorlab/lut.hpp"
#include "livorlab/spectral_csv.hpp"

namespace testing {

namespace fs = std::filesystem;
using namespace livorlab;

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "livorlab-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// argon2id at its minimum cost; the default takes ~100 ms per hash
inline eln::StoreOptions fast_store(const fs::path& db) {
  eln::StoreOptions o;
  o.path = db;
  o.pwhash_opslimit = crypto_pwhash_OPSLIMIT_MIN;
  o.pwhash_memlimit = crypto_pwhash_MEMLIMIT_MIN;
  return o;
}

inline const eln::Actor kAdmin{"admin", eln::Role::Admin};
inline const eln::Actor kReviewer{"rev", eln::Role::Reviewer};
inline const eln::Actor kAnalyst{"ana", eln::Role::Analyst};
inline const eln::Actor kOperator{"op", eln::Role::Operator};
inline const eln::Actor kNobody{"ghost", std::nullopt};

// Count tokens written in a mix of styles, so bit-exact storage is tested on
// text the formatter would not have produced itself.
inline std::string random_token(std::mt19937_64& rng, double value) {
  char buf[64];
  switch (rng() % 4) {
    case 0: std::snprintf(buf, sizeof buf, "%.6f", value); break;
    case 1: std::snprintf(buf, sizeof buf, "%.9e", value); break;
    case 2: std::snprintf(buf, sizeof buf, "%.17g", value); break;
    default: std::snprintf(buf, sizeof buf, "%.2f", value); break;
  }
  return buf;
}

struct BundleText {
  std::string sample, white, dark;
};

// Raw counts on a random grid: dark 5-50, white 1000-4000, reflectance 0.05-0.9.
inline BundleText random_bundle_text(std::mt19937_64& rng, std::size_t points = 0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (points == 0) points = 20 + rng() % 180;
  const double start = 380.0 + 40.0 * u(rng);
  const double step = 0.5 + 2.0 * u(rng);
  BundleText b{"wavelength_nm,value\n", "wavelength_nm,value\n", "wavelength_nm,value\n"};
  for (std::size_t i = 0; i < points; ++i) {
    char wl[32];
    std::snprintf(wl, sizeof wl, "%.3f", start + step * static_cast<double>(i));
    const double d = 5.0 + 45.0 * u(rng);
    const double w = 1000.0 + 3000.0 * u(rng);
    const double r = 0.05 + 0.85 * u(rng);
    const double s = d + r * (w - d);
    b.sample += std::string(wl) + "," + random_token(rng, s) + "\n";
    b.white += std::string(wl) + "," + random_token(rng, w) + "\n";
    b.dark += std::string(wl) + "," + random_token(rng, d) + "\n";
  }
  return b;
}

inline spectral::RawBundle parse_bundle(const BundleText& b) {
  using spectral::SpectrumKind;
  return {spectral::parse_spectrum_csv(b.sample, SpectrumKind::RawCounts),
          spectral::parse_spectrum_csv(b.white, SpectrumKind::RawCounts),
          spectral::parse_spectrum_csv(b.dark, SpectrumKind::RawCounts)};
}

inline spectral::RawBundle random_bundle(std::mt19937_64& rng, std::size_t points = 0) {
  return parse_bundle(random_bundle_text(rng, points));
}

inline const std::vector<spectral::ExtinctionRecord>& hemoglobin() {
  static const auto db = extinction::load_extinction_db();
  return db;
}

// Coarse LUT over the default axis ranges, cheap enough to build per process.
inline const mcrt::ForwardLut& small_lut() {
  static const mcrt::ForwardLut lut = [] {
    std::vector<mcrt::LutAxis> axes{mcrt::LutAxis::log_spaced(std::string(mcrt::kAxisMuA), 0.005, 5.0, 10),
                                    mcrt::LutAxis::log_spaced(std::string(mcrt::kAxisMuSPrime), 0.3, 10.0, 6)};
    mcrt::SimConfig sim;
    sim.photon_count = 1'000;
    sim.seed = 11;
    return mcrt::build_lut(mcrt::default_lut_template(), axes, sim);
  }();
  return lut;
}

// Mid-range skin: mu_a about 0.1-1.3 /mm and mu_s' about 1.5 /mm over 500-600 nm.
inline inverse::SkinParameterVector typical_skin() {
  inverse::SkinParameterVector p;
  p.concentrations = {{spectral::Chromophore::Hb, 0.02},
                      {spectral::Chromophore::O2Hb, 0.02},
                      {spectral::Chromophore::COHb, 0.012}};
  p.scatterer.number_density_per_mm3 = 1.6e8;
  return p;
}

inline std::vector<double> fit_grid() { return spectral::make_grid(500.0, 600.0, 2.0); }

// Raw counts whose normalised reflectance is `r`: dark 10, white 1010.
inline BundleText bundle_text_for(const spectral::Spectrum& r) {
  BundleText b{"wavelength_nm,value\n", "wavelength_nm,value\n", "wavelength_nm,value\n"};
  for (std::size_t i = 0; i < r.size(); ++i) {
    char wl[32], s[40];
    std::snprintf(wl, sizeof wl, "%.17g", r.wavelengths()[i]);
    std::snprintf(s, sizeof s, "%.17g", 10.0 + 1000.0 * r.values()[i]);
    b.sample += std::string(wl) + "," + s + "\n";
    b.white += std::string(wl) + ",1010\n";
    b.dark += std::string(wl) + ",10\n";
  }
  return b;
}

// Noiseless reflectance of typical_skin() through small_lut() on fit_grid().
inline spectral::Spectrum synthetic_reflectance() {
  inverse::ForwardModel model(small_lut(), hemoglobin(), fit_grid());
  return model.predict(typical_skin());
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace testing
