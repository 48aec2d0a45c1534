#include "livorlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace livorlab::spectral {

namespace {

constexpr double kLn10 = std::numbers::ln10;

void require_same_grid(const Spectrum& a, const Spectrum& b, std::string_view what) {
  if (!a.same_grid(b)) {
    throw Error(Errc::GridMismatch, std::string(what) + " grid differs from sample grid");
  }
}

// Index i such that grid[i] <= x <= grid[i+1]; caller checked the range.
std::size_t bracket(std::span<const double> grid, double x) {
  auto it = std::upper_bound(grid.begin(), grid.end(), x);
  auto i = static_cast<std::size_t>(std::distance(grid.begin(), it));
  if (i == 0) return 0;
  return std::min(i - 1, grid.size() - 2);
}

}  // namespace

std::string_view to_string(SpectrumKind kind) noexcept {
  switch (kind) {
    case SpectrumKind::RawCounts: return "RawCounts";
    case SpectrumKind::Reflectance: return "Reflectance";
    case SpectrumKind::AbsorptionCoefficient: return "AbsorptionCoefficient_per_mm";
    case SpectrumKind::MolarExtinction: return "MolarExtinction";
  }
  return "?";
}

SpectrumKind spectrum_kind_from_string(std::string_view name) {
  if (name == "RawCounts") return SpectrumKind::RawCounts;
  if (name == "Reflectance") return SpectrumKind::Reflectance;
  if (name == "AbsorptionCoefficient_per_mm") return SpectrumKind::AbsorptionCoefficient;
  if (name == "MolarExtinction") return SpectrumKind::MolarExtinction;
  throw Error(Errc::InvalidArgument, "unknown spectrum kind '" + std::string(name) + "'");
}

Spectrum::Spectrum(std::vector<double> wavelengths_nm, std::vector<double> values, SpectrumKind kind)
    : wavelengths_(std::move(wavelengths_nm)), values_(std::move(values)), kind_(kind) {
  if (wavelengths_.size() != values_.size()) {
    throw Error(Errc::InvalidArgument, "wavelength and value counts differ");
  }
  if (wavelengths_.size() < 2) {
    throw Error(Errc::InvalidArgument, "a spectrum needs at least two points");
  }
  for (std::size_t i = 0; i < wavelengths_.size(); ++i) {
    double wl = wavelengths_[i];
    if (!(wl > 0.0 && wl < 10000.0)) {
      throw Error(Errc::InvalidArgument, "wavelength outside (0, 10000) nm");
    }
    if (i > 0 && !(wl > wavelengths_[i - 1])) {
      throw Error(Errc::InvalidArgument, "wavelengths must be strictly increasing");
    }
    if (!std::isfinite(values_[i])) {
      throw Error(Errc::InvalidArgument, "non-finite spectrum value");
    }
    if (kind_ != SpectrumKind::RawCounts && values_[i] < 0.0) {
      throw Error(Errc::InvalidArgument, "negative value in a " + std::string(to_string(kind_)) + " spectrum");
    }
  }
}

NormalizedReflectance normalize_reflectance(const Spectrum& sample, const Spectrum& white,
                                            const Spectrum& dark) {
  require_same_grid(sample, white, "white");
  require_same_grid(sample, dark, "dark");

  auto s = sample.values();
  auto w = white.values();
  auto d = dark.values();
  const std::size_t n = sample.size();

  std::vector<double> r(n);
  std::vector<bool> clamped(n, false);
  std::vector<bool> above(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    double span = w[i] - d[i];
    if (!(span > 0.0)) {
      throw Error(Errc::DegenerateReference,
                  "white - dark <= 0 at " + std::to_string(sample.wavelengths()[i]) + " nm");
    }
    double value = (s[i] - d[i]) / span;
    if (value < 0.0) {
      value = 0.0;
      clamped[i] = true;
    } else if (value > kReflectanceCeiling) {
      throw Error(Errc::ReflectanceOutOfRange,
                  "reflectance " + std::to_string(value) + " at " +
                      std::to_string(sample.wavelengths()[i]) + " nm exceeds " +
                      std::to_string(kReflectanceCeiling));
    } else if (value > 1.0) {
      above[i] = true;
    }
    r[i] = value;
  }
  std::vector<double> grid(sample.wavelengths().begin(), sample.wavelengths().end());
  return {Spectrum(std::move(grid), std::move(r), SpectrumKind::Reflectance), std::move(clamped),
          std::move(above)};
}

double interpolate(const Spectrum& src, double wavelength_nm) {
  auto wl = src.wavelengths();
  if (!(wavelength_nm >= wl.front() && wavelength_nm <= wl.back())) {
    throw Error(Errc::GridOutOfRange, "wavelength " + std::to_string(wavelength_nm) +
                                          " nm outside [" + std::to_string(wl.front()) + ", " +
                                          std::to_string(wl.back()) + "]");
  }
  std::size_t i = bracket(wl, wavelength_nm);
  double x0 = wl[i], x1 = wl[i + 1];
  double y0 = src.values()[i], y1 = src.values()[i + 1];
  if (wavelength_nm == x0) return y0;
  if (wavelength_nm == x1) return y1;
  double t = (wavelength_nm - x0) / (x1 - x0);
  return y0 + t * (y1 - y0);
}

Spectrum resample(const Spectrum& src, std::span<const double> grid) {
  std::vector<double> values;
  values.reserve(grid.size());
  for (double x : grid) values.push_back(interpolate(src, x));
  return Spectrum(std::vector<double>(grid.begin(), grid.end()), std::move(values), src.kind());
}

std::string_view to_string(Chromophore c) noexcept {
  switch (c) {
    case Chromophore::Hb: return "hb";
    case Chromophore::O2Hb: return "o2hb";
    case Chromophore::COHb: return "cohb";
  }
  return "?";
}

Chromophore chromophore_from_string(std::string_view name) {
  if (name == "hb" || name == "Hb") return Chromophore::Hb;
  if (name == "o2hb" || name == "O2Hb") return Chromophore::O2Hb;
  if (name == "cohb" || name == "COHb") return Chromophore::COHb;
  throw Error(Errc::InvalidArgument, "unknown chromophore '" + std::string(name) + "'");
}

ChromophoreConcentrations::ChromophoreConcentrations(
    std::initializer_list<std::pair<const Chromophore, double>> init) {
  for (const auto& [c, v] : init) set(c, v);
}

void ChromophoreConcentrations::set(Chromophore c, double mmol_per_l) {
  if (!(mmol_per_l >= 0.0) || !std::isfinite(mmol_per_l)) {
    throw Error(Errc::InvalidArgument,
                "concentration of " + std::string(to_string(c)) + " must be finite and >= 0");
  }
  values_[c] = mmol_per_l;
}

double ChromophoreConcentrations::get(Chromophore c) const noexcept {
  auto it = values_.find(c);
  return it == values_.end() ? 0.0 : it->second;
}

Spectrum absorption_spectrum(const ChromophoreConcentrations& conc,
                             std::span<const ExtinctionRecord> db, std::span<const double> grid) {
  std::vector<double> mu_a(grid.size(), 0.0);
  for (const auto& [chromophore, c] : conc.entries()) {
    auto rec = std::find_if(db.begin(), db.end(),
                            [&](const ExtinctionRecord& r) { return r.chromophore == chromophore; });
    if (rec == db.end()) {
      throw Error(Errc::MissingChromophore,
                  "no extinction record for " + std::string(to_string(chromophore)));
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
      mu_a[i] += c * interpolate(rec->extinction, grid[i]);
    }
  }
  for (double& v : mu_a) v = std::max(0.0, kLn10 * v / 10.0);
  return Spectrum(std::vector<double>(grid.begin(), grid.end()), std::move(mu_a),
                  SpectrumKind::AbsorptionCoefficient);
}

double cohb_fraction(const ChromophoreConcentrations& conc) {
  double co = conc.get(Chromophore::COHb);
  double total = conc.get(Chromophore::Hb) + conc.get(Chromophore::O2Hb) + co;
  if (!(total > 0.0)) throw Error(Errc::ZeroTotalHemoglobin, "total hemoglobin is zero");
  return co / total;
}

std::vector<double> make_grid(double start_nm, double stop_nm, double step_nm) {
  if (!(step_nm > 0.0) || !(stop_nm > start_nm)) {
    throw Error(Errc::InvalidArgument, "grid needs start < stop and step > 0");
  }
  auto n = static_cast<std::size_t>(std::floor((stop_nm - start_nm) / step_nm + 1e-9)) + 1;
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = start_nm + static_cast<double>(i) * step_nm;
  return grid;
}

std::vector<double> default_grid() { return make_grid(380.0, 780.0, 2.0); }

}  // namespace livorlab::spectral
