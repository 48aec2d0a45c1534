#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "livorlab/error.hpp"

namespace livorlab::spectral {

enum class SpectrumKind { RawCounts, Reflectance, AbsorptionCoefficient, MolarExtinction };

std::string_view to_string(SpectrumKind kind) noexcept;
SpectrumKind spectrum_kind_from_string(std::string_view name);

/// Upper limit for a normalized reflectance value. Values in (1, limit] are
/// specular artifacts against an imperfect white standard and only warned about.
inline constexpr double kReflectanceCeiling = 1.1;

/// Wavelength grid (nm) with one value per wavelength.
///
/// Construction validates the invariants: at least two points, strictly
/// increasing wavelengths inside (0, 10000) nm, finite values, and
/// nonnegative values for reflectance and absorption spectra.
class Spectrum {
 public:
  Spectrum(std::vector<double> wavelengths_nm, std::vector<double> values, SpectrumKind kind);

  std::span<const double> wavelengths() const noexcept { return wavelengths_; }
  std::span<const double> values() const noexcept { return values_; }
  SpectrumKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return values_.size(); }

  double min_wavelength() const noexcept { return wavelengths_.front(); }
  double max_wavelength() const noexcept { return wavelengths_.back(); }

  bool same_grid(const Spectrum& other) const noexcept { return wavelengths_ == other.wavelengths_; }

  friend bool operator==(const Spectrum&, const Spectrum&) = default;

 private:
  std::vector<double> wavelengths_;
  std::vector<double> values_;
  SpectrumKind kind_;
};

struct NormalizedReflectance {
  Spectrum reflectance;
  std::vector<bool> clamped;       // (S - D) < 0, value forced to 0
  std::vector<bool> above_unity;   // 1 < R <= kReflectanceCeiling
};

/// R = (S - D) / (W - D) per wavelength. Negative results clamp to zero and
/// are flagged; results above kReflectanceCeiling are rejected.
NormalizedReflectance normalize_reflectance(const Spectrum& sample, const Spectrum& white,
                                            const Spectrum& dark);

/// Piecewise-linear interpolation onto `grid`; no extrapolation.
Spectrum resample(const Spectrum& src, std::span<const double> grid);

/// Linearly interpolated value at a single wavelength inside the grid.
double interpolate(const Spectrum& src, double wavelength_nm);

enum class Chromophore { Hb, O2Hb, COHb };

std::string_view to_string(Chromophore c) noexcept;
Chromophore chromophore_from_string(std::string_view name);

/// Molar extinction coefficient spectrum, L/(mmol*cm).
struct ExtinctionRecord {
  Chromophore chromophore;
  Spectrum extinction;
};

/// Concentrations in mmol/L; all nonnegative.
class ChromophoreConcentrations {
 public:
  ChromophoreConcentrations() = default;
  ChromophoreConcentrations(std::initializer_list<std::pair<const Chromophore, double>> init);

  void set(Chromophore c, double mmol_per_l);
  double get(Chromophore c) const noexcept;
  bool contains(Chromophore c) const noexcept { return values_.contains(c); }
  const std::map<Chromophore, double>& entries() const noexcept { return values_; }

  friend bool operator==(const ChromophoreConcentrations&, const ChromophoreConcentrations&) = default;

 private:
  std::map<Chromophore, double> values_;
};

/// mu_a(lambda) = ln(10) * sum_i c_i * eps_i(lambda) / 10, in 1/mm.
Spectrum absorption_spectrum(const ChromophoreConcentrations& conc,
                             std::span<const ExtinctionRecord> db, std::span<const double> grid);

/// c_COHb / (c_Hb + c_O2Hb + c_COHb).
double cohb_fraction(const ChromophoreConcentrations& conc);

/// 380-780 nm in 2 nm steps.
std::vector<double> default_grid();
std::vector<double> make_grid(double start_nm, double stop_nm, double step_nm);

}  // namespace livorlab::spectral
