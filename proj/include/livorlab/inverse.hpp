#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "livorlab/json_io.hpp"
#include "livorlab/lut.hpp"
#include "livorlab/mie.hpp"
#include "livorlab/spectral.hpp"

namespace livorlab::inverse {

using spectral::ChromophoreConcentrations;
using spectral::ExtinctionRecord;
using spectral::Spectrum;

/// The microscopic unknowns of a skin spectrum.
struct SkinParameterVector {
  ChromophoreConcentrations concentrations;  // mmol/L
  mie::ScattererModel scatterer;
  double calibration_factor = 1.0;

  void validate() const;
};

enum class Parameter { CHb, CO2Hb, CCOHb, NumberDensity, CalibrationFactor, Radius, SigmaGeom };

std::string_view to_string(Parameter p) noexcept;
Parameter parameter_from_string(std::string_view name);

double get(const SkinParameterVector& v, Parameter p);
void set(SkinParameterVector& v, Parameter p, double value);

struct Bounds {
  double lo;
  double hi;
};

/// Bounds used when a FitConfig does not override them.
Bounds default_bounds(Parameter p) noexcept;

enum class NoiseModel { Uniform, PerWavelengthStderr };

struct FitConfig {
  std::vector<Parameter> free_parameters{Parameter::CHb, Parameter::CO2Hb, Parameter::CCOHb,
                                         Parameter::NumberDensity, Parameter::CalibrationFactor};
  std::map<Parameter, Bounds> bounds;
  double regularization_weight = 0.0;
  SkinParameterVector initial_guess;
  int max_iterations = 200;
  double convergence_tol = 1e-10;
  NoiseModel noise_model = NoiseModel::Uniform;
  double initial_damping = 1e-3;
  double damping_factor = 10.0;
  double fd_relative_step = 1e-4;

  Bounds bounds_for(Parameter p) const;
  void validate() const;
};

struct IterationRecord {
  int iteration;
  double objective;
  double damping;
  bool accepted;
};

struct FitResult {
  SkinParameterVector estimate;
  double objective = 0.0;
  double residual_norm = 0.0;
  double chi2_per_dof = 0.0;
  int iterations = 0;
  bool converged = false;
  std::map<Parameter, bool> at_bound;
  Spectrum predicted{{1.0, 2.0}, {0.0, 0.0}, spectral::SpectrumKind::Reflectance};
  std::vector<IterationRecord> trace;
};

/// Composition of chromophore absorption, Mie scattering and the LUT.
/// Caches the scattering spectrum for the last scatterer it saw, so repeated
/// predictions that only change concentrations skip the Mie sums.
class ForwardModel {
 public:
  ForwardModel(const mcrt::ForwardLut& lut, std::span<const ExtinctionRecord> db, std::vector<double> grid);

  /// R(lambda) = calibration_factor * lut(mu_a(lambda), mu_s'(lambda)).
  Spectrum predict(const SkinParameterVector& params);
  /// Optical coordinates (mu_a, mu_s') at every grid wavelength.
  std::vector<std::pair<double, double>> optical_coordinates(const SkinParameterVector& params);

  const std::vector<double>& grid() const noexcept { return grid_; }

 private:
  const std::vector<double>& reduced_scattering(const mie::ScattererModel& model);

  const mcrt::ForwardLut& lut_;
  std::span<const ExtinctionRecord> db_;
  std::vector<double> grid_;
  std::size_t mu_a_axis_;
  std::size_t mu_s_axis_;
  std::optional<mie::ScattererModel> cached_model_;
  std::vector<double> cached_mu_s_prime_;
};

Spectrum predict_spectrum(const SkinParameterVector& params, const mcrt::ForwardLut& lut,
                          std::span<const double> grid, std::span<const ExtinctionRecord> db);

/// Projected Levenberg-Marquardt with optional Tikhonov pull toward the
/// initial guess. `measured_stderr` is required for PerWavelengthStderr.
FitResult fit(const Spectrum& measured, const FitConfig& cfg, const mcrt::ForwardLut& lut,
              std::span<const ExtinctionRecord> db, std::span<const double> measured_stderr = {});

/// The weighted objective at `params` (data term plus regularization).
double objective(const Spectrum& measured, const FitConfig& cfg, const SkinParameterVector& params,
                 const mcrt::ForwardLut& lut, std::span<const ExtinctionRecord> db,
                 std::span<const double> measured_stderr = {});

/// Objective with `axis` set to each node and everything else at the guess.
std::vector<std::pair<double, double>> scan_objective(const Spectrum& measured, const FitConfig& cfg,
                                                      const mcrt::ForwardLut& lut,
                                                      std::span<const ExtinctionRecord> db, Parameter axis,
                                                      std::span<const double> nodes,
                                                      std::span<const double> measured_stderr = {});

/// FitConfig plus the LUT it runs against and an optional wavelength window
/// applied to the measurement's own grid.
struct AnalysisConfig {
  std::string lut;
  std::optional<std::pair<double, double>> window_nm;
  FitConfig fit;
};

/// Measured points inside the window (all points when no window is set).
Spectrum apply_window(const Spectrum& measured, const std::optional<std::pair<double, double>>& window_nm);

void to_json(Json& j, const SkinParameterVector& v);
void from_json(const Json& j, SkinParameterVector& v);
void to_json(Json& j, const FitConfig& c);
void from_json(const Json& j, FitConfig& c);
void to_json(Json& j, const FitResult& r);
void from_json(const Json& j, FitResult& r);
void to_json(Json& j, const AnalysisConfig& c);
void from_json(const Json& j, AnalysisConfig& c);

}  // namespace livorlab::inverse
