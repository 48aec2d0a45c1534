#include "livorlab/inverse.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace livorlab::inverse {

using spectral::Chromophore;
using spectral::SpectrumKind;

namespace {

constexpr double kTinyObjective = 1e-26;
constexpr double kMaxDamping = 1e16;
constexpr double kMinDamping = 1e-15;

bool finite_all(const Eigen::VectorXd& v) { return v.allFinite(); }

// Residual vector r with objective F = r.r; holds everything the LM loop needs.
class Problem {
 public:
  Problem(const Spectrum& measured, const FitConfig& cfg, const mcrt::ForwardLut& lut,
          std::span<const ExtinctionRecord> db, std::span<const double> stderr)
      : measured_(measured),
        cfg_(cfg),
        model_(lut, db, std::vector<double>(measured.wavelengths().begin(), measured.wavelengths().end())) {
    const std::size_t n = measured.size();
    sqrt_w_.assign(n, 1.0);
    if (cfg.noise_model == NoiseModel::PerWavelengthStderr) {
      if (stderr.size() != n) {
        throw Error(Errc::ConfigInvalid, "PerWavelengthStderr needs one stderr per measured wavelength");
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (!(stderr[i] > 0.0)) throw Error(Errc::ConfigInvalid, "stderr values must be > 0");
        sqrt_w_[i] = 1.0 / stderr[i];
      }
    }
    for (Parameter p : cfg.free_parameters) {
      const Bounds b = cfg.bounds_for(p);
      lo_.push_back(b.lo);
      hi_.push_back(b.hi);
      const double guess = get(cfg.initial_guess, p);
      guess_.push_back(guess);
      double scale = b.hi - b.lo;
      if (!std::isfinite(scale)) scale = std::abs(guess) > 0.0 ? std::abs(guess) : 1.0;
      scale_.push_back(scale);
    }
  }

  std::size_t data_size() const { return measured_.size(); }
  std::size_t size() const { return measured_.size() + (cfg_.regularization_weight > 0.0 ? free_count() : 0); }
  std::size_t free_count() const { return cfg_.free_parameters.size(); }
  double lo(std::size_t j) const { return lo_[j]; }
  double hi(std::size_t j) const { return hi_[j]; }
  double scale(std::size_t j) const { return scale_[j]; }

  SkinParameterVector params_at(const Eigen::VectorXd& theta) const {
    SkinParameterVector v = cfg_.initial_guess;
    for (std::size_t j = 0; j < free_count(); ++j) set(v, cfg_.free_parameters[j], theta[static_cast<Eigen::Index>(j)]);
    return v;
  }

  Eigen::VectorXd initial_theta() const {
    Eigen::VectorXd t(static_cast<Eigen::Index>(free_count()));
    for (std::size_t j = 0; j < free_count(); ++j) t[static_cast<Eigen::Index>(j)] = guess_[j];
    return t;
  }

  Eigen::VectorXd residuals(const Eigen::VectorXd& theta) {
    const auto predicted = model_.predict(params_at(theta));
    return residuals_from(predicted, theta);
  }

  Eigen::VectorXd residuals_from(const Spectrum& predicted, const Eigen::VectorXd& theta) const {
    Eigen::VectorXd r(static_cast<Eigen::Index>(size()));
    const auto meas = measured_.values();
    const auto pred = predicted.values();
    for (std::size_t i = 0; i < meas.size(); ++i) {
      r[static_cast<Eigen::Index>(i)] = sqrt_w_[i] * (meas[i] - pred[i]);
    }
    if (cfg_.regularization_weight > 0.0) {
      const double s = std::sqrt(cfg_.regularization_weight);
      for (std::size_t j = 0; j < free_count(); ++j) {
        r[static_cast<Eigen::Index>(meas.size() + j)] =
            s * (theta[static_cast<Eigen::Index>(j)] - guess_[j]) / scale_[j];
      }
    }
    return r;
  }

  double data_norm(const Eigen::VectorXd& r) const { return r.head(static_cast<Eigen::Index>(data_size())).norm(); }

  Spectrum predict(const Eigen::VectorXd& theta) { return model_.predict(params_at(theta)); }
  Spectrum predict_full(const SkinParameterVector& v) { return model_.predict(v); }

 private:
  const Spectrum& measured_;
  const FitConfig& cfg_;
  ForwardModel model_;
  std::vector<double> sqrt_w_;
  std::vector<double> lo_, hi_, scale_, guess_;
};

// Jacobian w.r.t. scaled parameters u_j = theta_j / scale_j, by forward
// differences (backward when the forward point leaves the box or the grid).
Eigen::MatrixXd jacobian(Problem& prob, const Eigen::VectorXd& theta, const Eigen::VectorXd& r0, double rel_step) {
  const auto m = static_cast<Eigen::Index>(prob.size());
  const auto p = static_cast<Eigen::Index>(prob.free_count());
  Eigen::MatrixXd jac(m, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    double h = rel_step * std::abs(theta[j]);
    if (h == 0.0) h = rel_step * prob.scale(ju);
    Eigen::VectorXd column;
    for (double direction : {1.0, -1.0}) {
      Eigen::VectorXd t = theta;
      t[j] = theta[j] + direction * h;
      if (t[j] > prob.hi(ju) || t[j] < prob.lo(ju)) continue;
      try {
        column = (prob.residuals(t) - r0) / (direction * h);
        break;
      } catch (const Error& e) {
        if (e.code() != Errc::OutOfGrid) throw;
      }
    }
    if (column.size() == 0) column = Eigen::VectorXd::Zero(m);
    jac.col(j) = column * prob.scale(ju);
  }
  return jac;
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameters

std::string_view to_string(Parameter p) noexcept {
  switch (p) {
    case Parameter::CHb: return "c_hb";
    case Parameter::CO2Hb: return "c_o2hb";
    case Parameter::CCOHb: return "c_cohb";
    case Parameter::NumberDensity: return "number_density";
    case Parameter::CalibrationFactor: return "calibration_factor";
    case Parameter::Radius: return "radius_um";
    case Parameter::SigmaGeom: return "sigma_geom";
  }
  return "?";
}

Parameter parameter_from_string(std::string_view name) {
  for (Parameter p : {Parameter::CHb, Parameter::CO2Hb, Parameter::CCOHb, Parameter::NumberDensity,
                      Parameter::CalibrationFactor, Parameter::Radius, Parameter::SigmaGeom}) {
    if (to_string(p) == name) return p;
  }
  throw Error(Errc::ConfigInvalid, "unknown fit parameter '" + std::string(name) + "'");
}

double get(const SkinParameterVector& v, Parameter p) {
  switch (p) {
    case Parameter::CHb: return v.concentrations.get(Chromophore::Hb);
    case Parameter::CO2Hb: return v.concentrations.get(Chromophore::O2Hb);
    case Parameter::CCOHb: return v.concentrations.get(Chromophore::COHb);
    case Parameter::NumberDensity: return v.scatterer.number_density_per_mm3;
    case Parameter::CalibrationFactor: return v.calibration_factor;
    case Parameter::Radius:
      if (const auto* mono = std::get_if<mie::Monodisperse>(&v.scatterer.distribution)) return mono->radius_um;
      return std::get<mie::LogNormal>(v.scatterer.distribution).median_radius_um;
    case Parameter::SigmaGeom:
      if (const auto* ln = std::get_if<mie::LogNormal>(&v.scatterer.distribution)) return ln->sigma_geom;
      throw Error(Errc::ConfigInvalid, "sigma_geom requires a lognormal scatterer");
  }
  throw Error(Errc::Internal, "unhandled parameter");
}

void set(SkinParameterVector& v, Parameter p, double value) {
  switch (p) {
    case Parameter::CHb: v.concentrations.set(Chromophore::Hb, value); return;
    case Parameter::CO2Hb: v.concentrations.set(Chromophore::O2Hb, value); return;
    case Parameter::CCOHb: v.concentrations.set(Chromophore::COHb, value); return;
    case Parameter::NumberDensity: v.scatterer.number_density_per_mm3 = value; return;
    case Parameter::CalibrationFactor: v.calibration_factor = value; return;
    case Parameter::Radius:
      if (auto* mono = std::get_if<mie::Monodisperse>(&v.scatterer.distribution)) {
        mono->radius_um = value;
      } else {
        std::get<mie::LogNormal>(v.scatterer.distribution).median_radius_um = value;
      }
      return;
    case Parameter::SigmaGeom:
      if (auto* ln = std::get_if<mie::LogNormal>(&v.scatterer.distribution)) {
        ln->sigma_geom = value;
        return;
      }
      throw Error(Errc::ConfigInvalid, "sigma_geom requires a lognormal scatterer");
  }
}

Bounds default_bounds(Parameter p) noexcept {
  switch (p) {
    case Parameter::CHb:
    case Parameter::CO2Hb:
    case Parameter::CCOHb: return {0.0, 5.0};
    case Parameter::NumberDensity: return {1e6, 1e10};
    case Parameter::CalibrationFactor: return {0.1, 10.0};
    case Parameter::Radius: return {0.05, 5.0};
    case Parameter::SigmaGeom: return {1.0, 3.0};
  }
  return {0.0, 1.0};
}

void SkinParameterVector::validate() const {
  scatterer.validate();
  if (!(calibration_factor >= 0.1 && calibration_factor <= 10.0)) {
    throw Error(Errc::InvalidArgument, "calibration_factor must lie in [0.1, 10]");
  }
}

Bounds FitConfig::bounds_for(Parameter p) const {
  auto it = bounds.find(p);
  return it == bounds.end() ? default_bounds(p) : it->second;
}

void FitConfig::validate() const {
  if (free_parameters.empty()) throw Error(Errc::ConfigInvalid, "no free parameters");
  for (std::size_t i = 0; i < free_parameters.size(); ++i) {
    for (std::size_t k = i + 1; k < free_parameters.size(); ++k) {
      if (free_parameters[i] == free_parameters[k]) {
        throw Error(Errc::ConfigInvalid, "parameter listed twice: " + std::string(to_string(free_parameters[i])));
      }
    }
  }
  for (Parameter p : free_parameters) {
    const Bounds b = bounds_for(p);
    const double guess = get(initial_guess, p);
    if (!(b.lo < b.hi)) throw Error(Errc::ConfigInvalid, "bounds of " + std::string(to_string(p)) + " need lo < hi");
    if (!(guess >= b.lo && guess <= b.hi)) {
      throw Error(Errc::ConfigInvalid, "initial guess of " + std::string(to_string(p)) + " outside its bounds");
    }
  }
  if (!(regularization_weight >= 0.0)) throw Error(Errc::ConfigInvalid, "regularization_weight must be >= 0");
  if (max_iterations < 0) throw Error(Errc::ConfigInvalid, "max_iterations must be >= 0");
  if (!(convergence_tol > 0.0)) throw Error(Errc::ConfigInvalid, "convergence_tol must be > 0");
  if (!(initial_damping > 0.0) || !(damping_factor > 1.0) || !(fd_relative_step > 0.0)) {
    throw Error(Errc::ConfigInvalid, "damping and finite-difference settings must be positive");
  }
  try {
    initial_guess.validate();
  } catch (const Error& e) {
    throw Error(Errc::ConfigInvalid, e.what());
  }
}

// ---------------------------------------------------------------------------
// Forward model

ForwardModel::ForwardModel(const mcrt::ForwardLut& lut, std::span<const ExtinctionRecord> db, std::vector<double> grid)
    : lut_(lut),
      db_(db),
      grid_(std::move(grid)),
      mu_a_axis_(lut.axis_index(mcrt::kAxisMuA)),
      mu_s_axis_(lut.axis_index(mcrt::kAxisMuSPrime)) {
  if (lut.axes().size() != 2) throw Error(Errc::InvalidArgument, "forward model needs a two-axis LUT");
}

const std::vector<double>& ForwardModel::reduced_scattering(const mie::ScattererModel& model) {
  // mu_s' is linear in number density: cache the unit-density spectrum.
  mie::ScattererModel unit = model;
  unit.number_density_per_mm3 = 1.0;
  if (!cached_model_ || !(*cached_model_ == unit)) {
    cached_mu_s_prime_.clear();
    for (double wl : grid_) cached_mu_s_prime_.push_back(mie::bulk_scattering(unit, wl).reduced());
    cached_model_ = unit;
  }
  return cached_mu_s_prime_;
}

std::vector<std::pair<double, double>> ForwardModel::optical_coordinates(const SkinParameterVector& params) {
  const auto mu_a = spectral::absorption_spectrum(params.concentrations, db_, grid_);
  const auto& unit = reduced_scattering(params.scatterer);
  std::vector<std::pair<double, double>> out(grid_.size());
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    out[i] = {mu_a.values()[i], params.scatterer.number_density_per_mm3 * unit[i]};
  }
  return out;
}

Spectrum ForwardModel::predict(const SkinParameterVector& params) {
  const auto coords = optical_coordinates(params);
  std::vector<double> r(grid_.size());
  double c[2];
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    c[mu_a_axis_] = coords[i].first;
    c[mu_s_axis_] = coords[i].second;
    try {
      r[i] = params.calibration_factor * mcrt::lut_reflectance(lut_, c);
    } catch (const Error& e) {
      if (e.code() != Errc::OutOfGrid) throw;
      throw Error(Errc::OutOfGrid, "at " + std::to_string(grid_[i]) + " nm: mu_a=" + std::to_string(coords[i].first) +
                                       " mu_s'=" + std::to_string(coords[i].second) + " (" + e.what() + ")");
    }
  }
  return Spectrum(grid_, std::move(r), SpectrumKind::Reflectance);
}

Spectrum predict_spectrum(const SkinParameterVector& params, const mcrt::ForwardLut& lut,
                          std::span<const double> grid, std::span<const ExtinctionRecord> db) {
  ForwardModel model(lut, db, std::vector<double>(grid.begin(), grid.end()));
  return model.predict(params);
}

// ---------------------------------------------------------------------------
// Fitting

FitResult fit(const Spectrum& measured, const FitConfig& cfg, const mcrt::ForwardLut& lut,
              std::span<const ExtinctionRecord> db, std::span<const double> measured_stderr) {
  cfg.validate();
  Problem prob(measured, cfg, lut, db, measured_stderr);
  const auto p = static_cast<Eigen::Index>(prob.free_count());

  Eigen::VectorXd theta = prob.initial_theta();
  Eigen::VectorXd r;
  try {
    r = prob.residuals(theta);
  } catch (const Error& e) {
    if (e.code() == Errc::OutOfGrid) throw Error(Errc::InfeasibleStart, e.what());
    throw;
  }
  if (!finite_all(r)) throw Error(Errc::NonFiniteResidual, "residuals at the initial guess are not finite");

  FitResult result;
  double f = r.squaredNorm();
  double damping = cfg.initial_damping;
  int iteration = 0;
  bool converged = f <= kTinyObjective;
  result.trace.push_back({0, f, damping, true});

  while (!converged && iteration < cfg.max_iterations) {
    ++iteration;
    const Eigen::MatrixXd jac = jacobian(prob, theta, r, cfg.fd_relative_step);
    const Eigen::VectorXd grad = jac.transpose() * r;
    const Eigen::MatrixXd normal = jac.transpose() * jac;

    // Parameters pinned at a bound with the gradient pushing outward stay fixed.
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      const bool at_lo = theta[j] <= prob.lo(ju) && grad[j] > 0.0;
      const bool at_hi = theta[j] >= prob.hi(ju) && grad[j] < 0.0;
      if (!at_lo && !at_hi) active.push_back(j);
    }
    if (active.empty()) {
      converged = true;
      break;
    }
    const auto k = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd a(k, k);
    Eigen::VectorXd b(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      b[i] = -grad[active[static_cast<std::size_t>(i)]];
      for (Eigen::Index c = 0; c < k; ++c) a(i, c) = normal(active[static_cast<std::size_t>(i)], active[static_cast<std::size_t>(c)]);
    }

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd damped = a;
      damped.diagonal().array() += damping;
      const Eigen::VectorXd step = damped.ldlt().solve(b);
      Eigen::VectorXd candidate = theta;
      for (Eigen::Index i = 0; i < k; ++i) {
        const Eigen::Index j = active[static_cast<std::size_t>(i)];
        const auto ju = static_cast<std::size_t>(j);
        candidate[j] = std::clamp(theta[j] + step[i] * prob.scale(ju), prob.lo(ju), prob.hi(ju));
      }

      double f_new = std::numeric_limits<double>::infinity();
      Eigen::VectorXd r_new;
      if (step.allFinite() && candidate != theta) {
        try {
          r_new = prob.residuals(candidate);
          if (finite_all(r_new)) f_new = r_new.squaredNorm();
        } catch (const Error& e) {
          if (e.code() != Errc::OutOfGrid) throw;
        }
      }

      if (f_new < f) {
        const double rel_decrease = (f - f_new) / f;
        theta = candidate;
        r = r_new;
        f = f_new;
        damping = std::max(damping / cfg.damping_factor, kMinDamping);
        result.trace.push_back({iteration, f, damping, true});
        accepted = true;
        if (rel_decrease < cfg.convergence_tol || f <= kTinyObjective) converged = true;
      } else {
        damping *= cfg.damping_factor;
        result.trace.push_back({iteration, f_new, damping, false});
        if (damping > kMaxDamping) {
          // no descent direction left inside the box: stationary point
          converged = true;
          break;
        }
      }
    }
  }

  result.estimate = prob.params_at(theta);
  result.objective = f;
  result.residual_norm = prob.data_norm(r);
  const double dof = std::max<double>(1.0, static_cast<double>(prob.data_size()) - static_cast<double>(p));
  result.chi2_per_dof = r.head(static_cast<Eigen::Index>(prob.data_size())).squaredNorm() / dof;
  result.iterations = iteration;
  result.converged = converged;
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const double tol = 1e-12 * prob.scale(ju);
    result.at_bound[cfg.free_parameters[ju]] =
        std::abs(theta[j] - prob.lo(ju)) <= tol || std::abs(theta[j] - prob.hi(ju)) <= tol;
  }
  result.predicted = prob.predict(theta);
  if (!std::isfinite(result.residual_norm)) throw Error(Errc::NonFiniteResidual, "final residual is not finite");
  return result;
}

double objective(const Spectrum& measured, const FitConfig& cfg, const SkinParameterVector& params,
                 const mcrt::ForwardLut& lut, std::span<const ExtinctionRecord> db,
                 std::span<const double> measured_stderr) {
  Problem prob(measured, cfg, lut, db, measured_stderr);
  Eigen::VectorXd theta(static_cast<Eigen::Index>(prob.free_count()));
  for (std::size_t j = 0; j < prob.free_count(); ++j) {
    theta[static_cast<Eigen::Index>(j)] = get(params, cfg.free_parameters[j]);
  }
  return prob.residuals_from(prob.predict_full(params), theta).squaredNorm();
}

std::vector<std::pair<double, double>> scan_objective(const Spectrum& measured, const FitConfig& cfg,
                                                      const mcrt::ForwardLut& lut,
                                                      std::span<const ExtinctionRecord> db, Parameter axis,
                                                      std::span<const double> nodes,
                                                      std::span<const double> measured_stderr) {
  const Bounds b = cfg.bounds_for(axis);
  std::vector<std::pair<double, double>> out;
  out.reserve(nodes.size());
  for (double node : nodes) {
    if (!(node >= b.lo && node <= b.hi)) {
      throw Error(Errc::InvalidArgument, "scan node " + std::to_string(node) + " outside the bounds of " +
                                             std::string(to_string(axis)));
    }
    SkinParameterVector v = cfg.initial_guess;
    set(v, axis, node);
    out.emplace_back(node, objective(measured, cfg, v, lut, db, measured_stderr));
  }
  return out;
}

Spectrum apply_window(const Spectrum& measured, const std::optional<std::pair<double, double>>& window_nm) {
  if (!window_nm) return measured;
  std::vector<double> wl, v;
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const double x = measured.wavelengths()[i];
    if (x >= window_nm->first && x <= window_nm->second) {
      wl.push_back(x);
      v.push_back(measured.values()[i]);
    }
  }
  if (wl.size() < 2) throw Error(Errc::ConfigInvalid, "fewer than two measured points inside the window");
  return Spectrum(std::move(wl), std::move(v), measured.kind());
}

// ---------------------------------------------------------------------------
// JSON

void to_json(Json& j, const SkinParameterVector& v) {
  j = Json{{"concentrations", v.concentrations},
           {"scatterer", v.scatterer},
           {"calibration_factor", v.calibration_factor}};
}

void from_json(const Json& j, SkinParameterVector& v) {
  v.concentrations = required<ChromophoreConcentrations>(j, "concentrations");
  v.scatterer = required<mie::ScattererModel>(j, "scatterer");
  v.calibration_factor = optional<double>(j, "calibration_factor", 1.0);
}

void to_json(Json& j, const FitConfig& c) {
  Json free = Json::array();
  for (Parameter p : c.free_parameters) free.push_back(to_string(p));
  Json bounds = Json::object();
  for (const auto& [p, b] : c.bounds) {
    bounds[std::string(to_string(p))] = Json::array({b.lo, std::isfinite(b.hi) ? Json(b.hi) : Json(nullptr)});
  }
  j = Json{{"free_parameters", free},
           {"bounds", bounds},
           {"regularization_weight", c.regularization_weight},
           {"initial_guess", c.initial_guess},
           {"max_iterations", c.max_iterations},
           {"convergence_tol", c.convergence_tol},
           {"noise_model", c.noise_model == NoiseModel::Uniform ? "uniform" : "per_wavelength_stderr"},
           {"initial_damping", c.initial_damping},
           {"damping_factor", c.damping_factor},
           {"fd_relative_step", c.fd_relative_step}};
}

void from_json(const Json& j, FitConfig& c) {
  FitConfig d;
  c = FitConfig{};
  if (j.contains("free_parameters")) {
    c.free_parameters.clear();
    for (const auto& name : required<std::vector<std::string>>(j, "free_parameters")) {
      c.free_parameters.push_back(parameter_from_string(name));
    }
  }
  const auto bounds = optional<Json>(j, "bounds", Json::object());
  for (const auto& [name, pair] : bounds.items()) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number()) {
      throw Error(Errc::ConfigInvalid, "bounds of '" + name + "' must be [lo, hi]");
    }
    // null upper bound means unbounded above
    const double hi = pair[1].is_null() ? std::numeric_limits<double>::infinity() : pair[1].get<double>();
    c.bounds[parameter_from_string(name)] = {pair[0].get<double>(), hi};
  }
  c.regularization_weight = optional<double>(j, "regularization_weight", d.regularization_weight);
  c.initial_guess = required<SkinParameterVector>(j, "initial_guess");
  c.max_iterations = optional<int>(j, "max_iterations", d.max_iterations);
  c.convergence_tol = optional<double>(j, "convergence_tol", d.convergence_tol);
  const auto noise = optional<std::string>(j, "noise_model", "uniform");
  if (noise == "uniform") {
    c.noise_model = NoiseModel::Uniform;
  } else if (noise == "per_wavelength_stderr") {
    c.noise_model = NoiseModel::PerWavelengthStderr;
  } else {
    throw Error(Errc::ConfigInvalid, "unknown noise_model '" + noise + "'");
  }
  c.initial_damping = optional<double>(j, "initial_damping", d.initial_damping);
  c.damping_factor = optional<double>(j, "damping_factor", d.damping_factor);
  c.fd_relative_step = optional<double>(j, "fd_relative_step", d.fd_relative_step);
}

void to_json(Json& j, const FitResult& r) {
  Json at_bound = Json::object();
  for (const auto& [p, flag] : r.at_bound) at_bound[std::string(to_string(p))] = flag;
  Json trace = Json::array();
  for (const auto& t : r.trace) {
    trace.push_back(Json{{"iteration", t.iteration}, {"objective", t.objective}, {"damping", t.damping}, {"accepted", t.accepted}});
  }
  j = Json{{"estimate", r.estimate},
           {"objective", r.objective},
           {"residual_norm", r.residual_norm},
           {"chi2_per_dof", r.chi2_per_dof},
           {"iterations", r.iterations},
           {"converged", r.converged},
           {"at_bound", at_bound},
           {"predicted", r.predicted},
           {"trace", trace}};
  if (r.estimate.concentrations.get(Chromophore::Hb) + r.estimate.concentrations.get(Chromophore::O2Hb) +
          r.estimate.concentrations.get(Chromophore::COHb) > 0.0) {
    j["cohb_fraction"] = spectral::cohb_fraction(r.estimate.concentrations);
  }
}

void from_json(const Json& j, FitResult& r) {
  r.estimate = required<SkinParameterVector>(j, "estimate");
  r.objective = optional<double>(j, "objective", 0.0);
  r.residual_norm = required<double>(j, "residual_norm");
  r.chi2_per_dof = required<double>(j, "chi2_per_dof");
  r.iterations = required<int>(j, "iterations");
  r.converged = required<bool>(j, "converged");
  r.at_bound.clear();
  const auto at_bound = optional<Json>(j, "at_bound", Json::object());
  for (const auto& [name, flag] : at_bound.items()) {
    r.at_bound[parameter_from_string(name)] = flag.get<bool>();
  }
  r.predicted = required<Spectrum>(j, "predicted");
  r.trace.clear();
  for (const auto& t : optional<Json>(j, "trace", Json::array())) {
    r.trace.push_back({t.at("iteration").get<int>(), t.at("objective").get<double>(), t.at("damping").get<double>(),
                       t.at("accepted").get<bool>()});
  }
}

void to_json(Json& j, const AnalysisConfig& c) {
  j = c.fit;
  j["lut"] = c.lut;
  if (c.window_nm) j["window_nm"] = Json::array({c.window_nm->first, c.window_nm->second});
}

void from_json(const Json& j, AnalysisConfig& c) {
  c.lut = required<std::string>(j, "lut");
  c.window_nm.reset();
  if (j.contains("window_nm") && !j.at("window_nm").is_null()) {
    const auto w = required<std::vector<double>>(j, "window_nm");
    if (w.size() != 2 || !(w[0] < w[1])) throw Error(Errc::ConfigInvalid, "window_nm must be [lo, hi] with lo < hi");
    c.window_nm = std::make_pair(w[0], w[1]);
  }
  c.fit = j.get<FitConfig>();
  c.fit.validate();
}

}  // namespace livorlab::inverse
