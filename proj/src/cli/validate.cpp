#include "validate.hpp"

#include <chrono>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <sstream>

#include "livorlab/extinction.hpp"
#include "livorlab/inverse.hpp"
#include "livorlab/lut.hpp"
#include "livorlab/mcrt.hpp"
#include "livorlab/mie_reference.hpp"

namespace livorlab::cli {

namespace {

using Clock = std::chrono::steady_clock;

CheckResult timed(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  const auto t0 = Clock::now();
  CheckResult r{name, false, "", 0.0};
  try {
    std::tie(r.passed, r.detail) = body();
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

mcrt::LayerStack random_stack(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  mcrt::LayerStack stack;
  stack.ambient_n = 1.0;
  const int layers = 1 + static_cast<int>(u(rng) * 3.0);
  for (int i = 0; i < layers; ++i) {
    mcrt::Layer l;
    l.mu_a = 2.0 * u(rng);
    l.mu_s = 0.1 + 19.9 * u(rng);
    l.g = 0.95 * u(rng);
    l.n = 1.0 + 0.5 * u(rng);
    const bool last = i + 1 == layers;
    l.thickness_mm = last && u(rng) < 0.5 ? mcrt::kInfiniteThickness : 0.05 + 1.95 * u(rng);
    stack.layers.push_back(l);
  }
  return stack;
}

}  // namespace

std::vector<CheckResult> run_validation(const ValidateOptions& opt) {
  std::vector<CheckResult> out;

  out.push_back(timed("energy conservation", [&] {
    std::mt19937_64 rng(opt.seed);
    const int stacks = opt.quick ? 5 : 20;
    mcrt::SimConfig cfg;
    cfg.photon_count = opt.quick ? 2'000 : 10'000;
    cfg.enable_roulette = false;
    double worst = 0.0;
    for (int i = 0; i < stacks; ++i) {
      cfg.seed = opt.seed + static_cast<std::uint64_t>(i);
      const auto r = mcrt::simulate(random_stack(rng), cfg, opt.workers);
      worst = std::max(worst, std::abs(r.total() - 1.0));
    }
    return std::pair{worst <= 1e-9, "max |sum - 1| = " + fmt(worst) + " over " + std::to_string(stacks) + " stacks"};
  }));

  out.push_back(timed("Beer-Lambert slab", [&] {
    mcrt::LayerStack stack{1.0, {mcrt::Layer{1.0, 0.0, 0.0, 1.0, 1.0}}};
    mcrt::SimConfig cfg;
    cfg.photon_count = opt.quick ? 100'000 : 1'000'000;
    cfg.seed = opt.seed;
    const auto r = mcrt::simulate(stack, cfg, opt.workers);
    const double err = std::abs(r.transmittance - std::exp(-1.0));
    return std::pair{err <= 3.0 * r.transmittance_stderr && err <= 5e-3,
                     "T = " + fmt(r.transmittance) + ", |T - 1/e| = " + fmt(err) + ", 3 se = " +
                         fmt(3.0 * r.transmittance_stderr)};
  }));

  out.push_back(timed("Mie against reference series", [&] {
    const std::pair<double, std::complex<double>> cases[] = {
        {0.1, {1.33, 0.0}},  {0.5, {1.5, 0.0}},    {1.0, {1.33, 0.01}}, {2.0, {1.5, 0.1}},   {5.0, {1.05, 0.0}},
        {10.0, {1.33, 0.0}}, {10.0, {1.5, 0.5}},   {20.0, {1.2, 1e-3}}, {35.0, {1.33, 0.1}}, {50.0, {1.04, 0.0}}};
    double worst = 0.0;
    for (const auto& [x, m] : cases) {
      const auto a = mie::mie_single({x, m});
      const auto b = mie::mie_reference({x, m});
      worst = std::max({worst, std::abs(a.q_ext / b.q_ext - 1.0), std::abs(a.q_sca / b.q_sca - 1.0),
                        std::abs(a.anisotropy_g - b.anisotropy_g) / std::max(std::abs(b.anisotropy_g), 1e-3)});
    }
    return std::pair{worst <= 1e-8, "max relative difference " + fmt(worst)};
  }));

  out.push_back(timed("Rayleigh limit", [&] {
    const double x = 1e-3;
    const std::complex<double> m(1.33, 0.0);
    const auto r = mie::mie_single({x, m});
    const double closed = 8.0 / 3.0 * std::pow(x, 4) * std::norm((m * m - 1.0) / (m * m + 2.0));
    const double rel = std::abs(r.q_sca / closed - 1.0);
    return std::pair{rel <= 1e-3 && std::abs(r.anisotropy_g) <= 1e-3,
                     "Q_sca relative error " + fmt(rel) + ", g = " + fmt(r.anisotropy_g)};
  }));

  out.push_back(timed("fit round trip", [&] {
    const auto db = extinction::load_extinction_db(opt.extinction_table);
    std::vector<mcrt::LutAxis> axes{mcrt::LutAxis::log_spaced(std::string(mcrt::kAxisMuA), 0.02, 3.0, opt.quick ? 7 : 10),
                                    mcrt::LutAxis::log_spaced(std::string(mcrt::kAxisMuSPrime), 0.5, 6.0, opt.quick ? 5 : 8)};
    mcrt::SimConfig sim;
    sim.photon_count = opt.quick ? 2'000 : 20'000;
    sim.seed = opt.seed;
    const auto lut = mcrt::build_lut(mcrt::default_lut_template(), axes, sim, opt.workers);

    inverse::SkinParameterVector truth;
    truth.concentrations = {{spectral::Chromophore::Hb, 0.02},
                            {spectral::Chromophore::O2Hb, 0.02},
                            {spectral::Chromophore::COHb, 0.012}};
    truth.scatterer.number_density_per_mm3 = 1.6e8;
    const auto grid = spectral::make_grid(500.0, 600.0, 2.0);
    const auto measured = inverse::predict_spectrum(truth, lut, grid, db);

    inverse::FitConfig cfg;
    cfg.free_parameters = {inverse::Parameter::CHb, inverse::Parameter::CO2Hb, inverse::Parameter::CCOHb,
                           inverse::Parameter::CalibrationFactor};
    cfg.initial_guess = truth;
    double factor = 1.15;
    for (auto p : cfg.free_parameters) {
      inverse::set(cfg.initial_guess, p, inverse::get(truth, p) * factor);
      factor = 2.0 - factor;
    }
    const auto fit = inverse::fit(measured, cfg, lut, db);
    double worst = 0.0;
    for (auto p : cfg.free_parameters) {
      worst = std::max(worst, std::abs(inverse::get(fit.estimate, p) / inverse::get(truth, p) - 1.0));
    }
    return std::pair{worst <= 1e-3, "max relative parameter error " + fmt(worst) + " after " +
                                        std::to_string(fit.iterations) + " iterations"};
  }));

  return out;
}

}  // namespace livorlab::cli
