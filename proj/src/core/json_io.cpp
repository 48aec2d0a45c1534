#include "livorlab/json_io.hpp"

#include <cmath>

namespace livorlab {

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ParseError, e.what());
  }
}

}  // namespace livorlab

namespace livorlab::spectral {

void to_json(Json& j, const Spectrum& s) {
  j = Json{{"kind", to_string(s.kind())},
           {"wavelengths_nm", std::vector<double>(s.wavelengths().begin(), s.wavelengths().end())},
           {"values", std::vector<double>(s.values().begin(), s.values().end())}};
}

Spectrum spectrum_from_json(const Json& j) {
  return Spectrum(required<std::vector<double>>(j, "wavelengths_nm"), required<std::vector<double>>(j, "values"),
               spectrum_kind_from_string(optional<std::string>(j, "kind", "Reflectance")));
}

void to_json(Json& j, const ChromophoreConcentrations& c) {
  j = Json::object();
  for (const auto& [chromophore, value] : c.entries()) j[std::string(to_string(chromophore))] = value;
}

void from_json(const Json& j, ChromophoreConcentrations& c) {
  c = {};
  if (!j.is_object()) throw Error(Errc::ConfigInvalid, "concentrations must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number()) throw Error(Errc::ConfigInvalid, "concentration '" + key + "' is not a number");
    c.set(chromophore_from_string(key), value.get<double>());
  }
}

}  // namespace livorlab::spectral

namespace livorlab::mie {

void to_json(Json& j, const ScattererModel& m) {
  j = Json{{"number_density_per_mm3", m.number_density_per_mm3},
           {"n_particle", m.n_particle},
           {"n_medium", m.n_medium}};
  if (const auto* mono = std::get_if<Monodisperse>(&m.distribution)) {
    j["distribution"] = Json{{"type", "monodisperse"}, {"radius_um", mono->radius_um}};
  } else {
    const auto& ln = std::get<LogNormal>(m.distribution);
    j["distribution"] = Json{{"type", "lognormal"},
                             {"median_radius_um", ln.median_radius_um},
                             {"sigma_geom", ln.sigma_geom}};
  }
}

void from_json(const Json& j, ScattererModel& m) {
  m = ScattererModel{};
  m.number_density_per_mm3 = required<double>(j, "number_density_per_mm3");
  m.n_particle = optional<double>(j, "n_particle", 1.42);
  m.n_medium = optional<double>(j, "n_medium", 1.37);
  const Json dist = optional<Json>(j, "distribution", Json{{"type", "monodisperse"}, {"radius_um", 0.5}});
  const auto type = required<std::string>(dist, "type");
  if (type == "monodisperse") {
    m.distribution = Monodisperse{required<double>(dist, "radius_um")};
  } else if (type == "lognormal") {
    m.distribution = LogNormal{required<double>(dist, "median_radius_um"), required<double>(dist, "sigma_geom")};
  } else {
    throw Error(Errc::ConfigInvalid, "unknown size distribution '" + type + "'");
  }
  try {
    m.validate();
  } catch (const Error& e) {
    throw Error(Errc::ConfigInvalid, e.what());
  }
}

}  // namespace livorlab::mie

namespace livorlab::mcrt {

void to_json(Json& j, const Layer& l) {
  j = Json{{"mu_a", l.mu_a}, {"mu_s", l.mu_s}, {"g", l.g}, {"n", l.n}};
  j["thickness_mm"] = l.semi_infinite() ? Json(nullptr) : Json(l.thickness_mm);
}

void from_json(const Json& j, Layer& l) {
  l.mu_a = required<double>(j, "mu_a");
  l.mu_s = required<double>(j, "mu_s");
  l.g = optional<double>(j, "g", 0.0);
  l.n = optional<double>(j, "n", 1.0);
  l.thickness_mm = optional<double>(j, "thickness_mm", kInfiniteThickness);
}

void to_json(Json& j, const LayerStack& s) { j = Json{{"ambient_n", s.ambient_n}, {"layers", s.layers}}; }

void from_json(const Json& j, LayerStack& s) {
  s.ambient_n = optional<double>(j, "ambient_n", 1.0);
  s.layers = required<std::vector<Layer>>(j, "layers");
}

void to_json(Json& j, const SimConfig& c) {
  j = Json{{"photon_count", c.photon_count},           {"seed", c.seed},
           {"batch_size", c.batch_size},               {"roulette_threshold", c.roulette_threshold},
           {"roulette_survival", c.roulette_survival}, {"enable_roulette", c.enable_roulette}};
}

void from_json(const Json& j, SimConfig& c) {
  SimConfig d;
  c.photon_count = optional<std::uint64_t>(j, "photon_count", d.photon_count);
  c.seed = optional<std::uint64_t>(j, "seed", d.seed);
  c.batch_size = optional<std::uint64_t>(j, "batch_size", d.batch_size);
  c.roulette_threshold = optional<double>(j, "roulette_threshold", d.roulette_threshold);
  c.roulette_survival = optional<double>(j, "roulette_survival", d.roulette_survival);
  c.enable_roulette = optional<bool>(j, "enable_roulette", d.enable_roulette);
}

void to_json(Json& j, const MCResult& r) {
  j = Json{{"r_specular", r.r_specular},
           {"r_diffuse", r.r_diffuse},
           {"transmittance", r.transmittance},
           {"absorbed", r.absorbed},
           {"r_diffuse_stderr", r.r_diffuse_stderr},
           {"transmittance_stderr", r.transmittance_stderr},
           {"photons", r.photons},
           {"seed", r.seed}};
}

}  // namespace livorlab::mcrt
