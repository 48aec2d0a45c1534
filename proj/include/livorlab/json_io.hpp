#pragma once

// JSON mappings for the domain types that cross file and wire boundaries.
// Field names follow the domain types.

#include <json.hpp>

#include "livorlab/mcrt.hpp"
#include "livorlab/mie.hpp"
#include "livorlab/spectral.hpp"

namespace livorlab {

using Json = nlohmann::json;

/// Reads a required member, converting nlohmann errors into ConfigInvalid.
template <typename T>
T required(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(Errc::ConfigInvalid, std::string("missing field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigInvalid, std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T optional(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigInvalid, std::string("field '") + key + "': " + e.what());
  }
}

Json parse_json(std::string_view text);

}  // namespace livorlab

namespace livorlab::spectral {
void to_json(Json& j, const Spectrum& s);
Spectrum spectrum_from_json(const Json& j);
void to_json(Json& j, const ChromophoreConcentrations& c);
void from_json(const Json& j, ChromophoreConcentrations& c);
}  // namespace livorlab::spectral

namespace livorlab::mie {
void to_json(Json& j, const ScattererModel& m);
void from_json(const Json& j, ScattererModel& m);
}  // namespace livorlab::mie

namespace livorlab::mcrt {
void to_json(Json& j, const Layer& l);
void from_json(const Json& j, Layer& l);
void to_json(Json& j, const LayerStack& s);
void from_json(const Json& j, LayerStack& s);
void to_json(Json& j, const SimConfig& c);
void from_json(const Json& j, SimConfig& c);
void to_json(Json& j, const MCResult& r);
}  // namespace livorlab::mcrt

template <>
struct nlohmann::adl_serializer<livorlab::spectral::Spectrum> {
  static livorlab::spectral::Spectrum from_json(const livorlab::Json& j) {
    return livorlab::spectral::spectrum_from_json(j);
  }
  static void to_json(livorlab::Json& j, const livorlab::spectral::Spectrum& s) { livorlab::spectral::to_json(j, s); }
};
