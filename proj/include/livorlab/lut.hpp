#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "livorlab/mcrt.hpp"

namespace livorlab::mcrt {

inline constexpr std::string_view kAxisMuA = "mu_a";
inline constexpr std::string_view kAxisMuSPrime = "mu_s_prime";

struct LutAxis {
  std::string name;
  std::vector<double> nodes;  // strictly increasing

  static LutAxis log_spaced(std::string name, double first, double last, std::size_t count);
  friend bool operator==(const LutAxis&, const LutAxis&) = default;
};

/// Layer stack whose `variable_layer` receives each grid node's mu_a and
/// mu_s = mu_s' / (1 - g), keeping that layer's g and n.
struct LutTemplate {
  LayerStack stack;
  std::size_t variable_layer = 0;
};

/// Single semi-infinite dermis-like layer (n = 1.4, g = 0) under air.
LutTemplate default_lut_template();

/// 16 log-spaced mu_a nodes over [0.005, 5] and 12 log-spaced mu_s' nodes over [0.3, 10], 1/mm.
std::vector<LutAxis> default_lut_axes();

inline constexpr std::size_t kDefaultMaxLutNodes = 4096;

/// Precomputed diffuse reflectance over a grid of optical properties.
/// Values are stored row-major with the last axis varying fastest.
class ForwardLut {
 public:
  ForwardLut(std::vector<LutAxis> axes, std::vector<double> values, std::vector<double> stderrs,
             std::string provenance);

  const std::vector<LutAxis>& axes() const noexcept { return axes_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> stderrs() const noexcept { return stderrs_; }
  /// JSON document with the template stack and simulation settings.
  const std::string& provenance() const noexcept { return provenance_; }

  std::size_t axis_index(std::string_view name) const;
  std::size_t flat_index(std::span<const std::size_t> node) const;

  friend bool operator==(const ForwardLut&, const ForwardLut&) = default;

 private:
  std::vector<LutAxis> axes_;
  std::vector<double> values_;
  std::vector<double> stderrs_;
  std::string provenance_;
};

/// Runs `simulate` once per grid node with the same seed. The two axes must be
/// named mu_a and mu_s_prime, in either order.
ForwardLut build_lut(const LutTemplate& tmpl, const std::vector<LutAxis>& axes, const SimConfig& cfg,
                     unsigned workers = 0, std::size_t max_nodes = kDefaultMaxLutNodes);

/// Multilinear interpolation in the cell containing `coords` (one value per
/// axis, in axis order). Raises OutOfGrid outside the axis ranges.
double lut_reflectance(const ForwardLut& lut, std::span<const double> coords);

/// Same interpolation applied to the stderr table.
double lut_stderr(const ForwardLut& lut, std::span<const double> coords);

/// FLUT1 container; see docs/flut1.md.
std::string serialize_lut(const ForwardLut& lut);
ForwardLut deserialize_lut(std::string_view bytes);
void save_lut(const ForwardLut& lut, const std::filesystem::path& path);
ForwardLut load_lut(const std::filesystem::path& path);

}  // namespace livorlab::mcrt
