#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "livorlab/error.hpp"

namespace livorlab::mcrt {

inline constexpr double kInfiniteThickness = std::numeric_limits<double>::infinity();

/// Optical properties of one plane-parallel layer. Coefficients in 1/mm.
struct Layer {
  double mu_a = 0.0;
  double mu_s = 0.0;
  double g = 0.0;
  double n = 1.0;
  double thickness_mm = kInfiniteThickness;

  bool semi_infinite() const noexcept { return thickness_mm == kInfiniteThickness; }
  bool spacer() const noexcept { return mu_a == 0.0 && mu_s == 0.0; }
};

/// Layers listed top to bottom; only the last one may be semi-infinite.
/// The same ambient index is assumed above and below the stack.
struct LayerStack {
  double ambient_n = 1.0;
  std::vector<Layer> layers;

  void validate() const;
};

struct SimConfig {
  std::uint64_t photon_count = 100'000;
  std::uint64_t seed = 1;
  std::uint64_t batch_size = 5'000;
  double roulette_threshold = 1e-4;
  double roulette_survival = 0.1;
  bool enable_roulette = true;

  void validate() const;
};

/// Tallies as fractions of launched weight.
struct MCResult {
  double r_specular = 0.0;
  double r_diffuse = 0.0;
  double transmittance = 0.0;
  double absorbed = 0.0;
  double r_diffuse_stderr = 0.0;
  double transmittance_stderr = 0.0;
  std::uint64_t photons = 0;
  std::uint64_t seed = 0;

  double total() const noexcept { return r_specular + r_diffuse + transmittance + absorbed; }
  friend bool operator==(const MCResult&, const MCResult&) = default;
};

/// Normal-incidence Fresnel reflectance ((n1 - n2) / (n1 + n2))^2.
double specular_reflectance(double n_ambient, double n_top);

/// Fresnel reflectance for unpolarised light crossing from n1 into n2 at
/// incidence cosine `cos_i`; `cos_t` receives the transmitted cosine.
double fresnel_reflectance(double n1, double n2, double cos_i, double& cos_t);

/// Layered-medium photon random walk with implicit capture, Henyey-Greenstein
/// deflection and Fresnel boundaries.
///
/// Photons run in batches; batch b draws from an independent stream derived
/// from (seed, b), and batch tallies are merged in batch order, so the result
/// is bit-identical for any `workers` value (0 picks the hardware count).
///
/// With roulette disabled a photon whose weight drops below 1e-14 deposits the
/// remainder as absorbed, so the four tallies sum to one. A photon that has
/// taken more than 1e5 interactions in a stack with no absorber and a
/// semi-infinite bottom can only leave through the top surface; its weight is
/// credited to r_diffuse at that point.
MCResult simulate(const LayerStack& stack, const SimConfig& cfg, unsigned workers = 0);

/// Counter-based 64-bit generator: output k of stream (seed, stream) is a
/// SplitMix64 finalisation of a Weyl sequence keyed by both values.
class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint64_t next() noexcept;
  /// Uniform in (0, 1].
  double uniform() noexcept { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

}  // namespace livorlab::mcrt
