#pragma once

#include <complex>
#include <cstddef>
#include <variant>

#include "livorlab/error.hpp"

namespace livorlab::mie {

/// Sphere of size parameter x = 2 pi r n_medium / lambda and relative
/// refractive index m = n_particle / n_medium (Im m >= 0 for absorbers).
struct SphereQuery {
  double size_parameter;
  std::complex<double> relative_index;
};

struct MieResult {
  double q_ext = 0.0;
  double q_sca = 0.0;
  double anisotropy_g = 0.0;
};

/// Partial-wave count ceil(x + 4 x^(1/3) + 2).
std::size_t truncation_order(double x);

/// Lorenz-Mie efficiencies and asymmetry parameter of a homogeneous sphere.
///
/// The logarithmic derivative D_n(mx) is computed by downward recurrence;
/// psi_n(x) is built from the real-argument log derivative so that small
/// spheres do not suffer the cancellation of the textbook formula.
MieResult mie_single(const SphereQuery& query);

struct Monodisperse {
  double radius_um;
  friend bool operator==(const Monodisperse&, const Monodisperse&) = default;
};

struct LogNormal {
  double median_radius_um;
  double sigma_geom;  // geometric standard deviation, >= 1
  friend bool operator==(const LogNormal&, const LogNormal&) = default;
};

struct ScattererModel {
  std::variant<Monodisperse, LogNormal> distribution = Monodisperse{0.5};
  double number_density_per_mm3 = 0.0;
  double n_particle = 1.42;
  double n_medium = 1.37;

  void validate() const;
  friend bool operator==(const ScattererModel&, const ScattererModel&) = default;
};

struct BulkScattering {
  double mu_s_per_mm = 0.0;
  double g = 0.0;

  double reduced() const noexcept { return mu_s_per_mm * (1.0 - g); }
};

/// Scattering coefficient and mean cosine of a sphere population at one
/// wavelength. Log-normal populations use 64-node Gauss-Legendre quadrature
/// over +-4 geometric standard deviations in log radius.
BulkScattering bulk_scattering(const ScattererModel& model, double wavelength_nm);

}  // namespace livorlab::mie
