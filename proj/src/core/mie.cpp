#include "livorlab/mie.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace livorlab::mie {

namespace {

using cdouble = std::complex<double>;
constexpr double kPi = std::numbers::pi;

bool finite(cdouble z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

// psi_1(x) = sin x / x - cos x, with a series below 0.1 where the closed form cancels.
double psi1(double x) {
  if (x < 0.1) {
    double x2 = x * x;
    return x2 / 3.0 * (1.0 - x2 / 10.0 * (1.0 - x2 / 28.0));
  }
  return std::sin(x) / x - std::cos(x);
}

}  // namespace

std::size_t truncation_order(double x) {
  return static_cast<std::size_t>(std::ceil(x + 4.0 * std::cbrt(x) + 2.0));
}

MieResult mie_single(const SphereQuery& query) {
  const double x = query.size_parameter;
  const cdouble m = query.relative_index;
  if (!(x > 0.0) || !std::isfinite(x)) throw Error(Errc::InvalidArgument, "size parameter must be > 0");
  if (!(m.real() > 0.0) || m.imag() < 0.0) {
    throw Error(Errc::InvalidArgument, "relative index needs Re(m) > 0 and Im(m) >= 0");
  }

  const std::size_t nmax = truncation_order(x);
  const cdouble mx = m * x;
  // +15 (BHMIE) leaves ~1e-7 error once |mx| passes ~70; the recurrence forgets
  // its starting value only after a few dozen extra steps.
  const auto start =
      static_cast<std::size_t>(std::ceil(1.05 * std::max(static_cast<double>(nmax), std::abs(mx)))) + 60;

  // Downward recurrence D_{n-1} = n/z - 1/(D_n + n/z), for complex mx and real x.
  std::vector<cdouble> dm(start + 1, cdouble{});
  std::vector<double> dx(start + 1, 0.0);
  for (std::size_t n = start; n > 0; --n) {
    const double nd = static_cast<double>(n);
    dm[n - 1] = nd / mx - 1.0 / (dm[n] + nd / mx);
    dx[n - 1] = nd / x - 1.0 / (dx[n] + nd / x);
  }

  // psi_n(x) from the ratios psi_{n-1}/psi_n = D_n(x) + n/x, anchored at
  // whichever of psi_0, psi_1 is larger in magnitude.
  std::vector<double> psi(nmax + 1);
  const double p0 = std::sin(x);
  const double p1 = psi1(x);
  if (std::abs(p0) >= std::abs(p1)) {
    psi[0] = p0;
    for (std::size_t n = 1; n <= nmax; ++n) psi[n] = psi[n - 1] / (dx[n] + static_cast<double>(n) / x);
  } else {
    psi[0] = p0;
    psi[1] = p1;
    for (std::size_t n = 2; n <= nmax; ++n) psi[n] = psi[n - 1] / (dx[n] + static_cast<double>(n) / x);
  }

  // chi_n by upward recurrence (dominant solution).
  double chi_prev = -std::sin(x);  // chi_{-1}
  double chi = std::cos(x);        // chi_0
  cdouble xi_prev(psi[0], -chi);   // xi_0 = psi_0 - i chi_0

  double ext_sum = 0.0, sca_sum = 0.0, g_sum = 0.0;
  cdouble a_prev{}, b_prev{};
  for (std::size_t n = 1; n <= nmax; ++n) {
    const double nd = static_cast<double>(n);
    const double chi_n = (2.0 * nd - 1.0) / x * chi - chi_prev;
    chi_prev = chi;
    chi = chi_n;
    const cdouble xi(psi[n], -chi_n);

    const cdouble da = dm[n] / m + nd / x;
    const cdouble db = m * dm[n] + nd / x;
    const cdouble a = psi[n] * (dm[n] / m - dx[n]) / (da * xi - xi_prev);
    const cdouble b = psi[n] * (m * dm[n] - dx[n]) / (db * xi - xi_prev);
    if (!finite(a) || !finite(b)) {
      throw Error(Errc::NonConvergent, "Mie coefficients not finite at n=" + std::to_string(n) +
                                           ", x=" + std::to_string(x));
    }

    const double w = 2.0 * nd + 1.0;
    ext_sum += w * (a.real() + b.real());
    sca_sum += w * (std::norm(a) + std::norm(b));
    g_sum += w / (nd * (nd + 1.0)) * std::real(a * std::conj(b));
    if (n > 1) {
      const double np = nd - 1.0;
      g_sum += np * (np + 2.0) / (np + 1.0) * std::real(a_prev * std::conj(a) + b_prev * std::conj(b));
    }
    a_prev = a;
    b_prev = b;
    xi_prev = xi;
  }

  MieResult r;
  const double x2 = x * x;
  r.q_ext = 2.0 / x2 * ext_sum;
  r.q_sca = 2.0 / x2 * sca_sum;
  r.anisotropy_g = r.q_sca > 0.0 ? 4.0 / x2 * g_sum / r.q_sca : 0.0;
  if (!std::isfinite(r.q_ext) || !std::isfinite(r.q_sca) || !std::isfinite(r.anisotropy_g)) {
    throw Error(Errc::NonConvergent, "Mie series produced non-finite efficiencies");
  }
  return r;
}

void ScattererModel::validate() const {
  auto in_index_range = [](double n) { return n > 1.0 && n < 3.0; };
  if (!in_index_range(n_particle) || !in_index_range(n_medium)) {
    throw Error(Errc::InvalidArgument, "refractive indices must lie in (1, 3)");
  }
  if (!(number_density_per_mm3 >= 0.0) || !std::isfinite(number_density_per_mm3)) {
    throw Error(Errc::InvalidArgument, "number density must be finite and >= 0");
  }
  if (const auto* mono = std::get_if<Monodisperse>(&distribution)) {
    if (!(mono->radius_um > 0.0)) throw Error(Errc::InvalidArgument, "radius must be > 0");
  } else {
    const auto& ln = std::get<LogNormal>(distribution);
    if (!(ln.median_radius_um > 0.0)) throw Error(Errc::InvalidArgument, "median radius must be > 0");
    if (!(ln.sigma_geom >= 1.0)) throw Error(Errc::InvalidArgument, "sigma_geom must be >= 1");
  }
}

BulkScattering bulk_scattering(const ScattererModel& model, double wavelength_nm) {
  model.validate();
  if (!(wavelength_nm > 0.0 && wavelength_nm < 10000.0)) {
    throw Error(Errc::InvalidArgument, "wavelength outside (0, 10000) nm");
  }
  const double wavelength_um = wavelength_nm / 1000.0;
  const cdouble m(model.n_particle / model.n_medium, 0.0);

  struct Node {
    double radius_um;
    double weight;
  };
  std::vector<Node> nodes;
  if (const auto* mono = std::get_if<Monodisperse>(&model.distribution)) {
    nodes.push_back({mono->radius_um, 1.0});
  } else {
    using Rule = boost::math::quadrature::gauss<double, 64>;
    const auto& ln = std::get<LogNormal>(model.distribution);
    const double sigma = std::log(ln.sigma_geom);
    const double mu = std::log(ln.median_radius_um);
    const auto& abscissa = Rule::abscissa();
    const auto& weights = Rule::weights();
    double total = 0.0;
    for (std::size_t k = 0; k < abscissa.size(); ++k) {
      for (double sign : {-1.0, 1.0}) {
        const double z = 4.0 * sign * abscissa[k];  // in units of sigma
        const double w = weights[k] * std::exp(-0.5 * z * z);
        nodes.push_back({std::exp(mu + sigma * z), w});
        total += w;
      }
    }
    for (auto& node : nodes) node.weight /= total;
  }

  double sigma_sum = 0.0, g_weighted = 0.0;
  for (const auto& node : nodes) {
    const double x = 2.0 * kPi * node.radius_um * model.n_medium / wavelength_um;
    const auto res = mie_single({x, m});
    const double sigma_sca = res.q_sca * kPi * node.radius_um * node.radius_um;  // um^2
    sigma_sum += node.weight * sigma_sca;
    g_weighted += node.weight * sigma_sca * res.anisotropy_g;
  }

  BulkScattering out;
  out.mu_s_per_mm = model.number_density_per_mm3 * sigma_sum * 1e-6;
  out.g = sigma_sum > 0.0 ? g_weighted / sigma_sum : 0.0;
  return out;
}

}  // namespace livorlab::mie
