#include "livorlab/mie_reference.hpp"

#include <cmath>
#include <complex>
#include <vector>

namespace livorlab::mie {

using ld = long double;
using cld = std::complex<long double>;

MieResult mie_reference(const SphereQuery& query) {
  const ld x = query.size_parameter;
  const cld m(query.relative_index.real(), query.relative_index.imag());
  if (!(x > 0.0L)) throw Error(Errc::InvalidArgument, "size parameter must be > 0");
  const auto nmax = static_cast<std::size_t>(4.0L * std::ceil(x + 4.0L * std::cbrt(x) + 2.0L));
  const cld mx = m * x;

  // psi_n(x): Miller's algorithm, seeded far above nmax and normalized to sin x.
  const std::size_t start = nmax + static_cast<std::size_t>(std::sqrt(101.0L * nmax)) + 60;
  std::vector<ld> psi(start + 2, 0.0L);
  psi[start + 1] = 0.0L;
  psi[start] = 1e-300L;
  for (std::size_t n = start; n >= 1; --n) {
    psi[n - 1] = (2.0L * n + 1.0L) / x * psi[n] - psi[n + 1];
    if (std::abs(psi[n - 1]) > 1e300L) {
      for (std::size_t k = n - 1; k <= start + 1; ++k) psi[k] *= 1e-300L;
    }
  }
  const ld scale = std::sin(x) / psi[0];
  for (auto& p : psi) p *= scale;

  std::vector<ld> chi(nmax + 2);
  chi[0] = std::cos(x);
  chi[1] = std::cos(x) / x + std::sin(x);
  for (std::size_t n = 1; n + 1 <= nmax + 1; ++n) chi[n + 1] = (2.0L * n + 1.0L) / x * chi[n] - chi[n - 1];

  // D_n(mx) downward from well above both nmax and |mx|.
  const auto dstart = static_cast<std::size_t>(std::max<ld>(nmax, std::abs(mx)) * 1.1L) + 40;
  std::vector<cld> d(dstart + 1, cld(0.0L, 0.0L));
  for (std::size_t n = dstart; n >= 1; --n) {
    const cld q = static_cast<ld>(n) / mx;
    d[n - 1] = q - 1.0L / (d[n] + q);
  }

  std::vector<cld> a(nmax + 2), b(nmax + 2);
  for (std::size_t n = 1; n <= nmax + 1; ++n) {
    const cld xi_n(psi[n], -chi[n]);
    const cld xi_nm1(psi[n - 1], -chi[n - 1]);
    const ld nx = static_cast<ld>(n) / x;
    const cld ta = d[n] / m + nx;
    const cld tb = d[n] * m + nx;
    a[n] = (ta * psi[n] - psi[n - 1]) / (ta * xi_n - xi_nm1);
    b[n] = (tb * psi[n] - psi[n - 1]) / (tb * xi_n - xi_nm1);
  }

  ld ext = 0.0L, sca = 0.0L, asym = 0.0L;
  for (std::size_t n = 1; n <= nmax; ++n) {
    const ld nn = static_cast<ld>(n);
    ext += (2.0L * nn + 1.0L) * (a[n] + b[n]).real();
    sca += (2.0L * nn + 1.0L) * (std::norm(a[n]) + std::norm(b[n]));
    asym += nn * (nn + 2.0L) / (nn + 1.0L) * (a[n] * std::conj(a[n + 1]) + b[n] * std::conj(b[n + 1])).real() +
            (2.0L * nn + 1.0L) / (nn * (nn + 1.0L)) * (a[n] * std::conj(b[n])).real();
  }
  const ld x2 = x * x;
  MieResult r;
  r.q_ext = static_cast<double>(2.0L / x2 * ext);
  r.q_sca = static_cast<double>(2.0L / x2 * sca);
  r.anisotropy_g = static_cast<double>(4.0L / x2 * asym / (2.0L / x2 * sca));
  return r;
}

}  // namespace livorlab::mie
