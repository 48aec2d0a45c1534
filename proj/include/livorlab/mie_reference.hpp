#pragma once

#include "livorlab/mie.hpp"

namespace livorlab::mie {

/// Slow cross-check for mie_single, sharing none of its numerics: long double
/// throughout, Miller's downward recurrence for psi_n(x), upward chi_n(x),
/// the textbook a_n/b_n quotients and four times the usual number of terms.
/// Meant for x in [1e-2, 100]; small spheres lose digits to cancellation.
MieResult mie_reference(const SphereQuery& query);

}  // namespace livorlab::mie
