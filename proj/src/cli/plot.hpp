#pragma once

#include <string>
#include <string_view>

#include "livorlab/spectral.hpp"

namespace livorlab::cli {

/// Measured points over the predicted curve with a residual strip beneath.
std::string render_fit_svg(const spectral::Spectrum& measured, const spectral::Spectrum& predicted,
                           std::string_view title);

}  // namespace livorlab::cli
