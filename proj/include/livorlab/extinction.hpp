#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "livorlab/spectral.hpp"

namespace livorlab::extinction {

using spectral::ExtinctionRecord;

/// Directory holding the bundled data files. Honors LIVORLAB_DATA when set.
std::filesystem::path data_dir();

/// Bundled hemoglobin table.
std::filesystem::path default_table();

/// Manifest path for a table: `<dir>/<stem>.manifest`.
std::filesystem::path manifest_for(const std::filesystem::path& table);

std::string sha256_hex(std::string_view bytes);

/// Writes the manifest line `sha256 <hex> <filename>` next to `table`.
void write_manifest(const std::filesystem::path& table);

/// Parses `wavelength_nm,hb,o2hb,cohb`. Missing chromophore columns or a grid
/// not covering 380-780 nm raise CoverageGap.
std::vector<ExtinctionRecord> parse_extinction_csv(std::string_view text);

/// Loads a table after checking its content hash against the manifest.
std::vector<ExtinctionRecord> load_extinction_db(
    const std::optional<std::filesystem::path>& path = std::nullopt);

inline constexpr double kCoverageStartNm = 380.0;
inline constexpr double kCoverageStopNm = 780.0;

}  // namespace livorlab::extinction
