#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "livorlab/spectral.hpp"

namespace livorlab::spectral {

/// A parsed spectrum together with its exact text form. Storage and export
/// operate on `text`, so a round trip reproduces the input bytes.
struct TextSpectrum {
  std::string text;
  Spectrum spectrum;
};

/// Comma-separated table with a fixed header row. Lines starting with '#'
/// before the header are comments. Tokens are kept verbatim.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based, per row
};

CsvTable parse_csv_table(std::string_view text, const std::vector<std::string>& expected_header);

double parse_decimal(std::string_view token, std::size_t line);

/// `wavelength_nm,value`
TextSpectrum parse_spectrum_csv(std::string_view text, SpectrumKind kind);

struct RawBundle {
  TextSpectrum sample;
  TextSpectrum white;
  TextSpectrum dark;
};

/// `wavelength_nm,sample,white,dark`, split into three single-spectrum texts
/// that reuse the input's decimal tokens.
RawBundle parse_bundle_csv(std::string_view text);

/// Shortest decimal that parses back to the same double.
std::string format_decimal(double value);

std::string format_spectrum_csv(const Spectrum& spectrum);

}  // namespace livorlab::spectral
