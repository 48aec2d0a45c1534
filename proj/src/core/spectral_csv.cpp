#include "livorlab/spectral_csv.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace livorlab::spectral {

namespace {

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    // tolerate surrounding blanks but keep the token itself verbatim
    auto b = field.find_first_not_of(" \t");
    auto e = field.find_last_not_of(" \t");
    out.emplace_back(b == std::string_view::npos ? std::string_view{} : field.substr(b, e - b + 1));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  throw Error(Errc::ParseError, "line " + std::to_string(line) + ": " + what);
}

std::string join(const std::vector<std::string>& parts) {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) s += ',';
    s += parts[i];
  }
  return s;
}

}  // namespace

double parse_decimal(std::string_view token, std::size_t line) {
  if (token.empty()) parse_fail(line, "empty numeric field");
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (*first == '+') ++first;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, value, std::chars_format::general);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
    parse_fail(line, "not a decimal number: '" + std::string(token) + "'");
  }
  return value;
}

CsvTable parse_csv_table(std::string_view text, const std::vector<std::string>& expected_header) {
  CsvTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (!have_header) {
      if (!line.empty() && line.front() == '#') continue;
      table.header = split_fields(line);
      if (table.header != expected_header) {
        parse_fail(line_no, "expected header '" + join(expected_header) + "', got '" +
                                std::string(line) + "'");
      }
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != expected_header.size()) {
      parse_fail(line_no, "expected " + std::to_string(expected_header.size()) + " fields, got " +
                              std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) parse_fail(1, "missing header row");
  return table;
}

TextSpectrum parse_spectrum_csv(std::string_view text, SpectrumKind kind) {
  auto table = parse_csv_table(text, {"wavelength_nm", "value"});
  std::vector<double> wl, v;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    wl.push_back(parse_decimal(table.rows[i][0], table.line_numbers[i]));
    v.push_back(parse_decimal(table.rows[i][1], table.line_numbers[i]));
  }
  try {
    return {std::string(text), Spectrum(std::move(wl), std::move(v), kind)};
  } catch (const Error& e) {
    throw Error(Errc::ParseError, e.what());
  }
}

RawBundle parse_bundle_csv(std::string_view text) {
  auto table = parse_csv_table(text, {"wavelength_nm", "sample", "white", "dark"});
  std::array<std::string, 3> texts;
  std::array<std::vector<double>, 3> values;
  std::vector<double> wl;
  for (auto& t : texts) t = "wavelength_nm,value\n";
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    wl.push_back(parse_decimal(row[0], table.line_numbers[i]));
    for (std::size_t k = 0; k < 3; ++k) {
      values[k].push_back(parse_decimal(row[k + 1], table.line_numbers[i]));
      texts[k] += row[0] + "," + row[k + 1] + "\n";
    }
  }
  try {
    return {{texts[0], Spectrum(wl, values[0], SpectrumKind::RawCounts)},
            {texts[1], Spectrum(wl, values[1], SpectrumKind::RawCounts)},
            {texts[2], Spectrum(wl, values[2], SpectrumKind::RawCounts)}};
  } catch (const Error& e) {
    throw Error(Errc::ParseError, e.what());
  }
}

std::string format_decimal(double value) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw Error(Errc::Internal, "decimal formatting failed");
  return std::string(buf.data(), ptr);
}

std::string format_spectrum_csv(const Spectrum& spectrum) {
  std::string out = "wavelength_nm,value\n";
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    out += format_decimal(spectrum.wavelengths()[i]);
    out += ',';
    out += format_decimal(spectrum.values()[i]);
    out += '\n';
  }
  return out;
}

}  // namespace livorlab::spectral
