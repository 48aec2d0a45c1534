#include "livorlab/extinction.hpp"

#include <sodium.h>

#include <algorithm>
#include <array>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "livorlab/spectral_csv.hpp"

#ifndef LIVORLAB_DATA_DIR
#define LIVORLAB_DATA_DIR "data"
#endif

namespace livorlab::extinction {

namespace fs = std::filesystem;
using spectral::Chromophore;
using spectral::Spectrum;
using spectral::SpectrumKind;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

fs::path data_dir() {
  if (const char* env = std::getenv("LIVORLAB_DATA"); env && *env) return fs::path(env);
  return fs::path(LIVORLAB_DATA_DIR);
}

fs::path default_table() { return data_dir() / "extinction" / "hemoglobin.csv"; }

fs::path manifest_for(const fs::path& table) {
  return table.parent_path() / (table.stem().string() + ".manifest");
}

std::string sha256_hex(std::string_view bytes) {
  if (sodium_init() < 0) throw Error(Errc::Internal, "libsodium initialisation failed");
  std::array<unsigned char, crypto_hash_sha256_BYTES> digest{};
  crypto_hash_sha256(digest.data(), reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
  std::array<char, crypto_hash_sha256_BYTES * 2 + 1> hex{};
  sodium_bin2hex(hex.data(), hex.size(), digest.data(), digest.size());
  return std::string(hex.data());
}

void write_manifest(const fs::path& table) {
  std::ofstream out(manifest_for(table), std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write manifest for " + table.string());
  out << "sha256 " << sha256_hex(read_file(table)) << ' ' << table.filename().string() << '\n';
}

std::vector<ExtinctionRecord> parse_extinction_csv(std::string_view text) {
  // Peek at the header so that a missing column is reported as a coverage
  // problem rather than a generic header mismatch.
  std::vector<std::string> header;
  {
    std::istringstream lines{std::string(text)};
    std::string line;
    while (std::getline(lines, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      std::istringstream fields(line);
      std::string f;
      while (std::getline(fields, f, ',')) header.push_back(f);
      break;
    }
  }
  if (header.empty() || header.front() != "wavelength_nm") {
    throw Error(Errc::ParseError, "extinction table must start with a wavelength_nm column");
  }
  for (Chromophore c : {Chromophore::Hb, Chromophore::O2Hb, Chromophore::COHb}) {
    if (std::find(header.begin(), header.end(), spectral::to_string(c)) == header.end()) {
      throw Error(Errc::CoverageGap, std::string("extinction table lacks column for ") +
                                         (c == Chromophore::COHb ? "COHb" : c == Chromophore::Hb ? "Hb" : "O2Hb"));
    }
  }

  auto table = spectral::parse_csv_table(text, header);
  std::vector<double> wl;
  std::vector<std::vector<double>> cols(header.size() - 1);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    wl.push_back(spectral::parse_decimal(table.rows[r][0], table.line_numbers[r]));
    for (std::size_t k = 1; k < header.size(); ++k) {
      double eps = spectral::parse_decimal(table.rows[r][k], table.line_numbers[r]);
      if (eps < 0.0) {
        throw Error(Errc::ParseError, "line " + std::to_string(table.line_numbers[r]) +
                                          ": negative extinction");
      }
      cols[k - 1].push_back(eps);
    }
  }
  if (wl.size() < 2 || wl.front() > kCoverageStartNm || wl.back() < kCoverageStopNm) {
    throw Error(Errc::CoverageGap, "extinction grid does not cover 380-780 nm");
  }

  std::vector<ExtinctionRecord> records;
  for (std::size_t k = 1; k < header.size(); ++k) {
    Chromophore c = spectral::chromophore_from_string(header[k]);
    try {
      records.push_back({c, Spectrum(wl, cols[k - 1], SpectrumKind::MolarExtinction)});
    } catch (const Error& e) {
      throw Error(Errc::ParseError, e.what());
    }
  }
  return records;
}

std::vector<ExtinctionRecord> load_extinction_db(const std::optional<fs::path>& path) {
  fs::path table = path.value_or(default_table());
  std::string text = read_file(table);

  fs::path manifest = manifest_for(table);
  std::ifstream in(manifest);
  if (!in) throw Error(Errc::ChecksumMismatch, "no manifest " + manifest.string());
  std::string algo, expected, name;
  in >> algo >> expected >> name;
  if (algo != "sha256" || name != table.filename().string()) {
    throw Error(Errc::ChecksumMismatch, "malformed manifest " + manifest.string());
  }
  if (std::string actual = sha256_hex(text); actual != expected) {
    throw Error(Errc::ChecksumMismatch, table.filename().string() + " hash " + actual +
                                            " does not match manifest " + expected);
  }
  return parse_extinction_csv(text);
}

}  // namespace livorlab::extinction
