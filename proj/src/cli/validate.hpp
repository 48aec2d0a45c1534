#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace livorlab::cli {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct ValidateOptions {
  bool quick = false;
  std::optional<std::filesystem::path> extinction_table;
  std::uint64_t seed = 7;
  unsigned workers = 0;
};

/// Physics self-checks: conservation, Beer-Lambert, Mie against the reference
/// series and the Rayleigh limit, and a fit round trip on a small LUT.
std::vector<CheckResult> run_validation(const ValidateOptions& options);

}  // namespace livorlab::cli
