#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace livorlab {

enum class Errc {
  // spectral
  GridMismatch,
  DegenerateReference,
  MissingChromophore,
  GridOutOfRange,
  ZeroTotalHemoglobin,
  ReflectanceOutOfRange,
  // extinction data
  ChecksumMismatch,
  CoverageGap,
  // mie / mcrt
  NonConvergent,
  InvalidStack,
  GridTooLarge,
  OutOfGrid,
  // inverse
  InfeasibleStart,
  NonFiniteResidual,
  // notebook
  Unauthorized,
  ValidationFailed,
  CaseNotFound,
  CaseClosed,
  MeasurementNotFound,
  AnalysisNotFound,
  IllegalTransition,
  ImmutableRecord,
  JobNotFound,
  ConfigInvalid,
  LutNotFound,
  StoreLocked,
  StoreError,
  // generic
  InvalidArgument,
  ParseError,
  IoError,
  Internal,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above so that
/// the CLI and the HTTP layer can map it to an exit code or status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace livorlab
