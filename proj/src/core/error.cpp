#include "livorlab/error.hpp"

namespace livorlab {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::GridMismatch: return "GridMismatch";
    case Errc::DegenerateReference: return "DegenerateReference";
    case Errc::MissingChromophore: return "MissingChromophore";
    case Errc::GridOutOfRange: return "GridOutOfRange";
    case Errc::ZeroTotalHemoglobin: return "ZeroTotalHemoglobin";
    case Errc::ReflectanceOutOfRange: return "ReflectanceOutOfRange";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::CoverageGap: return "CoverageGap";
    case Errc::NonConvergent: return "NonConvergent";
    case Errc::InvalidStack: return "InvalidStack";
    case Errc::GridTooLarge: return "GridTooLarge";
    case Errc::OutOfGrid: return "OutOfGrid";
    case Errc::InfeasibleStart: return "InfeasibleStart";
    case Errc::NonFiniteResidual: return "NonFiniteResidual";
    case Errc::Unauthorized: return "Unauthorized";
    case Errc::ValidationFailed: return "ValidationFailed";
    case Errc::CaseNotFound: return "CaseNotFound";
    case Errc::CaseClosed: return "CaseClosed";
    case Errc::MeasurementNotFound: return "MeasurementNotFound";
    case Errc::AnalysisNotFound: return "AnalysisNotFound";
    case Errc::IllegalTransition: return "IllegalTransition";
    case Errc::ImmutableRecord: return "ImmutableRecord";
    case Errc::JobNotFound: return "JobNotFound";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::LutNotFound: return "LutNotFound";
    case Errc::StoreLocked: return "StoreLocked";
    case Errc::StoreError: return "StoreError";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ParseError: return "ParseError";
    case Errc::IoError: return "IoError";
    case Errc::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace livorlab
