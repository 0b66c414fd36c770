#include "harmonic_rank/errors.hpp"

namespace hrank {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::OracleUnavailable: return "OracleUnavailable";
    case ErrorCode::IntegrationDiverged: return "IntegrationDiverged";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::SingularFundamental: return "SingularFundamental";
    case ErrorCode::SingularTensor: return "SingularTensor";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::FlatModel: return "FlatModel";
    case ErrorCode::AmbiguousKernel: return "AmbiguousKernel";
    case ErrorCode::EmptyKernel: return "EmptyKernel";
    case ErrorCode::EmptySubspace: return "EmptySubspace";
    case ErrorCode::DisagreementWithRankKernel: return "DisagreementWithRankKernel";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSpec:
    case ErrorCode::InvalidArgument:
    case ErrorCode::ConfigError:
      return false;
    default:
      return true;
  }
}

}  // namespace hrank
