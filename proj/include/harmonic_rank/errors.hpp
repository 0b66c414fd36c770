#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hrank {

enum class ErrorCode {
  InvalidSpec,
  InvalidArgument,
  OracleUnavailable,
  IntegrationDiverged,
  StepSizeUnderflow,
  GridMismatch,
  SingularFundamental,
  SingularTensor,
  NoConvergence,
  FlatModel,
  AmbiguousKernel,
  EmptyKernel,
  EmptySubspace,
  DisagreementWithRankKernel,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Every failure in the toolkit surfaces as an Error carrying a code the CLI
/// maps to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// True for codes that indicate a numerical (not configuration) failure.
bool is_numerical(ErrorCode code);

}  // namespace hrank
