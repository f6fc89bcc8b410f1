#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace modan {

enum class ErrorCode {
  kUnknownName,
  kEmptyLabel,
  kDegenerateBatch,
  kBadTarget,
  kShapeMismatch,
  kStaleCache,
  kEmptyCorpus,
  kMissingLabels,
  kLabelCardinality,
  kTooFewSamples,
  kSingleClass,
  kBadConfig,
  kDegenerateData,
  kParseError,
  kDimensionMismatch,
  kDuplicateId,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Input problems the caller can fix (exit code 1 on the command line), as
// opposed to failures that arise while computing (exit code 2).
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace modan
