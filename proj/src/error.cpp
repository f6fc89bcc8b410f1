#include "modan/error.hpp"

namespace modan {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownName: return "UnknownName";
    case ErrorCode::kEmptyLabel: return "EmptyLabel";
    case ErrorCode::kDegenerateBatch: return "DegenerateBatch";
    case ErrorCode::kBadTarget: return "BadTarget";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kStaleCache: return "StaleCache";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kMissingLabels: return "MissingLabels";
    case ErrorCode::kLabelCardinality: return "LabelCardinality";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kSingleClass: return "SingleClass";
    case ErrorCode::kBadConfig: return "BadConfig";
    case ErrorCode::kDegenerateData: return "DegenerateData";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownName:
    case ErrorCode::kEmptyLabel:
    case ErrorCode::kBadTarget:
    case ErrorCode::kEmptyCorpus:
    case ErrorCode::kMissingLabels:
    case ErrorCode::kLabelCardinality:
    case ErrorCode::kTooFewSamples:
    case ErrorCode::kBadConfig:
    case ErrorCode::kParseError:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kDuplicateId:
      return true;
    default:
      return false;
  }
}

}  // namespace modan
