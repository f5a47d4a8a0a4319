#include "geolm/common/error.hpp"

namespace geolm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kFormat: return "Format";
    case ErrorCode::kMalformedBlock: return "MalformedBlock";
    case ErrorCode::kEmptyField: return "EmptyField";
    case ErrorCode::kEntityNotInParagraph: return "EntityNotInParagraph";
    case ErrorCode::kConceptsNotDistinct: return "ConceptsNotDistinct";
    case ErrorCode::kNoNegationSite: return "NoNegationSite";
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kUnknownSignal: return "UnknownSignal";
    case ErrorCode::kSequenceTooLong: return "SequenceTooLong";
    case ErrorCode::kAllMasked: return "AllMasked";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kUnknownTarget: return "UnknownTarget";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kScorerUnavailable: return "ScorerUnavailable";
    case ErrorCode::kMultiTokenLabel: return "MultiTokenLabel";
    case ErrorCode::kTooShort: return "TooShort";
    case ErrorCode::kDuplicateStep: return "DuplicateStep";
    case ErrorCode::kStageFailed: return "StageFailed";
  }
  return "Unknown";
}

std::optional<ErrorCode> error_code_from_string(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::kStageFailed); ++i) {
    const auto code = static_cast<ErrorCode>(i);
    if (to_string(code) == name) return code;
  }
  return std::nullopt;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace geolm
