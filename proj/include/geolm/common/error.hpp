#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace geolm {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kFormat,
  kMalformedBlock,
  kEmptyField,
  kEntityNotInParagraph,
  kConceptsNotDistinct,
  kNoNegationSite,
  kUnknownLabel,
  kUnknownSignal,
  kSequenceTooLong,
  kAllMasked,
  kEmptyDataset,
  kUnknownTarget,
  kShapeMismatch,
  kScorerUnavailable,
  kMultiTokenLabel,
  kTooShort,
  kDuplicateStep,
  kStageFailed,
};

// Stable reason code, used in reject streams and wire-protocol errors.
std::string_view to_string(ErrorCode code);
// Inverse of to_string; nullopt for unknown names.
std::optional<ErrorCode> error_code_from_string(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace geolm
