#pragma once

#include <stdexcept>
#include <string>

namespace snprex {

/// Failures caused by the input data (exit code 2 in the CLI) versus failures
/// of the run itself (exit code 3).
enum class ErrorCategory { Data, Runtime };

class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message, ErrorCategory category)
      : std::runtime_error(message), code_(std::move(code)), category_(category) {}

  /// Short machine-parsable identifier, e.g. "MalformedRecord".
  const std::string& code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_; }

 private:
  std::string code_;
  ErrorCategory category_;
};

#define SNPREX_DEFINE_ERROR(Name, Category)                        \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& message)                      \
        : Error(#Name, message, ErrorCategory::Category) {}        \
  };

// corpus
SNPREX_DEFINE_ERROR(MissingPath, Data)
SNPREX_DEFINE_ERROR(MalformedRecord, Data)
SNPREX_DEFINE_ERROR(OffsetMismatch, Data)
SNPREX_DEFINE_ERROR(MissingSplitHint, Data)
// preprocess
SNPREX_DEFINE_ERROR(OverlappingMentions, Data)
SNPREX_DEFINE_ERROR(UnknownPair, Data)
// encoder / head
SNPREX_DEFINE_ERROR(ModelUnavailable, Runtime)
SNPREX_DEFINE_ERROR(DimensionMismatch, Runtime)
SNPREX_DEFINE_ERROR(ZeroLength, Data)
SNPREX_DEFINE_ERROR(StaleCache, Runtime)
// train
SNPREX_DEFINE_ERROR(ShapeMismatch, Runtime)
SNPREX_DEFINE_ERROR(EmptyDataset, Data)
SNPREX_DEFINE_ERROR(ConfigMismatch, Data)
SNPREX_DEFINE_ERROR(SignatureMismatch, Data)
// eval
SNPREX_DEFINE_ERROR(MissingGold, Data)
SNPREX_DEFINE_ERROR(DuplicatePrediction, Data)
// cli
SNPREX_DEFINE_ERROR(IoFailure, Runtime)
SNPREX_DEFINE_ERROR(GradientCheckFailed, Runtime)

#undef SNPREX_DEFINE_ERROR

}  // namespace snprex
