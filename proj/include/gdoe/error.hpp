#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gdoe {

enum class ErrorCode {
  kValidation,
  kSize,
  kNameResolution,
  kSyntax,
  kShape,
  kNumeric,
  kTraining,
  kDomain,
  kContract,
  kEvaluation,
  kInsufficientData,
  kTriangulation,
  kState,
  kNotFound,
  kConflict,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Raises glibc's mmap and trim thresholds so repeated large temporaries stay
/// on the heap. No-op elsewhere. Call once at program start.
void tune_allocator();

/// All library failures are reported as gdoe::Error; the code lets callers
/// (CLI exit codes, HTTP status mapping) branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Syntax errors carry the byte offset of the first offending character.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t offset, const std::string& message)
      : Error(ErrorCode::kSyntax, message), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Training divergence, tagged with the epoch at which it happened.
class TrainingError : public Error {
 public:
  TrainingError(std::size_t epoch, const std::string& message)
      : Error(ErrorCode::kTraining, message), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace gdoe
