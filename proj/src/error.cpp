#include "gdoe/error.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace gdoe {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kSize: return "size";
    case ErrorCode::kNameResolution: return "name_resolution";
    case ErrorCode::kSyntax: return "syntax";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kTraining: return "training";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kContract: return "contract";
    case ErrorCode::kEvaluation: return "evaluation";
    case ErrorCode::kInsufficientData: return "insufficient_data";
    case ErrorCode::kTriangulation: return "triangulation";
    case ErrorCode::kState: return "state";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

void tune_allocator() {
#if defined(__GLIBC__)
  // Training allocates many short-lived matrices just above the default mmap
  // threshold; keeping them on the heap avoids per-batch mmap/munmap calls.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

}  // namespace gdoe
