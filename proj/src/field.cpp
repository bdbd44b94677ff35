#include "pelrec/field.hpp"

#include "pelrec/errors.hpp"

#include <algorithm>

namespace pelrec {

std::string_view to_string(PixelStatus status) {
  switch (status) {
    case PixelStatus::kConverged:
      return "converged";
    case PixelStatus::kMaxIterations:
      return "max-iter";
    case PixelStatus::kSkippedBoundary:
      return "skipped-boundary";
    case PixelStatus::kFallbackUsed:
      return "fallback-used";
  }
  return "unknown";
}

DisplacementField::DisplacementField(int width, int height, DisplacementVector fill,
                                     PixelStatus status)
    : width_(width), height_(height) {
  if (width <= 0 || height <= 0) {
    throw ConfigError("field dimensions must be positive");
  }
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  vectors_.assign(n, fill);
  status_.assign(n, status);
  iterations_.assign(n, 0);
}

std::size_t DisplacementField::count(PixelStatus s) const {
  return static_cast<std::size_t>(std::count(status_.begin(), status_.end(), s));
}

}  // namespace pelrec
