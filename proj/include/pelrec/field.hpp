#pragma once

#include "pelrec/image.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace pelrec {

enum class PixelStatus : std::uint8_t {
  kConverged,
  kMaxIterations,
  kSkippedBoundary,
  kFallbackUsed,
};

std::string_view to_string(PixelStatus status);

/// Dense displacement vector field with per-pixel solver status.
class DisplacementField {
 public:
  DisplacementField() = default;
  DisplacementField(int width, int height, DisplacementVector fill = {},
                    PixelStatus status = PixelStatus::kConverged);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return vectors_.size(); }

  const DisplacementVector& operator()(int x, int y) const { return vectors_[index(x, y)]; }
  DisplacementVector& operator()(int x, int y) { return vectors_[index(x, y)]; }

  PixelStatus status(int x, int y) const { return status_[index(x, y)]; }
  void set_status(int x, int y, PixelStatus s) { status_[index(x, y)] = s; }

  /// Solver iterations spent on the pixel (0 for synthetic or loaded fields).
  int iterations(int x, int y) const { return iterations_[index(x, y)]; }
  void set_iterations(int x, int y, int n) { iterations_[index(x, y)] = n; }

  bool skipped(int x, int y) const { return status(x, y) == PixelStatus::kSkippedBoundary; }

  std::size_t count(PixelStatus s) const;

  bool same_shape(const Frame& frame) const {
    return width_ == frame.width() && height_ == frame.height();
  }
  bool same_shape(const DisplacementField& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<DisplacementVector> vectors_;
  std::vector<PixelStatus> status_;
  std::vector<int> iterations_;
};

}  // namespace pelrec
