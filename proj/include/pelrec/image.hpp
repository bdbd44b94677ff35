#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

namespace pelrec {

/// Subpixel position r = (x, y); x runs along columns, y along rows.
struct PixelLocation {
  double x = 0.0;
  double y = 0.0;
};

/// Per-pixel motion d = (dx, dy) in pixels.
struct DisplacementVector {
  double dx = 0.0;
  double dy = 0.0;

  double norm() const { return std::hypot(dx, dy); }

  friend bool operator==(const DisplacementVector&, const DisplacementVector&) = default;
};

inline PixelLocation operator-(PixelLocation r, DisplacementVector d) {
  return {r.x - d.dx, r.y - d.dy};
}

/// Grayscale frame stored row-major as doubles.
class Frame {
 public:
  Frame() = default;
  Frame(int width, int height, double fill = 0.0);
  Frame(int width, int height, std::vector<double> intensities);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double operator()(int x, int y) const { return data_[index(x, y)]; }
  double& operator()(int x, int y) { return data_[index(x, y)]; }

  std::span<const double> intensities() const { return data_; }
  std::span<double> intensities() { return data_; }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  /// True when the 2x2 cell anchored at floor(r) lies inside the frame.
  bool can_interpolate(PixelLocation r) const;

  bool same_shape(const Frame& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Which pixel the cell entry f_ij refers to when evaluating the gradient.
///
/// kTextbook reads f_ij as the sample at column floor(x)+j and row floor(y)+i.
/// This is the reading under which the matrix form of the bilinear
/// interpolant and its two difference formulas agree with each other, so
/// g_x is the true x partial and g_y the true y partial.
///
/// kLiteralIndex reads f_ij as column floor(x)+i, row floor(y)+j and plugs
/// that into the same two difference formulas. The result is a transposed,
/// mis-weighted gradient (g_x differences along y). It is kept only for
/// experimentation; bilinear_sample is unaffected by the toggle.
enum class GradientConvention { kTextbook, kLiteralIndex };

struct Gradient {
  double gx = 0.0;
  double gy = 0.0;
};

/// Bilinear interpolation at r. Throws BoundaryError when the 2x2 cell is
/// not fully inside the frame; never extrapolates.
double bilinear_sample(const Frame& frame, PixelLocation r);

/// First-order difference of the bilinear interpolant at r.
Gradient spatial_gradient(const Frame& frame, PixelLocation r,
                          GradientConvention convention = GradientConvention::kTextbook);

/// Displaced frame difference I_k(r) - I_{k-1}(r - d). The current frame is
/// read directly when r is on the grid and interpolated otherwise; the
/// previous frame is always interpolated.
double dfd(const Frame& current, const Frame& previous, PixelLocation r, DisplacementVector d);

enum class MaskKind { kSquareWindow, kCausalHalf };

struct MaskOffset {
  int dx = 0;
  int dy = 0;
};

/// Neighbourhood around the working pixel.
///
/// kSquareWindow: all (2h+1)^2 offsets.
/// kCausalHalf: rows strictly above (within h), same-row offsets strictly to
/// the left, and the pixel itself, i.e. the pixels already visited by a
/// raster scan.
struct MaskSpec {
  MaskKind kind = MaskKind::kSquareWindow;
  int half_width = 2;

  /// Offsets in raster order (dy outer, dx inner).
  std::vector<MaskOffset> offsets() const;
  void validate() const;
};

/// Stacked linearised DFD equations z = G u + n for one working pixel.
///
/// Row i of g holds the negated spatial gradient of the previous frame at
/// r_i - d, z(i) the DFD at r_i, so that a positive solution u moves d
/// towards the true displacement.
struct ObservationSystem {
  Eigen::MatrixXd g;
  Eigen::VectorXd z;
  std::vector<PixelLocation> locations;

  Eigen::Index rows() const { return g.rows(); }
  Eigen::Index unknowns() const { return g.cols(); }
};

inline constexpr Eigen::Index kMinObservations = 3;

/// Assembles the observation system for working pixel r at estimate d.
/// Offsets whose current pixel or previous-frame cell is out of bounds are
/// dropped. Throws InsufficientObservationsError below three rows.
ObservationSystem build_system(const Frame& current, const Frame& previous, PixelLocation r,
                               DisplacementVector d, const MaskSpec& mask,
                               GradientConvention convention = GradientConvention::kTextbook);

}  // namespace pelrec
