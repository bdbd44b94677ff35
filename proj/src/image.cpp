#include "pelrec/image.hpp"

#include "pelrec/errors.hpp"

#include <sstream>

namespace pelrec {

namespace {

struct Cell {
  int x0;
  int y0;
  double tx;
  double ty;
};

Cell locate_cell(const Frame& frame, PixelLocation r) {
  if (!frame.can_interpolate(r)) {
    std::ostringstream msg;
    msg << "interpolation cell at (" << r.x << ", " << r.y << ") outside " << frame.width()
        << "x" << frame.height() << " frame";
    throw BoundaryError(msg.str());
  }
  const double fx = std::floor(r.x);
  const double fy = std::floor(r.y);
  return {static_cast<int>(fx), static_cast<int>(fy), r.x - fx, r.y - fy};
}

bool is_integral(double v) { return v == std::floor(v); }

}  // namespace

Frame::Frame(int width, int height, double fill)
    : Frame(width, height,
            std::vector<double>(width > 0 && height > 0
                                    ? static_cast<std::size_t>(width) * static_cast<std::size_t>(height)
                                    : 0,
                                fill)) {}

Frame::Frame(int width, int height, std::vector<double> intensities)
    : width_(width), height_(height), data_(std::move(intensities)) {
  if (width <= 0 || height <= 0) {
    throw ConfigError("frame dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw ConfigError("frame intensity count does not match width x height");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) {
      throw ConfigError("frame intensities must be finite");
    }
  }
}

bool Frame::can_interpolate(PixelLocation r) const {
  if (!std::isfinite(r.x) || !std::isfinite(r.y)) {
    return false;
  }
  const double fx = std::floor(r.x);
  const double fy = std::floor(r.y);
  return fx >= 0.0 && fy >= 0.0 && fx + 1.0 <= width_ - 1 && fy + 1.0 <= height_ - 1;
}

double bilinear_sample(const Frame& frame, PixelLocation r) {
  const Cell c = locate_cell(frame, r);
  // f_ij: i steps along rows (y), j along columns (x).
  const double f00 = frame(c.x0, c.y0);
  const double f01 = frame(c.x0 + 1, c.y0);
  const double f10 = frame(c.x0, c.y0 + 1);
  const double f11 = frame(c.x0 + 1, c.y0 + 1);
  // [1-ty, ty] [[f00 f01] [f10 f11]] [1-tx, tx]^T
  return (1.0 - c.ty) * ((1.0 - c.tx) * f00 + c.tx * f01) +
         c.ty * ((1.0 - c.tx) * f10 + c.tx * f11);
}

Gradient spatial_gradient(const Frame& frame, PixelLocation r, GradientConvention convention) {
  const Cell c = locate_cell(frame, r);
  double f00 = frame(c.x0, c.y0);
  double f01 = 0.0;
  double f10 = 0.0;
  double f11 = frame(c.x0 + 1, c.y0 + 1);
  double theta_x = c.tx;
  double theta_y = c.ty;
  if (convention == GradientConvention::kTextbook) {
    f01 = frame(c.x0 + 1, c.y0);
    f10 = frame(c.x0, c.y0 + 1);
  } else {
    f01 = frame(c.x0, c.y0 + 1);
    f10 = frame(c.x0 + 1, c.y0);
  }
  return {(1.0 - theta_y) * (f01 - f00) + theta_y * (f11 - f10),
          (1.0 - theta_x) * (f10 - f00) + theta_x * (f11 - f01)};
}

double dfd(const Frame& current, const Frame& previous, PixelLocation r, DisplacementVector d) {
  double now = 0.0;
  if (is_integral(r.x) && is_integral(r.y)) {
    const int x = static_cast<int>(r.x);
    const int y = static_cast<int>(r.y);
    if (!current.contains(x, y)) {
      throw BoundaryError("working pixel outside current frame");
    }
    now = current(x, y);
  } else {
    now = bilinear_sample(current, r);
  }
  return now - bilinear_sample(previous, r - d);
}

void MaskSpec::validate() const {
  if (half_width < 1) {
    throw ConfigError("mask half width must be at least 1");
  }
}

std::vector<MaskOffset> MaskSpec::offsets() const {
  validate();
  std::vector<MaskOffset> out;
  const int h = half_width;
  for (int dy = -h; dy <= (kind == MaskKind::kCausalHalf ? 0 : h); ++dy) {
    for (int dx = -h; dx <= h; ++dx) {
      if (kind == MaskKind::kCausalHalf && dy == 0 && dx > 0) {
        break;
      }
      out.push_back({dx, dy});
    }
  }
  return out;
}

ObservationSystem build_system(const Frame& current, const Frame& previous, PixelLocation r,
                               DisplacementVector d, const MaskSpec& mask,
                               GradientConvention convention) {
  if (!current.same_shape(previous)) {
    throw ConfigError("current and previous frames differ in size");
  }
  if (!std::isfinite(d.dx) || !std::isfinite(d.dy)) {
    throw ConfigError("displacement estimate must be finite");
  }
  const auto offsets = mask.offsets();
  const int cx = static_cast<int>(std::lround(r.x));
  const int cy = static_cast<int>(std::lround(r.y));

  ObservationSystem system;
  system.g.resize(static_cast<Eigen::Index>(offsets.size()), 2);
  system.z.resize(static_cast<Eigen::Index>(offsets.size()));
  system.locations.reserve(offsets.size());
  Eigen::Index n = 0;
  for (const MaskOffset& off : offsets) {
    const int x = cx + off.dx;
    const int y = cy + off.dy;
    if (!current.contains(x, y)) {
      continue;
    }
    const PixelLocation rj{static_cast<double>(x), static_cast<double>(y)};
    const PixelLocation source = rj - d;
    if (!previous.can_interpolate(source)) {
      continue;
    }
    const Gradient grad = spatial_gradient(previous, source, convention);
    system.g(n, 0) = -grad.gx;
    system.g(n, 1) = -grad.gy;
    system.z(n) = current(x, y) - bilinear_sample(previous, source);
    system.locations.push_back(rj);
    ++n;
  }
  if (n < kMinObservations) {
    throw InsufficientObservationsError("only " + std::to_string(n) +
                                        " usable observations in mask");
  }
  system.g.conservativeResize(n, 2);
  system.z.conservativeResize(n);
  return system;
}

}  // namespace pelrec
