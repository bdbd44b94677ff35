#pragma once

#include "pelrec/field.hpp"
#include "pelrec/image.hpp"

#include <cstdint>
#include <limits>
#include <vector>

namespace pelrec {

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool contains(int px, int py) const {
    return px >= x && py >= y && px < x + width && py < y + height;
  }
  bool intersects(const Rect& o) const {
    return x < o.x + o.width && o.x < x + width && y < o.y + o.height && o.y < y + height;
  }
};

/// A rectangle (in frame coordinates) whose pixels move with a constant velocity.
struct MotionRegion {
  Rect region;
  DisplacementVector velocity;
};

enum class WarpMode {
  /// Frame k is frame k-1 resampled by the per-pair truth. The registration
  /// identity holds exactly for every pair.
  kSequential,
  /// Frame k resamples frame 0 at the accumulated displacement. Sharper,
  /// but the per-pair identity is only approximate for subpixel motion.
  kCumulative,
};

struct SceneSpec {
  int width = 128;
  int height = 128;
  std::uint64_t texture_seed = 1;
  /// Standard deviation (pixels) of the Gaussian low-pass applied to white noise.
  double smoothness = 1.5;
  /// Pixels outside every region are static.
  std::vector<MotionRegion> motion;
  int frame_count = 2;
  WarpMode warp_mode = WarpMode::kSequential;

  void validate() const;
};

struct NoiseSpec {
  /// +infinity disables noise.
  double snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t noise_seed = 1;

  bool enabled() const { return snr_db != std::numeric_limits<double>::infinity(); }
};

struct SyntheticSequence {
  std::vector<Frame> frames;
  /// truth[j] maps frames[j+1] back to frames[j].
  std::vector<DisplacementField> truth;
};

/// Low-passed white-noise texture in [0, 255]. Deterministic in texture_seed.
Frame generate_texture(const SceneSpec& spec);

/// output(r) = bilinear_sample(frame, r - field(r)). Throws BoundaryError
/// if any backward sample leaves the frame.
Frame warp_frame(const Frame& frame, const DisplacementField& field);

/// sigma_n^2 = sigma^2 / 10^(snr_db / 10).
double noise_variance_for(double signal_variance, double snr_db);

/// Population variance of the frame intensities.
double frame_variance(const Frame& frame);

/// Adds zero-mean Gaussian noise calibrated to the frame's own variance.
/// Throws CalibrationError on a constant frame.
Frame add_noise(const Frame& frame, const NoiseSpec& noise);

/// Frames plus exact per-pair truth fields. Each frame is noised
/// independently (seed noise_seed + frame index).
SyntheticSequence make_sequence(const SceneSpec& scene, const NoiseSpec& noise);

}  // namespace pelrec
