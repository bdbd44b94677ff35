#include "pelrec/synth.hpp"

#include "pelrec/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace pelrec {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

// Whole-sample symmetric reflection, folded as often as needed so kernels
// wider than the frame stay well defined.
int mirror(int i, int n) {
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

// Separable convolution with mirrored edges.
Frame blur(const Frame& in, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int w = in.width();
  const int h = in.height();
  Frame tmp(w, h);
  Frame out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[static_cast<std::size_t>(i + radius)] * in(mirror(x + i, w), y);
      }
      tmp(x, y) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[static_cast<std::size_t>(i + radius)] * tmp(x, mirror(y + i, h));
      }
      out(x, y) = std::clamp(acc, 0.0, 255.0);
    }
  }
  return out;
}

DisplacementVector velocity_at(const SceneSpec& scene, int x, int y) {
  for (const MotionRegion& m : scene.motion) {
    if (m.region.contains(x, y)) return m.velocity;
  }
  return {};
}

double max_speed(const SceneSpec& scene) {
  double v = 0.0;
  for (const MotionRegion& m : scene.motion) {
    v = std::max({v, std::abs(m.velocity.dx), std::abs(m.velocity.dy)});
  }
  return v;
}

Frame crop(const Frame& canvas, int margin, int width, int height) {
  Frame out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      out(x, y) = canvas(x + margin, y + margin);
    }
  }
  return out;
}

// Resamples the canvas by the scene velocities scaled by `steps`. Canvas pixels
// whose source cell leaves the canvas keep their value; the margin keeps them
// out of the cropped frame.
Frame warp_canvas(const Frame& canvas, const SceneSpec& scene, int margin, double steps) {
  Frame out = canvas;
  for (int y = 0; y < canvas.height(); ++y) {
    for (int x = 0; x < canvas.width(); ++x) {
      const DisplacementVector v = velocity_at(scene, x - margin, y - margin);
      if (v.dx == 0.0 && v.dy == 0.0) continue;
      const PixelLocation src{x - steps * v.dx, y - steps * v.dy};
      if (canvas.can_interpolate(src)) {
        out(x, y) = bilinear_sample(canvas, src);
      }
    }
  }
  return out;
}

}  // namespace

void SceneSpec::validate() const {
  if (width < 4 || height < 4) {
    throw ConfigError("scene must be at least 4x4 pixels");
  }
  if (frame_count < 1) {
    throw ConfigError("frame count must be positive");
  }
  if (!(smoothness > 0.0) || !std::isfinite(smoothness)) {
    throw ConfigError("smoothness must be a positive finite radius");
  }
  const Rect frame{0, 0, width, height};
  for (std::size_t i = 0; i < motion.size(); ++i) {
    const Rect& r = motion[i].region;
    if (r.width <= 0 || r.height <= 0 || r.x < 0 || r.y < 0 || r.x + r.width > frame.width ||
        r.y + r.height > frame.height) {
      throw ConfigError("motion region " + std::to_string(i) + " is empty or leaves the frame");
    }
    if (!std::isfinite(motion[i].velocity.dx) || !std::isfinite(motion[i].velocity.dy)) {
      throw ConfigError("motion region " + std::to_string(i) + " has a non-finite velocity");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (r.intersects(motion[j].region)) {
        throw ConfigError("motion regions " + std::to_string(j) + " and " + std::to_string(i) +
                          " overlap");
      }
    }
  }
}

Frame generate_texture(const SceneSpec& spec) {
  if (spec.width < 1 || spec.height < 1 || !(spec.smoothness > 0.0)) {
    throw ConfigError("texture needs positive dimensions and smoothness");
  }
  std::mt19937_64 rng(spec.texture_seed);
  std::uniform_real_distribution<double> unit(0.0, 255.0);
  Frame noise(spec.width, spec.height);
  for (double& v : noise.intensities()) v = unit(rng);
  return blur(noise, spec.smoothness);
}

Frame warp_frame(const Frame& frame, const DisplacementField& field) {
  if (!field.same_shape(frame)) {
    throw ConfigError("warp field and frame differ in size");
  }
  Frame out(frame.width(), frame.height());
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      const DisplacementVector& d = field(x, y);
      if (d.dx == 0.0 && d.dy == 0.0) {
        out(x, y) = frame(x, y);
      } else {
        out(x, y) = bilinear_sample(frame, PixelLocation{double(x), double(y)} - d);
      }
    }
  }
  return out;
}

double noise_variance_for(double signal_variance, double snr_db) {
  return signal_variance / std::pow(10.0, snr_db / 10.0);
}

double frame_variance(const Frame& frame) {
  const auto v = frame.intensities();
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size());
}

Frame add_noise(const Frame& frame, const NoiseSpec& noise) {
  if (!noise.enabled()) return frame;
  if (!std::isfinite(noise.snr_db)) {
    throw ConfigError("SNR must be finite or +inf");
  }
  const double signal = frame_variance(frame);
  if (!(signal > 0.0)) {
    throw CalibrationError("cannot calibrate noise against a zero-variance frame");
  }
  std::mt19937_64 rng(noise.noise_seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(noise_variance_for(signal, noise.snr_db)));
  Frame out = frame;
  for (double& v : out.intensities()) v += gauss(rng);
  return out;
}

SyntheticSequence make_sequence(const SceneSpec& scene, const NoiseSpec& noise) {
  scene.validate();
  const double speed = max_speed(scene);
  const int steps = scene.frame_count - 1;
  const int margin = scene.warp_mode == WarpMode::kSequential
                         ? steps * (static_cast<int>(std::ceil(speed)) + 1) + 2
                         : static_cast<int>(std::ceil(steps * speed)) + 2;

  SceneSpec canvas_spec = scene;
  canvas_spec.width = scene.width + 2 * margin;
  canvas_spec.height = scene.height + 2 * margin;
  const Frame canvas0 = generate_texture(canvas_spec);

  DisplacementField truth(scene.width, scene.height);
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      truth(x, y) = velocity_at(scene, x, y);
    }
  }

  SyntheticSequence seq;
  Frame canvas = canvas0;
  for (int k = 0; k < scene.frame_count; ++k) {
    if (k > 0) {
      canvas = scene.warp_mode == WarpMode::kSequential
                   ? warp_canvas(canvas, scene, margin, 1.0)
                   : warp_canvas(canvas0, scene, margin, static_cast<double>(k));
      seq.truth.push_back(truth);
    }
    NoiseSpec per_frame = noise;
    per_frame.noise_seed = noise.noise_seed + static_cast<std::uint64_t>(k);
    seq.frames.push_back(add_noise(crop(canvas, margin, scene.width, scene.height), per_frame));
  }
  return seq;
}

}  // namespace pelrec
