#include "pelrec/metrics.hpp"

#include "pelrec/errors.hpp"

#include <algorithm>
#include <cmath>

namespace pelrec {

CompensationSums compensation_sums(const Frame& current, const Frame& previous,
                                   const DisplacementField& field) {
  if (!current.same_shape(previous) || !field.same_shape(current)) {
    throw ConfigError("frames and field must share dimensions");
  }
  CompensationSums sums;
  sums.total_pixels = current.size();
  for (int y = 0; y < current.height(); ++y) {
    for (int x = 0; x < current.width(); ++x) {
      if (field.skipped(x, y)) continue;
      const PixelLocation r{static_cast<double>(x), static_cast<double>(y)};
      const PixelLocation source = r - field(x, y);
      if (!previous.can_interpolate(source)) continue;
      const double plain = current(x, y) - previous(x, y);
      const double compensated = current(x, y) - bilinear_sample(previous, source);
      sums.uncompensated += plain * plain;
      sums.compensated += compensated * compensated;
      ++sums.used_pixels;
    }
  }
  return sums;
}

double imc_db(double uncompensated, double compensated, double cap_db) {
  const bool num_zero = uncompensated < kSsdFloor;
  const bool den_zero = compensated < kSsdFloor;
  if (num_zero && den_zero) return 0.0;
  if (den_zero) return cap_db;
  if (num_zero) return -cap_db;
  return std::clamp(10.0 * std::log10(uncompensated / compensated), -cap_db, cap_db);
}

double imc_frame(const Frame& current, const Frame& previous, const DisplacementField& field,
                 double cap_db) {
  const CompensationSums s = compensation_sums(current, previous, field);
  return imc_db(s.uncompensated, s.compensated, cap_db);
}

double imc_sequence(std::span<const Frame> frames, std::span<const DisplacementField> fields,
                    double cap_db) {
  if (frames.size() < 2 || fields.size() + 1 != frames.size()) {
    throw ConfigError("a sequence of K frames needs exactly K-1 fields");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 1; k < frames.size(); ++k) {
    const CompensationSums s = compensation_sums(frames[k], frames[k - 1], fields[k - 1]);
    num += s.uncompensated;
    den += s.compensated;
  }
  return imc_db(num, den, cap_db);
}

EndpointError endpoint_error(const DisplacementField& field, const DisplacementField& truth) {
  if (!field.same_shape(truth)) {
    throw ConfigError("field and truth differ in size");
  }
  EndpointError e;
  double sum = 0.0;
  for (int y = 0; y < field.height(); ++y) {
    for (int x = 0; x < field.width(); ++x) {
      if (field.skipped(x, y) || truth.skipped(x, y)) continue;
      const double err =
          std::hypot(field(x, y).dx - truth(x, y).dx, field(x, y).dy - truth(x, y).dy);
      sum += err;
      e.max = std::max(e.max, err);
      ++e.pixels;
    }
  }
  if (e.pixels == 0) {
    throw EmptyDomainError("no pixel is valid in both fields");
  }
  e.mean = sum / static_cast<double>(e.pixels);
  return e;
}

MetricsReport evaluate_sequence(std::span<const Frame> frames,
                                std::span<const DisplacementField> fields,
                                std::span<const DisplacementField> truth, double cap_db) {
  if (frames.size() < 2 || fields.size() + 1 != frames.size()) {
    throw ConfigError("a sequence of K frames needs exactly K-1 fields");
  }
  if (!truth.empty() && truth.size() != fields.size()) {
    throw ConfigError("truth must supply one field per frame pair");
  }
  MetricsReport report;
  double num = 0.0;
  double den = 0.0;
  std::size_t used = 0;
  std::size_t total = 0;
  for (std::size_t k = 1; k < frames.size(); ++k) {
    const CompensationSums s = compensation_sums(frames[k], frames[k - 1], fields[k - 1]);
    report.per_frame_imc_db.push_back(imc_db(s.uncompensated, s.compensated, cap_db));
    num += s.uncompensated;
    den += s.compensated;
    used += s.used_pixels;
    total += s.total_pixels;
  }
  report.sequence_imc_db = imc_db(num, den, cap_db);
  report.valid_pixel_fraction = total ? static_cast<double>(used) / static_cast<double>(total) : 0.0;
  if (!truth.empty()) {
    double weighted = 0.0;
    std::size_t pixels = 0;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const EndpointError e = endpoint_error(fields[j], truth[j]);
      weighted += e.mean * static_cast<double>(e.pixels);
      pixels += e.pixels;
    }
    report.mean_endpoint_error = weighted / static_cast<double>(pixels);
  }
  return report;
}

}  // namespace pelrec
