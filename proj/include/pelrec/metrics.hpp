#pragma once

#include "pelrec/field.hpp"
#include "pelrec/image.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace pelrec {

/// Value returned for perfect registration (compensated SSD below kSsdFloor).
inline constexpr double kImcCapDb = 99.0;
inline constexpr double kSsdFloor = 1e-12;

/// Squared frame differences with and without motion compensation, summed
/// over the pixels where the field is usable: status not skipped and
/// r - d(r) interpolable in the previous frame. Other pixels are left out of
/// both sums.
struct CompensationSums {
  double uncompensated = 0.0;
  double compensated = 0.0;
  std::size_t used_pixels = 0;
  std::size_t total_pixels = 0;
};

CompensationSums compensation_sums(const Frame& current, const Frame& previous,
                                   const DisplacementField& field);

/// 10 log10(uncompensated / compensated) with the cap rules:
/// both below floor -> 0 dB, compensated below floor -> +cap,
/// uncompensated below floor -> -cap.
double imc_db(double uncompensated, double compensated, double cap_db = kImcCapDb);

double imc_frame(const Frame& current, const Frame& previous, const DisplacementField& field,
                 double cap_db = kImcCapDb);

/// Pools the sums over every pair before taking the ratio; this is not the
/// mean of the per-frame values.
double imc_sequence(std::span<const Frame> frames, std::span<const DisplacementField> fields,
                    double cap_db = kImcCapDb);

struct EndpointError {
  double mean = 0.0;
  double max = 0.0;
  std::size_t pixels = 0;
};

/// Euclidean error over pixels not skipped in either field.
EndpointError endpoint_error(const DisplacementField& field, const DisplacementField& truth);

struct MetricsReport {
  std::vector<double> per_frame_imc_db;
  double sequence_imc_db = 0.0;
  /// Pooled over all pairs; empty when no truth was supplied.
  std::optional<double> mean_endpoint_error;
  double valid_pixel_fraction = 0.0;
};

MetricsReport evaluate_sequence(std::span<const Frame> frames,
                                std::span<const DisplacementField> fields,
                                std::span<const DisplacementField> truth = {},
                                double cap_db = kImcCapDb);

}  // namespace pelrec
