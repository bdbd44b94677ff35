#pragma once

#include "pelrec/field.hpp"
#include "pelrec/image.hpp"
#include "pelrec/regression.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace pelrec {

enum class Estimator { kOls, kRls, kPcr1, kPcr2 };

enum class InitMode {
  kZero,
  /// Seed d0 from the left neighbour's final estimate (the pixel above for
  /// the first column), in raster order.
  kCausalPredecessor,
};

std::string_view to_string(Estimator estimator);
std::optional<Estimator> parse_estimator(std::string_view name);

struct EngineConfig {
  Estimator estimator = Estimator::kPcr2;
  MaskSpec mask{};
  RegularizerSpec lambda = RegularizerSpec::scalar(1.0);
  RegularizerSpec xi = RegularizerSpec::scalar(1.0);
  int components_k = 2;
  int max_iterations = 10;
  double convergence_eps = 0.01;
  /// Componentwise bound on |d|. Unset means mask.half_width.
  std::optional<double> displacement_clamp;
  InitMode init_mode = InitMode::kCausalPredecessor;
  /// Retry with RLS(fallback_lambda) when the chosen estimator reports a
  /// singular or degenerate system.
  bool fallback_to_rls = true;
  double fallback_lambda = 1.0;
  GradientConvention gradient = GradientConvention::kTextbook;
  SolverTolerances tolerances{};

  double clamp() const;
  void validate() const;
};

struct PixelEstimate {
  DisplacementVector d;
  PixelStatus status = PixelStatus::kConverged;
  int iterations = 0;
};

/// Runs the update loop d <- d + u at one pixel starting from d0.
PixelEstimate estimate_pixel(const Frame& current, const Frame& previous, PixelLocation r,
                             DisplacementVector d0, const EngineConfig& config);

/// Dense backward field: vector at r points from the current frame into the
/// previous one, I_k(r) ~ I_{k-1}(r - d(r)).
DisplacementField estimate_field(const Frame& current, const Frame& previous,
                                 const EngineConfig& config);

/// K frames -> K-1 fields; field j maps frame j+1 back to frame j. Pairs are
/// processed concurrently; output does not depend on scheduling.
std::vector<DisplacementField> estimate_sequence(std::span<const Frame> frames,
                                                 const EngineConfig& config);

}  // namespace pelrec
