#include "pelrec/engine.hpp"

#include "pelrec/errors.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <future>
#include <thread>

namespace pelrec {

namespace {

UpdateVector solve_update(const ObservationSystem& system, const EngineConfig& config) {
  switch (config.estimator) {
    case Estimator::kOls:
      return ols(system, config.tolerances);
    case Estimator::kRls:
      return rls(system, config.lambda, config.tolerances);
    case Estimator::kPcr1:
      return pcr1(system, config.components_k, config.tolerances);
    case Estimator::kPcr2:
      return pcr2(system, config.components_k, config.xi, config.tolerances);
  }
  throw ConfigError("unknown estimator");
}

DisplacementVector clamp_vector(DisplacementVector d, double limit) {
  return {std::clamp(d.dx, -limit, limit), std::clamp(d.dy, -limit, limit)};
}

}  // namespace

std::string_view to_string(Estimator estimator) {
  switch (estimator) {
    case Estimator::kOls:
      return "ols";
    case Estimator::kRls:
      return "rls";
    case Estimator::kPcr1:
      return "pcr1";
    case Estimator::kPcr2:
      return "pcr2";
  }
  return "unknown";
}

std::optional<Estimator> parse_estimator(std::string_view name) {
  for (Estimator e : {Estimator::kOls, Estimator::kRls, Estimator::kPcr1, Estimator::kPcr2}) {
    if (to_string(e) == name) return e;
  }
  return std::nullopt;
}

double EngineConfig::clamp() const {
  return displacement_clamp.value_or(static_cast<double>(mask.half_width));
}

void EngineConfig::validate() const {
  mask.validate();
  lambda.validate();
  xi.validate();
  if (components_k < 1 || components_k > 2) {
    throw ConfigError("components must be 1 or 2");
  }
  if (max_iterations < 1) {
    throw ConfigError("max iterations must be positive");
  }
  if (!(convergence_eps > 0.0) || !std::isfinite(convergence_eps)) {
    throw ConfigError("convergence epsilon must be positive");
  }
  if (!(clamp() > 0.0) || !std::isfinite(clamp())) {
    throw ConfigError("displacement clamp must be positive");
  }
  if (fallback_to_rls && !(fallback_lambda > 0.0)) {
    throw ConfigError("fallback lambda must be positive");
  }
}

PixelEstimate estimate_pixel(const Frame& current, const Frame& previous, PixelLocation r,
                             DisplacementVector d0, const EngineConfig& config) {
  const double limit = config.clamp();
  PixelEstimate out{clamp_vector(d0, limit), PixelStatus::kMaxIterations, 0};
  bool any_system = false;
  bool fell_back = false;
  const RegularizerSpec fallback = RegularizerSpec::scalar(config.fallback_lambda);

  for (int it = 0; it < config.max_iterations; ++it) {
    ObservationSystem system;
    try {
      system = build_system(current, previous, r, out.d, config.mask, config.gradient);
    } catch (const InsufficientObservationsError&) {
      break;
    }
    any_system = true;
    out.iterations = it + 1;

    UpdateVector u;
    try {
      u = solve_update(system, config);
    } catch (const SingularityError&) {
      if (!config.fallback_to_rls) {
        return {clamp_vector(d0, limit), PixelStatus::kFallbackUsed, out.iterations};
      }
      fell_back = true;
      u = rls(system, fallback, config.tolerances);
    } catch (const DegenerateComponentError&) {
      if (!config.fallback_to_rls) {
        return {clamp_vector(d0, limit), PixelStatus::kFallbackUsed, out.iterations};
      }
      fell_back = true;
      u = rls(system, fallback, config.tolerances);
    }

    out.d = clamp_vector({out.d.dx + u(0), out.d.dy + u(1)}, limit);
    if (std::hypot(u(0), u(1)) <= config.convergence_eps) {
      out.status = PixelStatus::kConverged;
      break;
    }
  }

  if (!any_system) {
    out.status = PixelStatus::kSkippedBoundary;
  } else if (fell_back) {
    out.status = PixelStatus::kFallbackUsed;
  }
  return out;
}

DisplacementField estimate_field(const Frame& current, const Frame& previous,
                                 const EngineConfig& config) {
  config.validate();
  if (!current.same_shape(previous)) {
    throw ConfigError("frames in a pair must share dimensions");
  }
  const int w = current.width();
  const int h = current.height();
  DisplacementField field(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      DisplacementVector d0{};
      if (config.init_mode == InitMode::kCausalPredecessor) {
        if (x > 0) {
          d0 = field(x - 1, y);
        } else if (y > 0) {
          d0 = field(0, y - 1);
        }
      }
      const PixelEstimate est = estimate_pixel(
          current, previous, {static_cast<double>(x), static_cast<double>(y)}, d0, config);
      field(x, y) = est.d;
      field.set_status(x, y, est.status);
      field.set_iterations(x, y, est.iterations);
    }
  }
  return field;
}

std::vector<DisplacementField> estimate_sequence(std::span<const Frame> frames,
                                                 const EngineConfig& config) {
  if (frames.size() < 2) {
    throw ConfigError("a sequence needs at least two frames");
  }
  for (const Frame& f : frames) {
    if (!f.same_shape(frames.front())) {
      throw ConfigError("all frames in a sequence must share dimensions");
    }
  }
  config.validate();
  const std::size_t pairs = frames.size() - 1;
  std::vector<DisplacementField> fields(pairs);
  const std::size_t workers =
      std::min<std::size_t>(pairs, std::max(1u, std::thread::hardware_concurrency()));
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> pending;
  pending.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pending.push_back(std::async(std::launch::async, [&] {
      for (std::size_t k = next++; k < pairs; k = next++) {
        fields[k] = estimate_field(frames[k + 1], frames[k], config);
      }
    }));
  }
  for (auto& p : pending) p.get();
  return fields;
}

}  // namespace pelrec
