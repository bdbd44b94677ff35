#pragma once

#include "pelrec/engine.hpp"
#include "pelrec/synth.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pelrec::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Input frames for estimate/compare: explicit PGM paths or a directory
/// laid out by `synth` (frame_*.pgm, optional truth_*.flo).
struct SequenceInput {
  std::vector<std::string> frames;
  std::string sequence_dir;
  std::vector<std::string> truth;
};

struct EstimateRun {
  SequenceInput input;
  EngineConfig engine;
  std::string out_dir;
};

struct SynthRun {
  SceneSpec scene;
  NoiseSpec noise;
  std::string out_dir;
};

struct CompareRun {
  SequenceInput input;
  /// Used when no input frames are given.
  SceneSpec scene;
  NoiseSpec noise;
  EngineConfig engine;
  std::string out_dir;
};

struct ClusterRun {
  std::string flow;
  std::string labels;
  int components = 2;
  double mahalanobis_quantile = 0.975;
  double residual_quantile = 0.975;
  std::string out_dir;
};

int run_estimate(const EstimateRun& run, std::ostream& out, std::ostream& err);
int run_synth(const SynthRun& run, std::ostream& out, std::ostream& err);
int run_compare(const CompareRun& run, std::ostream& out, std::ostream& err);
int run_cluster(const ClusterRun& run, std::ostream& out, std::ostream& err);

/// Parses argv (subcommand first) and dispatches. Returns the exit status.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pelrec::cli
