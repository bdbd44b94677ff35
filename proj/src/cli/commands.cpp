#include "commands.hpp"

#include "config_file.hpp"

#include "pelrec/clustering.hpp"
#include "pelrec/errors.hpp"
#include "pelrec/io.hpp"
#include "pelrec/metrics.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace pelrec::cli {

namespace {

/// Argument-level problem detected before any compute starts.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse " + what + " '" + text + "'");
    }
  }
  return values;
}

RegularizerSpec parse_regularizer(const std::string& text, const std::string& what) {
  const auto values = parse_number_list(text, what);
  if (values.empty()) throw ConfigError(what + " is empty");
  RegularizerSpec spec = values.size() == 1 ? RegularizerSpec::scalar(values[0])
                                            : RegularizerSpec::diag(values);
  spec.validate();
  return spec;
}

MotionRegion parse_region(const std::string& text) {
  const auto v = parse_number_list(text, "region");
  if (v.size() != 6) {
    throw ConfigError("region must be x,y,width,height,vx,vy");
  }
  auto as_int = [&](double d) {
    if (d != std::floor(d)) throw ConfigError("region rectangle must be integral: " + text);
    return static_cast<int>(d);
  };
  return {{as_int(v[0]), as_int(v[1]), as_int(v[2]), as_int(v[3])}, {v[4], v[5]}};
}

std::string format_region(const MotionRegion& m) {
  return std::to_string(m.region.x) + "," + std::to_string(m.region.y) + "," +
         std::to_string(m.region.width) + "," + std::to_string(m.region.height) + "," +
         io::format_double(m.velocity.dx) + "," + io::format_double(m.velocity.dy);
}

std::string frame_name(std::size_t k) {
  std::ostringstream s;
  s << "frame_" << std::setw(4) << std::setfill('0') << k << ".pgm";
  return s.str();
}

std::string indexed_name(const char* stem, std::size_t k, const char* ext) {
  std::ostringstream s;
  s << stem << std::setw(4) << std::setfill('0') << k << ext;
  return s.str();
}

std::vector<fs::path> list_with_prefix(const fs::path& dir, const std::string& prefix,
                                       const std::string& ext) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind(prefix, 0) == 0 && entry.path().extension() == ext) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct ResolvedInput {
  std::vector<fs::path> frames;
  std::vector<fs::path> truth;
};

ResolvedInput resolve_input(const SequenceInput& input) {
  ResolvedInput r;
  std::string dir = input.sequence_dir;
  std::vector<std::string> frames = input.frames;
  // A lone directory argument is read like --sequence-dir.
  if (dir.empty() && frames.size() == 1 && fs::is_directory(frames.front())) {
    dir = frames.front();
    frames.clear();
  }
  if (!dir.empty()) {
    if (!fs::is_directory(dir)) {
      throw UsageError("sequence directory not found: " + dir);
    }
    r.frames = list_with_prefix(dir, "frame_", ".pgm");
    r.truth = list_with_prefix(dir, "truth_", ".flo");
  }
  for (const auto& f : frames) r.frames.emplace_back(f);
  if (!input.truth.empty()) {
    r.truth.clear();
    for (const auto& t : input.truth) r.truth.emplace_back(t);
  }
  for (const auto& p : r.frames) {
    if (!fs::is_regular_file(p)) throw UsageError("input frame not found: " + p.string());
  }
  for (const auto& p : r.truth) {
    if (!fs::is_regular_file(p)) throw UsageError("truth file not found: " + p.string());
  }
  if (!r.truth.empty() && r.truth.size() + 1 != r.frames.size()) {
    throw UsageError("expected " + std::to_string(r.frames.size() - 1) + " truth files, got " +
                     std::to_string(r.truth.size()));
  }
  return r;
}

void prepare_out_dir(const std::string& out_dir) {
  if (out_dir.empty()) throw UsageError("--out-dir is required");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw UsageError("cannot create output directory " + out_dir);
  }
}

std::string optional_number(const std::optional<double>& v) {
  return v ? io::format_double(*v) : std::string();
}

// Maps library exceptions onto exit codes with a single-line diagnostic.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

struct EngineFlags {
  std::string estimator = "pcr2";
  std::string mask = "square";
  int half_width = 2;
  std::string lambda = "1";
  std::string xi = "1";
  int components = 2;
  int max_iters = 10;
  double eps = 0.01;
  std::optional<double> clamp;
  std::string init = "causal";
  bool no_fallback = false;
  double fallback_lambda = 1.0;
  std::string gradient = "textbook";

  EngineConfig to_config() const {
    EngineConfig c;
    const auto e = parse_estimator(estimator);
    if (!e) throw ConfigError("unknown estimator '" + estimator + "'");
    c.estimator = *e;
    c.mask.kind = mask == "causal" ? MaskKind::kCausalHalf : MaskKind::kSquareWindow;
    c.mask.half_width = half_width;
    c.lambda = parse_regularizer(lambda, "lambda");
    c.xi = parse_regularizer(xi, "xi");
    c.components_k = components;
    c.max_iterations = max_iters;
    c.convergence_eps = eps;
    c.displacement_clamp = clamp;
    c.init_mode = init == "zero" ? InitMode::kZero : InitMode::kCausalPredecessor;
    c.fallback_to_rls = !no_fallback;
    c.fallback_lambda = fallback_lambda;
    c.gradient = gradient == "literal" ? GradientConvention::kLiteralIndex
                                       : GradientConvention::kTextbook;
    c.validate();
    return c;
  }
};

void add_engine_flags(CLI::App* app, EngineFlags& f) {
  app->add_option("--estimator", f.estimator, "Regression back-end")
      ->check(CLI::IsMember({"ols", "rls", "pcr1", "pcr2"}))
      ->capture_default_str();
  app->add_option("--mask", f.mask, "Observation mask shape")
      ->check(CLI::IsMember({"square", "causal"}))
      ->capture_default_str();
  app->add_option("--mask-half-width", f.half_width, "Mask half width h (window 2h+1)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--lambda", f.lambda, "RLS regulariser: scalar or comma-separated diagonal")
      ->capture_default_str();
  app->add_option("--xi", f.xi, "PCR2 component-domain regulariser: scalar or diagonal")
      ->capture_default_str();
  app->add_option("--components", f.components, "Principal components kept (1 or 2)")
      ->check(CLI::Range(1, 2))
      ->capture_default_str();
  app->add_option("--max-iters", f.max_iters, "Iterations per pixel")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--eps", f.eps, "Convergence threshold on |u| (pixels)")->capture_default_str();
  app->add_option("--clamp", f.clamp, "Componentwise displacement bound (default: half width)");
  app->add_option("--init", f.init, "Initial estimate policy")
      ->check(CLI::IsMember({"zero", "causal"}))
      ->capture_default_str();
  app->add_flag("--no-fallback", f.no_fallback, "Do not retry singular systems with RLS");
  app->add_option("--fallback-lambda", f.fallback_lambda, "Lambda of the RLS fallback")
      ->capture_default_str();
  app->add_option("--gradient", f.gradient, "Gradient index convention")
      ->check(CLI::IsMember({"textbook", "literal"}))
      ->capture_default_str();
}

struct SceneFlags {
  int width = 128;
  int height = 128;
  int frames = 3;
  std::uint64_t seed = 1;
  std::uint64_t noise_seed = 1;
  double snr_db = std::numeric_limits<double>::infinity();
  double smoothness = 1.5;
  std::vector<double> velocity{1.0, 0.5};
  std::vector<std::string> regions;
  std::string warp = "sequential";

  void to_specs(SceneSpec& scene, NoiseSpec& noise) const {
    scene.width = width;
    scene.height = height;
    scene.frame_count = frames;
    scene.texture_seed = seed;
    scene.smoothness = smoothness;
    scene.warp_mode = warp == "cumulative" ? WarpMode::kCumulative : WarpMode::kSequential;
    scene.motion.clear();
    if (regions.empty()) {
      if (velocity.size() != 2) throw ConfigError("velocity must be vx,vy");
      scene.motion.push_back({{0, 0, width, height}, {velocity[0], velocity[1]}});
    } else {
      for (const auto& r : regions) scene.motion.push_back(parse_region(r));
    }
    noise.snr_db = snr_db;
    noise.noise_seed = noise_seed;
    if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
      throw ConfigError("snr-db must be finite or inf");
    }
    scene.validate();
  }
};

void add_scene_flags(CLI::App* app, SceneFlags& f) {
  app->add_option("--width", f.width)->capture_default_str();
  app->add_option("--height", f.height)->capture_default_str();
  app->add_option("--frames", f.frames, "Number of frames")->capture_default_str();
  app->add_option("--seed", f.seed, "Texture seed")->capture_default_str();
  app->add_option("--noise-seed", f.noise_seed)->capture_default_str();
  app->add_option("--snr-db", f.snr_db, "Signal-to-noise ratio in dB (inf disables noise)")
      ->capture_default_str();
  app->add_option("--smoothness", f.smoothness, "Texture low-pass sigma (pixels)")
      ->capture_default_str();
  app->add_option("--velocity", f.velocity, "Whole-frame velocity vx,vy when no --region")
      ->delimiter(',')
      ->expected(2);
  app->add_option("--region", f.regions, "Moving rectangle x,y,w,h,vx,vy (repeatable)");
  app->add_option("--warp", f.warp, "Frame synthesis mode")
      ->check(CLI::IsMember({"sequential", "cumulative"}))
      ->capture_default_str();
}

std::vector<Frame> load_frames(const std::vector<fs::path>& paths) {
  std::vector<Frame> frames;
  for (const auto& p : paths) frames.push_back(io::read_pgm(p));
  return frames;
}

std::vector<DisplacementField> load_truth(const std::vector<fs::path>& paths) {
  std::vector<DisplacementField> fields;
  for (const auto& p : paths) fields.push_back(io::read_flow(p));
  return fields;
}

std::string manifest_text(const SceneSpec& scene, const NoiseSpec& noise) {
  std::ostringstream m;
  m << "width=" << scene.width << "\n";
  m << "height=" << scene.height << "\n";
  m << "frames=" << scene.frame_count << "\n";
  m << "seed=" << scene.texture_seed << "\n";
  m << "noise-seed=" << noise.noise_seed << "\n";
  m << "snr-db=" << (noise.enabled() ? io::format_double(noise.snr_db) : "inf") << "\n";
  m << "smoothness=" << io::format_double(scene.smoothness) << "\n";
  m << "warp=" << (scene.warp_mode == WarpMode::kCumulative ? "cumulative" : "sequential") << "\n";
  for (const auto& r : scene.motion) m << "region=" << format_region(r) << "\n";
  return m.str();
}

}  // namespace

int run_estimate(const EstimateRun& run, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ResolvedInput in = resolve_input(run.input);
    if (in.frames.size() < 2) throw UsageError("estimate needs at least two frames");
    if (run.out_dir.empty()) throw UsageError("--out-dir is required");
    run.engine.validate();
    const auto frames = load_frames(in.frames);
    const auto truth = load_truth(in.truth);

    const auto fields = estimate_sequence(frames, run.engine);
    const MetricsReport report = evaluate_sequence(frames, fields, truth);

    prepare_out_dir(run.out_dir);
    std::string csv = io::csv_row(
        {"frame_index", "imc_db", "mean_epe", "valid_fraction", "converged_fraction"});
    for (std::size_t j = 0; j < fields.size(); ++j) {
      io::write_flow(fs::path(run.out_dir) / indexed_name("flow_", j + 1, ".flo"), fields[j]);
      const CompensationSums sums = compensation_sums(frames[j + 1], frames[j], fields[j]);
      std::optional<double> epe;
      if (!truth.empty()) epe = endpoint_error(fields[j], truth[j]).mean;
      const double converged = static_cast<double>(fields[j].count(PixelStatus::kConverged)) /
                               static_cast<double>(fields[j].size());
      csv += io::csv_row({std::to_string(j + 1), io::format_double(report.per_frame_imc_db[j]),
                          optional_number(epe),
                          io::format_double(static_cast<double>(sums.used_pixels) /
                                            static_cast<double>(sums.total_pixels)),
                          io::format_double(converged)});
    }
    io::write_file_atomic(fs::path(run.out_dir) / "metrics.csv", csv);
    std::string summary = "sequence_imc_db=" + io::format_double(report.sequence_imc_db) +
                          " pairs=" + std::to_string(fields.size()) +
                          " estimator=" + std::string(to_string(run.engine.estimator));
    if (report.mean_endpoint_error) {
      summary += " mean_epe=" + io::format_double(*report.mean_endpoint_error);
    }
    io::write_file_atomic(fs::path(run.out_dir) / "summary.txt", summary + "\n");
    out << summary << "\n";
    return kExitOk;
  });
}

int run_synth(const SynthRun& run, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    run.scene.validate();
    if (run.out_dir.empty()) throw UsageError("--out-dir is required");
    const SyntheticSequence seq = make_sequence(run.scene, run.noise);
    prepare_out_dir(run.out_dir);
    for (std::size_t k = 0; k < seq.frames.size(); ++k) {
      io::write_pgm(fs::path(run.out_dir) / frame_name(k), seq.frames[k]);
    }
    for (std::size_t j = 0; j < seq.truth.size(); ++j) {
      io::write_flow(fs::path(run.out_dir) / indexed_name("truth_", j + 1, ".flo"), seq.truth[j]);
    }
    io::write_file_atomic(fs::path(run.out_dir) / "manifest.txt",
                          manifest_text(run.scene, run.noise));
    out << "wrote " << seq.frames.size() << " frames and " << seq.truth.size()
        << " truth fields to " << run.out_dir << "\n";
    return kExitOk;
  });
}

int run_compare(const CompareRun& run, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ResolvedInput in = resolve_input(run.input);
    if (run.out_dir.empty()) throw UsageError("--out-dir is required");
    run.engine.validate();

    std::vector<Frame> frames;
    std::vector<DisplacementField> truth;
    if (in.frames.empty()) {
      SyntheticSequence seq = make_sequence(run.scene, run.noise);
      frames = std::move(seq.frames);
      truth = std::move(seq.truth);
    } else {
      frames = load_frames(in.frames);
      truth = load_truth(in.truth);
    }
    if (frames.size() < 2) throw UsageError("compare needs at least two frames");

    std::string rows = io::csv_row({"estimator", "frame_index", "imc_db", "mean_epe"});
    std::string summary = io::csv_row({"estimator", "sequence_imc_db", "mean_epe"});
    for (Estimator e : {Estimator::kOls, Estimator::kRls, Estimator::kPcr1, Estimator::kPcr2}) {
      EngineConfig config = run.engine;
      config.estimator = e;
      const auto fields = estimate_sequence(frames, config);
      const MetricsReport report = evaluate_sequence(frames, fields, truth);
      const std::string name(to_string(e));
      for (std::size_t j = 0; j < fields.size(); ++j) {
        std::optional<double> epe;
        if (!truth.empty()) epe = endpoint_error(fields[j], truth[j]).mean;
        rows += io::csv_row({name, std::to_string(j + 1),
                             io::format_double(report.per_frame_imc_db[j]), optional_number(epe)});
      }
      summary += io::csv_row({name, io::format_double(report.sequence_imc_db),
                              optional_number(report.mean_endpoint_error)});
      out << std::left << std::setw(6) << name << " sequence_imc_db=" << std::fixed
          << std::setprecision(4) << report.sequence_imc_db;
      if (report.mean_endpoint_error) out << " mean_epe=" << *report.mean_endpoint_error;
      out << std::defaultfloat << "\n";
    }
    prepare_out_dir(run.out_dir);
    io::write_file_atomic(fs::path(run.out_dir) / "compare.csv", rows);
    io::write_file_atomic(fs::path(run.out_dir) / "compare_summary.csv", summary);
    return kExitOk;
  });
}

int run_cluster(const ClusterRun& run, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!fs::is_regular_file(run.flow)) throw UsageError("flow file not found: " + run.flow);
    if (!run.labels.empty() && !fs::is_regular_file(run.labels)) {
      throw UsageError("labels file not found: " + run.labels);
    }
    if (run.out_dir.empty()) throw UsageError("--out-dir is required");

    const DisplacementField field = io::read_flow(run.flow);
    std::vector<int> pixel_labels(field.size(), 0);
    if (!run.labels.empty()) {
      std::istringstream in(io::read_file(run.labels));
      pixel_labels.clear();
      int l = 0;
      while (in >> l) pixel_labels.push_back(l);
      if (!in.eof()) throw ConfigError("labels file must contain integers only");
      if (pixel_labels.size() != field.size()) {
        throw ConfigError("labels file has " + std::to_string(pixel_labels.size()) +
                          " entries, flow has " + std::to_string(field.size()) + " pixels");
      }
    }

    struct Sample {
      int x;
      int y;
      DisplacementVector dv;
      int label;
    };
    std::vector<Sample> samples;
    for (int y = 0; y < field.height(); ++y) {
      for (int x = 0; x < field.width(); ++x) {
        if (field.skipped(x, y)) continue;
        samples.push_back({x, y, field(x, y),
                           pixel_labels[static_cast<std::size_t>(y) * field.width() + x]});
      }
    }
    std::vector<DisplacementVector> dvs;
    std::vector<int> labels;
    for (const auto& s : samples) dvs.push_back(s.dv);

    const PcProjection projection = project_dvs(dvs, run.components);
    PcProjection training = projection;
    // Unlabelled (negative) pixels are classified but not used for fitting.
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].label >= 0) {
        keep.push_back(static_cast<Eigen::Index>(i));
        labels.push_back(samples[i].label);
      }
    }
    training.samples = projection.samples(keep, Eigen::all);
    training.scores = projection.scores(keep, Eigen::all);

    ClusterOptions options;
    options.mahalanobis_quantile = run.mahalanobis_quantile;
    options.residual_quantile = run.residual_quantile;
    const ClusterModel model = fit_classes(training, labels, options);

    auto score_at = [&](Eigen::Index i, Eigen::Index c) {
      return c < projection.components() ? projection.scores(i, c) : 0.0;
    };
    std::string scores = io::csv_row({"pc1", "pc2", "label"});
    std::string verdicts =
        io::csv_row({"x", "y", "dx", "dy", "verdict", "nearest", "memberships"});
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      scores += io::csv_row({io::format_double(score_at(row, 0)),
                             io::format_double(score_at(row, 1)),
                             std::to_string(samples[i].label)});
      const ClassificationOutcome c = classify(samples[i].dv, projection, model);
      std::string members;
      for (std::size_t k = 0; k < c.memberships.size(); ++k) {
        if (k) members += ";";
        members += std::to_string(c.memberships[k]);
      }
      verdicts += io::csv_row({std::to_string(samples[i].x), std::to_string(samples[i].y),
                               io::format_double(samples[i].dv.dx),
                               io::format_double(samples[i].dv.dy),
                               std::string(to_string(c.verdict)), std::to_string(c.nearest),
                               members});
    }
    std::string ellipses = io::csv_row({"class", "center_pc1", "center_pc2", "semi_major",
                                        "semi_minor", "orientation_rad", "threshold", "members"});
    for (std::size_t c = 0; c < model.classes.size(); ++c) {
      const Ellipse e = class_ellipse(model.classes[c]);
      ellipses += io::csv_row(
          {std::to_string(c), io::format_double(e.center.x()), io::format_double(e.center.y()),
           io::format_double(e.semi_major), io::format_double(e.semi_minor),
           io::format_double(e.orientation),
           io::format_double(model.classes[c].mahalanobis_threshold),
           std::to_string(model.classes[c].members)});
    }
    prepare_out_dir(run.out_dir);
    io::write_file_atomic(fs::path(run.out_dir) / "scores.csv", scores);
    io::write_file_atomic(fs::path(run.out_dir) / "ellipses.csv", ellipses);
    io::write_file_atomic(fs::path(run.out_dir) / "verdicts.csv", verdicts);
    out << "fitted " << model.classes.size() << " classes over " << samples.size()
        << " displacement vectors\n";
    return kExitOk;
  });
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pel-recursive dense motion estimation with PCA regression back-ends"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  EngineFlags estimate_engine;
  SequenceInput estimate_input;
  std::string estimate_out;
  auto* estimate = app.add_subcommand("estimate", "Estimate flow for consecutive frame pairs");
  estimate->add_option("inputs", estimate_input.frames, "Input PGM frames in order, or a directory written by `synth`");
  estimate->add_option("--sequence-dir", estimate_input.sequence_dir,
                       "Directory written by `synth`");
  estimate->add_option("--truth", estimate_input.truth, "Ground-truth flow files, one per pair");
  estimate->add_option("--out-dir", estimate_out, "Output directory");
  add_engine_flags(estimate, estimate_engine);

  SceneFlags synth_scene;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic sequence with ground truth");
  add_scene_flags(synth, synth_scene);
  synth->add_option("--out-dir", synth_out, "Output directory");

  EngineFlags compare_engine;
  SceneFlags compare_scene;
  SequenceInput compare_input;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Run all four estimators under one config");
  compare->add_option("inputs", compare_input.frames, "Input PGM frames (default: synthetic)");
  compare->add_option("--sequence-dir", compare_input.sequence_dir);
  compare->add_option("--truth", compare_input.truth);
  compare->add_option("--out-dir", compare_out, "Output directory");
  add_engine_flags(compare, compare_engine);
  add_scene_flags(compare, compare_scene);

  ClusterRun cluster_run;
  auto* cluster = app.add_subcommand("cluster", "PCA clustering of displacement vectors");
  cluster->add_option("--flow", cluster_run.flow, "Flow file")->required();
  cluster->add_option("--labels", cluster_run.labels,
                      "Per-pixel integer labels, row-major; negative excludes from fitting");
  cluster->add_option("--pcs", cluster_run.components, "Principal components kept")
      ->check(CLI::Range(1, 2))
      ->capture_default_str();
  cluster->add_option("--quantile", cluster_run.mahalanobis_quantile,
                      "Chi-square quantile of the class ellipse")
      ->capture_default_str();
  cluster->add_option("--residual-quantile", cluster_run.residual_quantile,
                      "Empirical quantile of training residuals (one-component fits)")
      ->capture_default_str();
  cluster->add_option("--out-dir", cluster_run.out_dir, "Output directory");

  for (auto* sub : {estimate, synth, compare, cluster}) {
    sub->add_option("--config", "key=value file; command-line flags take precedence");
  }

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    if (!args.empty()) {
      if (auto* sub = app.get_subcommand_no_throw(args.front())) {
        std::set<std::string> known;
        for (const auto* opt : sub->get_options()) {
          for (const auto& name : opt->get_lnames()) known.insert(name);
        }
        known.erase("config");
        args = merge_config(args, known);
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  auto engine_config = [&](const EngineFlags& flags, EngineConfig& config) {
    try {
      config = flags.to_config();
      return true;
    } catch (const ConfigError& e) {
      err << "error: " << e.what() << "\n";
      return false;
    }
  };

  if (estimate->parsed()) {
    EstimateRun run{estimate_input, {}, estimate_out};
    if (!engine_config(estimate_engine, run.engine)) return kExitUsage;
    return run_estimate(run, out, err);
  }
  if (synth->parsed()) {
    SynthRun run;
    run.out_dir = synth_out;
    const int status = guarded(err, [&] {
      synth_scene.to_specs(run.scene, run.noise);
      return kExitOk;
    });
    if (status != kExitOk) return status;
    return run_synth(run, out, err);
  }
  if (compare->parsed()) {
    CompareRun run;
    run.input = compare_input;
    run.out_dir = compare_out;
    if (!engine_config(compare_engine, run.engine)) return kExitUsage;
    const int status = guarded(err, [&] {
      compare_scene.to_specs(run.scene, run.noise);
      return kExitOk;
    });
    if (status != kExitOk) return status;
    return run_compare(run, out, err);
  }
  if (cluster->parsed()) {
    return run_cluster(cluster_run, out, err);
  }
  return kExitUsage;
}

}  // namespace pelrec::cli
