#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sstempo/calibrate.hpp"
#include "sstempo/config.hpp"
#include "sstempo/errors.hpp"
#include "sstempo/nn.hpp"
#include "sstempo/pretext.hpp"
#include "sstempo/synth.hpp"

namespace sstempo {

enum class Profile { Desk, Paper };
Profile profile_from_string(std::string_view s);

/// One training run: a tempo distribution, a tempogram kind and everything
/// needed to rebuild the run from scratch.
struct ExperimentSpec {
  std::string name = "experiment";
  TempoDistribution distribution;
  TempogramKind kind = TempogramKind::Fourier;
  int n_tracks = 1000;
  double track_seconds = 60.0;
  int d = 64;
  TrainConfig train;
  std::uint64_t seed = 0;  ///< dataset seed; init and shuffling seeds derive from it
  int k_inf = 14;
  std::vector<double> calibration_tempi = log_spaced_tempi();
  bool save_audio = false;
  std::filesystem::path output_dir = "runs/experiment";

  void validate() const;
  /// Desk: 50 x 30 s tracks, d = 16, frame stride 4. Paper: 1000 x 60 s, d = 64, stride 1.
  void apply_profile(Profile profile);
  std::string to_toml() const;
  /// Reads the `[experiment]`, `[model]`, `[train]` and `[calibration]` tables.
  static ExperimentSpec from_config(const Config& cfg);
};

struct ExperimentMetrics {
  double spearman = 0.0;
  double fit_residual = 0.0;
  double saturation = 0.0;
};

struct ExperimentReport {
  ExperimentSpec spec;
  bool ok = false;
  std::string error;
  ExitCode exit_code = ExitCode::kSuccess;
  std::vector<EpochLoss> history;
  CalibrationCurve curve;
  std::optional<CalibrationMap> calibration;
  ExperimentMetrics metrics;
  std::vector<std::filesystem::path> artifacts;  ///< relative to spec.output_dir
};

/// Pearson-free flatness measure: fraction of adjacent (sorted by tempo) curve
/// points whose outputs differ by less than 1e-3.
double saturation_metric(const CalibrationCurve& curve);

/// Points with lo <= true_bpm <= hi.
CalibrationCurve restrict_curve(const CalibrationCurve& curve, double lo, double hi);

/// Synthesize -> tempograms -> train -> calibrate -> persist. Stage failures
/// are caught; the report is marked failed and earlier artifacts are kept.
ExperimentReport run_experiment(const ExperimentSpec& spec);

struct GridReport {
  std::vector<ExperimentReport> reports;
  std::filesystem::path curves_csv;
  std::filesystem::path svg;
  std::filesystem::path summary;
};

/// Runs every experiment (up to `jobs` at a time), then writes grid_curves.csv,
/// grid.svg (rows = tempogram kind, columns = distribution) and grid_report.txt.
GridReport run_grid(const std::vector<ExperimentSpec>& specs, const std::filesystem::path& output_dir,
                    unsigned jobs = 0);

/// Expands a grid config: `[grid] distributions` (e.g. "loguniform",
/// "lognormal:70") x `[grid] kinds`, over a base experiment.
std::vector<ExperimentSpec> grid_from_config(const Config& cfg, Profile profile, const std::filesystem::path& out);

/// Re-renders grid_curves.csv as an SVG panel grid.
void plot_curves_csv(const std::filesystem::path& csv, const std::filesystem::path& svg);

}  // namespace sstempo
