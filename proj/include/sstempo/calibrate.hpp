#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sstempo/nn.hpp"
#include "sstempo/pipeline.hpp"

namespace sstempo {

struct CalibrationPoint {
  double true_bpm = 0.0;
  double output = 0.0;
};

/// Model output against known tempo. Tracks that failed in the pipeline are
/// listed in `failures` rather than aborting the whole curve.
struct CalibrationCurve {
  std::vector<CalibrationPoint> points;
  std::vector<std::string> failures;

  std::vector<double> bpms() const;
  std::vector<double> outputs() const;
};

/// log2(bpm) = a * t + b for slices taken at bin offset k_inf.
struct CalibrationMap {
  double a = 0.0;
  double b = 0.0;
  int k_inf = 14;
  double fit_residual = 0.0;
  TempogramKind kind = TempogramKind::Fourier;

  double bpm(double t) const;
  void save(const std::filesystem::path& path) const;
  static CalibrationMap load(const std::filesystem::path& path);
};

struct CalibrationSettings {
  int k_inf = 14;
  double track_seconds = 30.0;
  PipelineConfig pipeline;
};

/// n log-spaced tempi in [lo, hi].
std::vector<double> log_spaced_tempi(double lo = 35.0, double hi = 300.0, int n = 50);

/// Model output for every frame of a log tempogram, slicing at k_inf.
std::vector<float> frame_outputs(const nn::ModelParams<float>& model, const LogTempogram& tg, int k_inf);

double median(std::vector<double> values);

/// Click track per tempo -> log tempogram -> per-frame output -> median.
CalibrationCurve calibration_curve(const nn::ModelParams<float>& model, TempogramKind kind,
                                   std::span<const double> tempi, const CalibrationSettings& settings = {});

/// Least-squares fit of log2(bpm) against model output.
CalibrationMap fit_calibration(const CalibrationCurve& curve, int k_inf);

struct TempoPrediction {
  std::vector<double> frame_bpm;
  double global_bpm = 0.0;
};

TempoPrediction predict_bpm(const nn::ModelParams<float>& model, const CalibrationMap& cal, const LogTempogram& tg);

/// Spearman rank correlation with average ranks for ties; 0 when either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

/// `true_bpm,model_output,predicted_bpm`; predicted_bpm is empty without a map.
void write_curve_csv(const std::filesystem::path& path, const CalibrationCurve& curve, const CalibrationMap* cal);
CalibrationCurve read_curve_csv(const std::filesystem::path& path);

}  // namespace sstempo
