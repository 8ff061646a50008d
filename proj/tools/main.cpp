#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sstempo/calibrate.hpp"
#include "sstempo/checkpoint.hpp"
#include "sstempo/config.hpp"
#include "sstempo/errors.hpp"
#include "sstempo/harness.hpp"
#include "sstempo/matrix_io.hpp"
#include "sstempo/novelty.hpp"
#include "sstempo/pipeline.hpp"
#include "sstempo/synth.hpp"
#include "sstempo/tempogram.hpp"

namespace fs = std::filesystem;
using namespace sstempo;

namespace {

std::vector<fs::path> wav_inputs(const fs::path& in) {
  if (!fs::exists(in)) throw DataError("input does not exist: " + in.string());
  if (!fs::is_directory(in)) return {in};
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(in)) {
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (entry.is_regular_file() && ext == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .wav files in " + in.string());
  return files;
}

TempogramKind model_kind(const LoadedModel& m, const std::string& override_kind) {
  if (!override_kind.empty()) return tempogram_kind_from_string(override_kind);
  const auto it = m.metadata.find("kind");
  if (it == m.metadata.end()) throw ConfigError("checkpoint does not record a tempogram kind; pass --kind");
  return tempogram_kind_from_string(it->second);
}

struct SynthArgs {
  std::string dist = "loguniform";
  double mu = 120.0;
  double sigma = 0.25;
  double t_min = 30.0;
  double t_max = 240.0;
  int n = 10;
  double seconds = 30.0;
  std::string out;
  std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& a) {
  TempoDistribution dist;
  dist.kind = distribution_kind_from_string(a.dist);
  dist.mu = a.mu;
  dist.sigma_dist = a.sigma;
  dist.t_min = a.t_min;
  dist.t_max = a.t_max;
  dist.validate();
  if (a.n < 1) throw ConfigError("--n must be at least 1");
  const fs::path out = a.out;
  fs::create_directories(out);
  const auto tempi = sample_tempi(dist, static_cast<std::size_t>(a.n), a.seed);
  std::vector<ManifestRow> rows;
  for (std::size_t i = 0; i < tempi.size(); ++i) {
    const std::string name = fmt::format("track_{:04d}.wav", i);
    write_wav(out / name, synth_click_track(tempi[i], a.seconds));
    rows.push_back({name, tempi[i], dist.label(), a.seed});
  }
  write_manifest(out / "manifest.csv", rows);
  fmt::print("wrote {} tracks to {}\n", rows.size(), out.string());
  return 0;
}

struct TempogramArgs {
  std::string kind = "fourier";
  std::string in;
  std::string out;
  bool log_axis = false;
  bool csv = false;
  bool novelty = false;
  double window_s = 10.0;
};

int run_tempogram(const TempogramArgs& a) {
  const TempogramKind kind = tempogram_kind_from_string(a.kind);
  const fs::path out = a.out;
  fs::create_directories(out);
  PipelineConfig pc;
  pc.window_s = a.window_s;
  for (const auto& wav : wav_inputs(a.in)) {
    const AudioBuffer audio = load_wav(wav);
    const NoveltyCurve nov = compute_novelty(audio, pc.novelty);
    const std::string stem = wav.stem().string();
    if (a.novelty) write_novelty_csv(out / (stem + ".novelty.csv"), nov);
    MatrixRF values;
    std::vector<double> axis;
    std::string axis_name;
    if (a.log_axis) {
      const LogTempogram tg = log_tempogram_from_novelty(nov, kind, pc);
      values = tg.values;
      axis = tg.centers();
      axis_name = "log_bpm_center";
    } else {
      const LinearTempogram tg = compute_linear_tempogram(kind, nov, pc.window_s, pc.tempo_axis);
      values = tg.values;
      axis = tg.tempo_axis;
      axis_name = "bpm";
    }
    write_matrix(out / (stem + ".stem"), values);
    write_axis_csv(out / (stem + ".axis.csv"), axis, axis_name);
    if (a.csv) write_matrix_csv(out / (stem + ".csv"), values, axis);
    fmt::print("{}: {} frames x {} bins\n", wav.string(), values.rows(), values.cols());
  }
  return 0;
}

int run_train(const std::string& config_path, const std::string& out_override) {
  ExperimentSpec spec = ExperimentSpec::from_config(Config::load(config_path));
  if (!out_override.empty()) spec.output_dir = out_override;
  const ExperimentReport r = run_experiment(spec);
  for (const auto& e : r.history) {
    fmt::print("epoch {:3d}  L_T {:.6g}  L_R {:.6g}  total {:.6g}\n", e.epoch, e.l_t, e.l_r, e.total);
  }
  if (!r.ok) {
    fmt::print(stderr, "error: {}\n", r.error);
    return static_cast<int>(r.exit_code);
  }
  fmt::print("spearman {:.4f}  fit residual {:.4g}  saturation {:.3f}\n", r.metrics.spearman, r.metrics.fit_residual,
             r.metrics.saturation);
  fmt::print("artifacts in {}\n", spec.output_dir.string());
  return 0;
}

struct CalibrateArgs {
  std::string model;
  std::string kind;
  std::string out;
  std::string curve;
  double seconds = 30.0;
  int k_inf = 14;
  double min_bpm = 35.0;
  double max_bpm = 300.0;
  int points = 50;
};

int run_calibrate(const CalibrateArgs& a) {
  const LoadedModel m = load_model(a.model);
  const TempogramKind kind = model_kind(m, a.kind);
  CalibrationSettings cs;
  cs.k_inf = a.k_inf;
  cs.track_seconds = a.seconds;
  const auto tempi = log_spaced_tempi(a.min_bpm, a.max_bpm, a.points);
  const CalibrationCurve curve = calibration_curve(m.params, kind, tempi, cs);
  for (const auto& f : curve.failures) fmt::print(stderr, "warning: {}\n", f);
  CalibrationMap cal = fit_calibration(curve, a.k_inf);
  cal.kind = kind;
  cal.save(a.out);
  const fs::path curve_path = a.curve.empty() ? fs::path(a.out + ".curve.csv") : fs::path(a.curve);
  write_curve_csv(curve_path, curve, &cal);
  fmt::print("log2(bpm) = {:.6g} * t + {:.6g}  (residual {:.4g}, {} points)\n", cal.a, cal.b, cal.fit_residual,
             curve.points.size());
  return 0;
}

int run_predict(const std::string& model_path, const std::string& calib_path, const std::string& in) {
  const LoadedModel m = load_model(model_path);
  const CalibrationMap cal = CalibrationMap::load(calib_path);
  for (const auto& wav : wav_inputs(in)) {
    const LogTempogram tg = log_tempogram_from_audio(load_wav(wav), cal.kind);
    const TempoPrediction p = predict_bpm(m.params, cal, tg);
    fmt::print("{},{:.2f}\n", wav.string(), p.global_bpm);
  }
  return 0;
}

int run_grid_cmd(const std::string& config_path, const std::string& profile, const std::string& out, unsigned jobs) {
  const Config cfg = Config::load(config_path);
  const fs::path out_dir = out.empty() ? fs::path(cfg.get_string("grid.output_dir", "runs/grid")) : fs::path(out);
  const auto specs = grid_from_config(cfg, profile_from_string(profile), out_dir);
  const GridReport g = run_grid(specs, out_dir, jobs);
  int rc = 0;
  for (const auto& r : g.reports) {
    fmt::print("{:<28} {:<7} spearman {:+.4f}  saturation {:.3f}{}\n", r.spec.name, r.ok ? "ok" : "FAILED",
               r.metrics.spearman, r.metrics.saturation, r.ok ? "" : "  " + r.error);
    if (!r.ok && rc == 0) rc = static_cast<int>(r.exit_code);
  }
  fmt::print("{}\n{}\n{}\n", g.curves_csv.string(), g.svg.string(), g.summary.string());
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised tempo estimation on synthetic click tracks"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Synthesize click tracks and a dataset manifest");
  s->add_option("--dist", synth.dist, "lognormal | loguniform")->capture_default_str();
  s->add_option("--mu", synth.mu, "log-normal center (BPM)")->capture_default_str();
  s->add_option("--sigma", synth.sigma, "log-normal spread (octaves)")->capture_default_str();
  s->add_option("--t-min", synth.t_min, "log-uniform lower bound")->capture_default_str();
  s->add_option("--t-max", synth.t_max, "log-uniform upper bound")->capture_default_str();
  s->add_option("--n", synth.n, "number of tracks")->capture_default_str();
  s->add_option("--seconds", synth.seconds, "track duration")->capture_default_str();
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--seed", synth.seed)->capture_default_str();

  TempogramArgs tg;
  auto* t = app.add_subcommand("tempogram", "Compute tempograms for a WAV file or directory");
  t->add_option("--kind", tg.kind, "acf | fourier | hybrid")->capture_default_str();
  t->add_option("--in", tg.in, "WAV file or directory")->required();
  t->add_option("--out", tg.out, "output directory")->required();
  t->add_flag("--log-axis", tg.log_axis, "resample to the log2 tempo axis");
  t->add_flag("--csv", tg.csv, "also write a CSV copy of each tempogram");
  t->add_flag("--novelty", tg.novelty, "also dump the novelty curve");
  t->add_option("--window", tg.window_s, "analysis window (s)")->capture_default_str();

  std::string train_config, train_out;
  auto* tr = app.add_subcommand("train", "Synthesize, train, calibrate and report one experiment");
  tr->add_option("--config", train_config, "TOML experiment file")->required();
  tr->add_option("--out", train_out, "override experiment.output_dir");

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Fit the output-to-BPM map of a trained model");
  c->add_option("--model", cal.model, "model checkpoint")->required();
  c->add_option("--kind", cal.kind, "tempogram kind (default: from checkpoint)");
  c->add_option("--out", cal.out, "calibration map file")->required();
  c->add_option("--curve", cal.curve, "curve CSV (default: OUT.curve.csv)");
  c->add_option("--seconds", cal.seconds)->capture_default_str();
  c->add_option("--k-inf", cal.k_inf)->capture_default_str();
  c->add_option("--min-bpm", cal.min_bpm)->capture_default_str();
  c->add_option("--max-bpm", cal.max_bpm)->capture_default_str();
  c->add_option("--points", cal.points)->capture_default_str();

  std::string pred_model, pred_calib, pred_in;
  auto* p = app.add_subcommand("predict", "Print the estimated BPM of each track");
  p->add_option("--model", pred_model)->required();
  p->add_option("--calib", pred_calib)->required();
  p->add_option("--in", pred_in, "WAV file or directory")->required();

  std::string grid_config, grid_profile = "desk", grid_out;
  unsigned grid_jobs = 0;
  auto* g = app.add_subcommand("grid", "Run a distribution x tempogram grid");
  g->add_option("--config", grid_config)->required();
  g->add_option("--profile", grid_profile, "desk | paper")->capture_default_str();
  g->add_option("--out", grid_out, "output directory (default: grid.output_dir)");
  g->add_option("--jobs", grid_jobs, "parallel experiments (0 = all cores)")->capture_default_str();

  std::string plot_in, plot_out;
  auto* pl = app.add_subcommand("plot", "Render grid_curves.csv as an SVG panel grid");
  pl->add_option("--in", plot_in)->required();
  pl->add_option("--out", plot_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfiguration);
  }

  try {
    if (*s) return run_synth(synth);
    if (*t) return run_tempogram(tg);
    if (*tr) return run_train(train_config, train_out);
    if (*c) return run_calibrate(cal);
    if (*p) return run_predict(pred_model, pred_calib, pred_in);
    if (*g) return run_grid_cmd(grid_config, grid_profile, grid_out, grid_jobs);
    if (*pl) {
      plot_curves_csv(plot_in, plot_out);
      return 0;
    }
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return static_cast<int>(e.exit_code());
  } catch (const std::filesystem::filesystem_error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return static_cast<int>(ExitCode::kData);
  }
  return static_cast<int>(ExitCode::kConfiguration);
}
