#include "sstempo/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "sstempo/checkpoint.hpp"
#include "sstempo/errors.hpp"
#include "sstempo/pipeline.hpp"
#include "sstempo/svg.hpp"

namespace sstempo {
namespace fs = std::filesystem;

namespace {

constexpr double kSaturationStep = 1e-3;
constexpr int kMinSaturationPoints = 10;
constexpr std::uint64_t kInitSeedOffset = 1000003;

std::string distribution_token(const TempoDistribution& d) {
  if (d.kind == DistributionKind::LogNormal) return fmt::format("lognormal:{:g}", d.mu);
  return "loguniform";
}

TempoDistribution parse_distribution_token(const std::string& token, const TempoDistribution& base) {
  TempoDistribution d = base;
  const auto colon = token.find(':');
  d.kind = distribution_kind_from_string(token.substr(0, colon));
  if (colon != std::string::npos) {
    try {
      d.mu = std::stod(token.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad distribution center in '" + token + "'");
    }
  }
  d.validate();
  return d;
}

void write_report(const ExperimentReport& r) {
  const fs::path path = r.spec.output_dir / "report.txt";
  std::ofstream os(path);
  if (!os) throw_io_error("cannot write report", path.string());
  os << "name=" << r.spec.name << '\n';
  os << "status=" << (r.ok ? "ok" : "failed") << '\n';
  if (!r.error.empty()) os << "error=" << r.error << '\n';
  os << "distribution=" << distribution_token(r.spec.distribution) << '\n';
  os << "kind=" << to_string(r.spec.kind) << '\n';
  os << "seed=" << r.spec.seed << '\n';
  os << fmt::format("spearman={:.9g}\nfit_residual={:.9g}\nsaturation={:.9g}\n", r.metrics.spearman,
                    r.metrics.fit_residual, r.metrics.saturation);
  if (r.calibration) os << fmt::format("calibration_a={:.9g}\ncalibration_b={:.9g}\n", r.calibration->a, r.calibration->b);
  for (const auto& f : r.curve.failures) os << "calibration_failure=" << f << '\n';
  for (const auto& a : r.artifacts) {
    if (fs::exists(r.spec.output_dir / a)) os << "artifact=" << a.generic_string() << '\n';
  }
}

}  // namespace

Profile profile_from_string(std::string_view s) {
  if (s == "desk") return Profile::Desk;
  if (s == "paper") return Profile::Paper;
  throw ConfigError(fmt::format("unknown profile '{}' (expected desk|paper)", s));
}

void ExperimentSpec::validate() const {
  distribution.validate();
  train.validate();
  if (n_tracks < 1) throw ConfigError("n_tracks must be at least 1");
  if (!(track_seconds > 0.0)) throw ConfigError("track_seconds must be positive");
  if (d < 1) throw ConfigError("model width d must be positive");
  if (k_inf < kMinShift || k_inf > kMaxShift) throw ConfigError("k_inf must lie in 11..18");
  if (calibration_tempi.size() < 2) throw ConfigError("calibration needs at least two tempi");
  if (output_dir.empty()) throw ConfigError("output_dir must be set");
}

void ExperimentSpec::apply_profile(Profile profile) {
  if (profile == Profile::Desk) {
    n_tracks = 50;
    track_seconds = 30.0;
    d = 16;
    train.frame_stride = 4;
  } else {
    n_tracks = 1000;
    track_seconds = 60.0;
    d = 64;
    train.frame_stride = 1;
  }
}

std::string ExperimentSpec::to_toml() const {
  std::string out;
  out += "[experiment]\n";
  out += fmt::format("name = \"{}\"\n", name);
  out += fmt::format("distribution = \"{}\"\n", to_string(distribution.kind));
  out += fmt::format("mu = {:.17g}\nsigma = {:.17g}\nt_min = {:.17g}\nt_max = {:.17g}\n", distribution.mu,
                     distribution.sigma_dist, distribution.t_min, distribution.t_max);
  out += fmt::format("kind = \"{}\"\n", to_string(kind));
  out += fmt::format("n_tracks = {}\ntrack_seconds = {:.17g}\nseed = {}\n", n_tracks, track_seconds, seed);
  out += fmt::format("save_audio = {}\n", save_audio ? "true" : "false");
  out += fmt::format("output_dir = \"{}\"\n", output_dir.generic_string());
  out += "\n[model]\n";
  out += fmt::format("d = {}\n", d);
  out += "\n[train]\n";
  out += fmt::format("batch_size = {}\nepochs = {}\nlr = {:.17g}\nseed = {}\nframe_stride = {}\n", train.batch_size,
                     train.epochs, train.lr, train.seed, train.frame_stride);
  out += "\n[calibration]\n";
  out += fmt::format("k_inf = {}\ntempi = [", k_inf);
  for (std::size_t i = 0; i < calibration_tempi.size(); ++i) {
    out += fmt::format("{}{:.17g}", i == 0 ? "" : ", ", calibration_tempi[i]);
  }
  out += "]\n";
  return out;
}

ExperimentSpec ExperimentSpec::from_config(const Config& cfg) {
  ExperimentSpec s;
  s.name = cfg.get_string("experiment.name", s.name);
  s.distribution.kind = distribution_kind_from_string(cfg.get_string("experiment.distribution", "loguniform"));
  s.distribution.mu = cfg.get_double("experiment.mu", s.distribution.mu);
  s.distribution.sigma_dist = cfg.get_double("experiment.sigma", s.distribution.sigma_dist);
  s.distribution.t_min = cfg.get_double("experiment.t_min", s.distribution.t_min);
  s.distribution.t_max = cfg.get_double("experiment.t_max", s.distribution.t_max);
  s.kind = tempogram_kind_from_string(cfg.get_string("experiment.kind", "fourier"));
  s.n_tracks = static_cast<int>(cfg.get_int("experiment.n_tracks", s.n_tracks));
  s.track_seconds = cfg.get_double("experiment.track_seconds", s.track_seconds);
  s.seed = static_cast<std::uint64_t>(cfg.get_int("experiment.seed", 0));
  s.save_audio = cfg.get_bool("experiment.save_audio", false);
  s.output_dir = cfg.get_string("experiment.output_dir", s.output_dir.string());
  s.d = static_cast<int>(cfg.get_int("model.d", s.d));
  s.train.batch_size = static_cast<int>(cfg.get_int("train.batch_size", s.train.batch_size));
  s.train.epochs = static_cast<int>(cfg.get_int("train.epochs", s.train.epochs));
  s.train.lr = cfg.get_double("train.lr", s.train.lr);
  s.train.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", static_cast<std::int64_t>(s.seed)));
  s.train.frame_stride = static_cast<int>(cfg.get_int("train.frame_stride", s.train.frame_stride));
  s.k_inf = static_cast<int>(cfg.get_int("calibration.k_inf", s.k_inf));
  if (cfg.has("calibration.tempi")) {
    const auto& v = cfg.at("calibration.tempi");
    if (v.type != ConfigValue::Type::Array) throw ConfigError("calibration.tempi must be an array");
    s.calibration_tempi.clear();
    for (const auto& item : v.items) {
      if (item.type != ConfigValue::Type::Number) throw ConfigError("calibration.tempi must hold numbers");
      s.calibration_tempi.push_back(item.number);
    }
  } else if (cfg.has("calibration.points")) {
    s.calibration_tempi = log_spaced_tempi(cfg.get_double("calibration.min_bpm", 35.0),
                                           cfg.get_double("calibration.max_bpm", 300.0),
                                           static_cast<int>(cfg.get_int("calibration.points", 50)));
  }
  s.validate();
  return s;
}

double saturation_metric(const CalibrationCurve& curve) {
  const auto& pts = curve.points;
  if (static_cast<int>(pts.size()) < kMinSaturationPoints) {
    throw ContractError(fmt::format("saturation needs at least {} points, got {}", kMinSaturationPoints, pts.size()));
  }
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].true_bpm < pts[i - 1].true_bpm) throw ContractError("saturation needs a curve sorted by tempo");
  }
  std::size_t flat = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (std::abs(pts[i].output - pts[i - 1].output) < kSaturationStep) ++flat;
  }
  return static_cast<double>(flat) / static_cast<double>(pts.size() - 1);
}

CalibrationCurve restrict_curve(const CalibrationCurve& curve, double lo, double hi) {
  CalibrationCurve out;
  for (const auto& p : curve.points) {
    if (p.true_bpm >= lo && p.true_bpm <= hi) out.points.push_back(p);
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  ExperimentReport report;
  report.spec = spec;
  std::string stage = "setup";
  try {
    spec.validate();
    fs::create_directories(spec.output_dir);
    {
      std::ofstream os(spec.output_dir / "experiment.toml");
      if (!os) throw_io_error("cannot write spec snapshot", (spec.output_dir / "experiment.toml").string());
      os << spec.to_toml();
      report.artifacts.emplace_back("experiment.toml");
    }

    stage = "synthesis";
    const std::vector<double> tempi = sample_tempi(spec.distribution, static_cast<std::size_t>(spec.n_tracks), spec.seed);
    if (spec.save_audio) fs::create_directories(spec.output_dir / "tracks");
    std::vector<ManifestRow> manifest;
    std::vector<LogTempogram> dataset;
    const PipelineConfig pipeline;
    for (std::size_t i = 0; i < tempi.size(); ++i) {
      const AudioBuffer audio = synth_click_track(tempi[i], spec.track_seconds);
      std::string rel;
      if (spec.save_audio) {
        rel = fmt::format("tracks/track_{:04d}.wav", i);
        write_wav(spec.output_dir / rel, audio);
      }
      manifest.push_back({rel, tempi[i], spec.distribution.label(), spec.seed});
      dataset.push_back(log_tempogram_from_audio(audio, spec.kind, pipeline));
    }
    write_manifest(spec.output_dir / "dataset.csv", manifest);
    report.artifacts.emplace_back("dataset.csv");

    stage = "training";
    const LossConfig loss = LossConfig::for_range(spec.distribution.t_min, spec.distribution.t_max);
    const nn::ModelParams<float> init =
        nn::init_params<float>(nn::ModelConfig::with_width(spec.d), spec.seed + kInitSeedOffset);
    const std::map<std::string, std::string> model_meta{{"kind", std::string(to_string(spec.kind))},
                                                         {"experiment", spec.name}};
    TrainHooks hooks;
    std::vector<EpochLoss> partial;
    hooks.on_epoch = [&](const EpochLoss& e, const nn::ModelParams<float>& p, const nn::AdamState<float>& s) {
      partial.push_back(e);
      write_loss_history(spec.output_dir / "loss_history.csv", partial);
      auto meta = model_meta;
      meta["epoch"] = std::to_string(e.epoch);
      save_model(spec.output_dir / "checkpoint_latest.stem", p, meta);
      save_adam_state(spec.output_dir / "checkpoint_latest.adam", s, p);
    };
    hooks.dump_on_failure = spec.output_dir / "failure_dump.stem";
    report.artifacts.emplace_back("loss_history.csv");
    report.artifacts.emplace_back("checkpoint_latest.stem");
    report.artifacts.emplace_back("checkpoint_latest.adam");
    report.artifacts.emplace_back("failure_dump.stem");
    TrainResult trained = train(dataset, init, loss, spec.train, hooks);
    report.history = trained.history;
    dataset.clear();
    save_model(spec.output_dir / "model.stem", trained.params, model_meta);
    report.artifacts.emplace_back("model.stem");
    report.artifacts.emplace_back("model.stem.manifest");
    save_adam_state(spec.output_dir / "model.adam", trained.adam, trained.params);
    report.artifacts.emplace_back("model.adam");

    stage = "calibration";
    CalibrationSettings cs;
    cs.k_inf = spec.k_inf;
    cs.track_seconds = spec.track_seconds;
    report.curve = calibration_curve(trained.params, spec.kind, spec.calibration_tempi, cs);
    std::sort(report.curve.points.begin(), report.curve.points.end(),
              [](const CalibrationPoint& a, const CalibrationPoint& b) { return a.true_bpm < b.true_bpm; });
    write_curve_csv(spec.output_dir / "calibration_curve.csv", report.curve, nullptr);
    report.artifacts.emplace_back("calibration_curve.csv");
    if (report.curve.points.size() >= 2) {
      const auto b = report.curve.bpms();
      const auto o = report.curve.outputs();
      report.metrics.spearman = spearman(b, o);
    }
    if (static_cast<int>(report.curve.points.size()) >= kMinSaturationPoints) {
      report.metrics.saturation = saturation_metric(report.curve);
    }
    CalibrationMap cal = fit_calibration(report.curve, spec.k_inf);
    cal.kind = spec.kind;
    report.metrics.fit_residual = cal.fit_residual;
    report.calibration = cal;
    cal.save(spec.output_dir / "calibration.txt");
    write_curve_csv(spec.output_dir / "calibration_curve.csv", report.curve, &cal);
    report.artifacts.emplace_back("calibration.txt");
    report.ok = true;
  } catch (const Error& e) {
    report.ok = false;
    report.exit_code = e.exit_code();
    report.error = fmt::format("{} failed: {}", stage, e.what());
  } catch (const std::exception& e) {
    report.ok = false;
    report.exit_code = ExitCode::kData;
    report.error = fmt::format("{} failed: {}", stage, e.what());
  }
  try {
    if (fs::exists(spec.output_dir)) {
      report.artifacts.emplace_back("report.txt");
      write_report(report);
    }
  } catch (const std::exception& e) {
    if (report.error.empty()) {
      report.error = fmt::format("report failed: {}", e.what());
      report.exit_code = ExitCode::kData;
    }
    report.ok = false;
  }
  std::erase_if(report.artifacts, [&](const fs::path& a) { return !fs::exists(spec.output_dir / a); });
  return report;
}

namespace {

struct CurveRow {
  std::string experiment;
  std::string distribution;
  std::string kind;
  double bpm = 0.0;
  double output = 0.0;
};

void render_rows(const std::vector<CurveRow>& rows, const std::vector<std::string>& experiments,
                 const std::map<std::string, std::pair<std::string, std::string>>& labels, const fs::path& svg_path) {
  svg::GridLayout layout;
  for (const auto& e : experiments) {
    const auto& [dist, kind] = labels.at(e);
    if (std::find(layout.row_labels.begin(), layout.row_labels.end(), kind) == layout.row_labels.end()) {
      layout.row_labels.push_back(kind);
    }
    if (std::find(layout.col_labels.begin(), layout.col_labels.end(), dist) == layout.col_labels.end()) {
      layout.col_labels.push_back(dist);
    }
  }
  std::vector<svg::Panel> panels;
  for (const auto& e : experiments) {
    const auto& [dist, kind] = labels.at(e);
    svg::Panel p;
    p.title = e;
    p.row = static_cast<int>(std::find(layout.row_labels.begin(), layout.row_labels.end(), kind) -
                             layout.row_labels.begin());
    p.col = static_cast<int>(std::find(layout.col_labels.begin(), layout.col_labels.end(), dist) -
                             layout.col_labels.begin());
    for (const auto& r : rows) {
      if (r.experiment != e) continue;
      p.series.x.push_back(r.bpm);
      p.series.y.push_back(r.output);
    }
    panels.push_back(std::move(p));
  }
  svg::write_grid(svg_path, panels, layout);
}

}  // namespace

GridReport run_grid(const std::vector<ExperimentSpec>& specs, const fs::path& output_dir, unsigned jobs) {
  if (specs.empty()) throw ConfigError("grid needs at least one experiment");
  fs::create_directories(output_dir);
  GridReport grid;
  grid.reports.resize(specs.size());

  if (jobs == 0) jobs = std::max(1U, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(specs.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) grid.reports[i] = run_experiment(specs[i]);
  };
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  grid.curves_csv = output_dir / "grid_curves.csv";
  std::ofstream csv(grid.curves_csv);
  if (!csv) throw_io_error("cannot write grid CSV", grid.curves_csv.string());
  csv << "experiment,distribution,kind,true_bpm,model_output,predicted_bpm\n";
  std::vector<CurveRow> rows;
  std::vector<std::string> names;
  std::map<std::string, std::pair<std::string, std::string>> labels;
  for (const auto& r : grid.reports) {
    const std::string dist = distribution_token(r.spec.distribution);
    const std::string kind(to_string(r.spec.kind));
    names.push_back(r.spec.name);
    labels[r.spec.name] = {dist, kind};
    for (const auto& p : r.curve.points) {
      const std::string predicted = r.calibration ? fmt::format("{:.6f}", r.calibration->bpm(p.output)) : "";
      csv << fmt::format("{},{},{},{:.6f},{:.9g},{}\n", r.spec.name, dist, kind, p.true_bpm, p.output, predicted);
      rows.push_back({r.spec.name, dist, kind, p.true_bpm, p.output});
    }
  }
  csv.close();

  grid.svg = output_dir / "grid.svg";
  render_rows(rows, names, labels, grid.svg);

  grid.summary = output_dir / "grid_report.txt";
  std::ofstream summary(grid.summary);
  if (!summary) throw_io_error("cannot write grid report", grid.summary.string());
  summary << "experiment,distribution,kind,status,spearman,fit_residual,saturation,error\n";
  for (const auto& r : grid.reports) {
    summary << fmt::format("{},{},{},{},{:.6f},{:.6f},{:.6f},{}\n", r.spec.name,
                           distribution_token(r.spec.distribution), to_string(r.spec.kind),
                           r.ok ? "ok" : "failed", r.metrics.spearman, r.metrics.fit_residual, r.metrics.saturation,
                           r.error);
  }
  return grid;
}

std::vector<ExperimentSpec> grid_from_config(const Config& cfg, Profile profile, const fs::path& out) {
  ExperimentSpec base = ExperimentSpec::from_config(cfg);
  base.apply_profile(profile);
  if (cfg.has("model.d")) base.d = static_cast<int>(cfg.get_int("model.d", base.d));
  if (cfg.has("train.frame_stride")) base.train.frame_stride = static_cast<int>(cfg.get_int("train.frame_stride", 1));
  if (cfg.has("experiment.n_tracks") && profile == Profile::Desk) {
    base.n_tracks = static_cast<int>(cfg.get_int("experiment.n_tracks", base.n_tracks));
  }
  if (cfg.has("experiment.track_seconds") && profile == Profile::Desk) {
    base.track_seconds = cfg.get_double("experiment.track_seconds", base.track_seconds);
  }

  std::vector<std::string> dists = cfg.get_strings("grid.distributions");
  if (dists.empty()) dists = {"lognormal:70", "lognormal:120", "lognormal:170", "loguniform"};
  std::vector<std::string> kinds = cfg.get_strings("grid.kinds");
  if (kinds.empty()) kinds = {"acf", "fourier", "hybrid"};

  std::vector<ExperimentSpec> specs;
  for (const auto& k : kinds) {
    for (const auto& dtok : dists) {
      ExperimentSpec s = base;
      s.kind = tempogram_kind_from_string(k);
      s.distribution = parse_distribution_token(dtok, base.distribution);
      s.name = fmt::format("{}_{}", to_string(s.kind), s.distribution.label());
      s.output_dir = out / s.name;
      s.validate();
      specs.push_back(std::move(s));
    }
  }
  return specs;
}

void plot_curves_csv(const fs::path& csv, const fs::path& svg_path) {
  std::ifstream in(csv);
  if (!in) throw_io_error("cannot read curves CSV", csv.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("experiment,distribution,kind,true_bpm,model_output", 0) != 0) {
    throw FormatError("unexpected curves CSV header: " + csv.string());
  }
  std::vector<CurveRow> rows;
  std::vector<std::string> names;
  std::map<std::string, std::pair<std::string, std::string>> labels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    CurveRow r;
    std::string bpm, out;
    std::getline(ss, r.experiment, ',');
    std::getline(ss, r.distribution, ',');
    std::getline(ss, r.kind, ',');
    std::getline(ss, bpm, ',');
    std::getline(ss, out, ',');
    try {
      r.bpm = std::stod(bpm);
      r.output = std::stod(out);
    } catch (const std::exception&) {
      throw FormatError("malformed curves row: " + line);
    }
    if (!labels.count(r.experiment)) {
      names.push_back(r.experiment);
      labels[r.experiment] = {r.distribution, r.kind};
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError("curves CSV has no data: " + csv.string());
  render_rows(rows, names, labels, svg_path);
}

}  // namespace sstempo
