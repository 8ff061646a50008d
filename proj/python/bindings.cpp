#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sstempo/calibrate.hpp"
#include "sstempo/checkpoint.hpp"
#include "sstempo/config.hpp"
#include "sstempo/errors.hpp"
#include "sstempo/harness.hpp"
#include "sstempo/novelty.hpp"
#include "sstempo/pipeline.hpp"
#include "sstempo/pretext.hpp"
#include "sstempo/synth.hpp"
#include "sstempo/tempogram.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace sstempo;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

AudioBuffer to_audio(const FloatArray& samples, double sample_rate) {
  if (samples.ndim() != 1) throw DataError("audio must be a 1-D array");
  AudioBuffer a;
  a.samples.assign(samples.data(), samples.data() + samples.size());
  a.sample_rate = sample_rate;
  return a;
}

FloatArray to_array(const std::vector<float>& v) {
  FloatArray out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

FloatArray to_array(const MatrixRF& m) {
  FloatArray out({m.rows(), m.cols()});
  std::copy(m.data(), m.data() + m.size(), out.mutable_data());
  return out;
}

py::dict report_dict(const ExperimentReport& r) {
  py::dict d;
  d["ok"] = r.ok;
  d["error"] = r.error;
  d["spearman"] = r.metrics.spearman;
  d["fit_residual"] = r.metrics.fit_residual;
  d["saturation"] = r.metrics.saturation;
  py::list history;
  for (const auto& e : r.history) history.append(py::make_tuple(e.epoch, e.l_t, e.l_r, e.total));
  d["history"] = history;
  py::list artifacts;
  for (const auto& a : r.artifacts) artifacts.append((r.spec.output_dir / a).string());
  d["artifacts"] = artifacts;
  return d;
}

}  // namespace

PYBIND11_MODULE(_sstempo, m) {
  m.doc() = "Self-supervised tempo estimation on synthetic click tracks.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  auto data = py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", data.ptr());
  auto numerical = py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<CalibrationError>(m, "CalibrationError", numerical.ptr());

  m.def(
      "synth_click_track",
      [](double bpm, double seconds, double sample_rate) {
        return to_array(synth_click_track(bpm, seconds, sample_rate).samples);
      },
      py::arg("bpm"), py::arg("seconds"), py::arg("sample_rate") = kAnalysisSampleRate);

  m.def(
      "sample_tempi",
      [](const std::string& distribution, std::size_t n, std::uint64_t seed, double mu, double sigma, double t_min,
         double t_max) {
        TempoDistribution d;
        d.kind = distribution_kind_from_string(distribution);
        d.mu = mu;
        d.sigma_dist = sigma;
        d.t_min = t_min;
        d.t_max = t_max;
        return sample_tempi(d, n, seed);
      },
      py::arg("distribution"), py::arg("n"), py::arg("seed") = 0, py::arg("mu") = 120.0, py::arg("sigma") = 0.25,
      py::arg("t_min") = 30.0, py::arg("t_max") = 240.0);

  m.def(
      "novelty",
      [](const FloatArray& samples, double sample_rate) {
        const NoveltyCurve n = compute_novelty(to_audio(samples, sample_rate));
        return py::make_tuple(to_array(n.values), n.frame_rate);
      },
      py::arg("samples"), py::arg("sample_rate") = kAnalysisSampleRate,
      "Spectral-flux novelty curve and its frame rate.");

  m.def(
      "tempogram",
      [](const FloatArray& samples, double sample_rate, const std::string& kind, bool log_axis) {
        const AudioBuffer audio = to_audio(samples, sample_rate);
        const TempogramKind k = tempogram_kind_from_string(kind);
        if (log_axis) {
          const LogTempogram tg = log_tempogram_from_audio(audio, k);
          return py::make_tuple(to_array(tg.values), tg.centers());
        }
        const PipelineConfig pc;
        const LinearTempogram tg =
            compute_linear_tempogram(k, compute_novelty(audio, pc.novelty), pc.window_s, pc.tempo_axis);
        return py::make_tuple(to_array(tg.values), std::vector<double>(tg.tempo_axis));
      },
      py::arg("samples"), py::arg("sample_rate") = kAnalysisSampleRate, py::arg("kind") = "fourier",
      py::arg("log_axis") = true, "Frames x bins salience and the tempo of each bin.");

  m.def("log_bin_centers", &log_bin_centers, py::arg("t0") = kDefaultT0,
        py::arg("bins_per_octave") = kDefaultBinsPerOctave, py::arg("num_bins") = kDefaultLogBins);
  m.def("huber", &huber, py::arg("x"), py::arg("delta") = 0.25);
  m.def("sigma_of", &sigma_of, py::arg("t_min"), py::arg("t_max"), py::arg("bins_per_octave") = 40);
  m.def(
      "total_loss",
      [](double l_t, double l_r, double w_t, double w_r) {
        LossConfig cfg;
        cfg.w_t = w_t;
        cfg.w_r = w_r;
        return total_loss(l_t, l_r, cfg);
      },
      py::arg("l_t"), py::arg("l_r"), py::arg("w_t") = 1e4, py::arg("w_r") = 1.0);
  m.def(
      "spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return spearman(x, y); },
      py::arg("x"), py::arg("y"));
  m.def(
      "saturation_metric",
      [](const std::vector<double>& bpm, const std::vector<double>& output) {
        if (bpm.size() != output.size()) throw ContractError("bpm and output lengths differ");
        CalibrationCurve c;
        for (std::size_t i = 0; i < bpm.size(); ++i) c.points.push_back({bpm[i], output[i]});
        return saturation_metric(c);
      },
      py::arg("bpm"), py::arg("output"));

  m.def(
      "run_experiment",
      [](const fs::path& config, const std::optional<fs::path>& output_dir) {
        ExperimentSpec spec = ExperimentSpec::from_config(Config::load(config));
        if (output_dir) spec.output_dir = *output_dir;
        ExperimentReport r;
        {
          py::gil_scoped_release release;
          r = run_experiment(spec);
        }
        return report_dict(r);
      },
      py::arg("config"), py::arg("output_dir") = py::none(),
      "Synthesize, train, calibrate and persist one experiment described by a TOML file.");

  m.def(
      "calibrate",
      [](const fs::path& model, const fs::path& out, double seconds, int points) {
        const LoadedModel lm = load_model(model);
        const auto it = lm.metadata.find("kind");
        if (it == lm.metadata.end()) throw ConfigError("checkpoint does not record a tempogram kind");
        CalibrationSettings cs;
        cs.track_seconds = seconds;
        const TempogramKind kind = tempogram_kind_from_string(it->second);
        const CalibrationCurve curve = calibration_curve(lm.params, kind, log_spaced_tempi(35.0, 300.0, points), cs);
        CalibrationMap cal = fit_calibration(curve, cs.k_inf);
        cal.kind = kind;
        cal.save(out);
        return py::make_tuple(curve.bpms(), curve.outputs(), cal.a, cal.b);
      },
      py::arg("model"), py::arg("out"), py::arg("seconds") = 30.0, py::arg("points") = 50);

  m.def(
      "predict",
      [](const fs::path& model, const fs::path& calibration, const FloatArray& samples, double sample_rate) {
        const LoadedModel lm = load_model(model);
        const CalibrationMap cal = CalibrationMap::load(calibration);
        const TempoPrediction p =
            predict_bpm(lm.params, cal, log_tempogram_from_audio(to_audio(samples, sample_rate), cal.kind));
        return py::make_tuple(p.global_bpm, p.frame_bpm);
      },
      py::arg("model"), py::arg("calibration"), py::arg("samples"), py::arg("sample_rate") = kAnalysisSampleRate,
      "Global BPM (median of frame estimates) and the per-frame estimates.");
}
