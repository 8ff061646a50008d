#include "sstempo/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "sstempo/errors.hpp"
#include "sstempo/pretext.hpp"

namespace sstempo {
namespace {

// Frames are pushed through the encoder in chunks to bound memory.
constexpr Eigen::Index kInferenceChunk = 512;

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

std::vector<double> CalibrationCurve::bpms() const {
  std::vector<double> v;
  for (const auto& p : points) v.push_back(p.true_bpm);
  return v;
}

std::vector<double> CalibrationCurve::outputs() const {
  std::vector<double> v;
  for (const auto& p : points) v.push_back(p.output);
  return v;
}

double CalibrationMap::bpm(double t) const { return std::exp2(a * t + b); }

void CalibrationMap::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw_io_error("cannot write calibration", path.string());
  os << fmt::format("a={:.17g}\nb={:.17g}\nk_inf={}\nfit_residual={:.17g}\nkind={}\n", a, b, k_inf, fit_residual,
                    to_string(kind));
}

CalibrationMap CalibrationMap::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw_io_error("cannot read calibration", path.string());
  CalibrationMap cal;
  bool have_a = false;
  bool have_b = false;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("malformed calibration line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "a") {
        cal.a = std::stod(value);
        have_a = true;
      } else if (key == "b") {
        cal.b = std::stod(value);
        have_b = true;
      } else if (key == "k_inf") {
        cal.k_inf = std::stoi(value);
      } else if (key == "fit_residual") {
        cal.fit_residual = std::stod(value);
      } else if (key == "kind") {
        cal.kind = tempogram_kind_from_string(value);
      }
    } catch (const std::invalid_argument&) {
      throw FormatError("malformed calibration value: " + line);
    }
  }
  if (!have_a || !have_b) throw FormatError("calibration file lacks a or b: " + path.string());
  if (cal.k_inf < kMinShift || cal.k_inf > kMaxShift) throw ConfigError("calibration k_inf outside 11..18");
  return cal;
}

std::vector<double> log_spaced_tempi(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw ConfigError("log-spaced tempi need 0 < lo < hi and n >= 2");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  }
  return out;
}

std::vector<float> frame_outputs(const nn::ModelParams<float>& model, const LogTempogram& tg, int k_inf) {
  const int len = model.config.encoder.input_len;
  if (k_inf < 0 || k_inf + len > tg.num_bins()) {
    throw ConfigError(fmt::format("slice at offset {} needs {} log bins, tempogram has {}", k_inf, k_inf + len,
                                  tg.num_bins()));
  }
  std::vector<float> out(static_cast<std::size_t>(tg.frames()));
  for (Eigen::Index start = 0; start < tg.frames(); start += kInferenceChunk) {
    const Eigen::Index n = std::min(kInferenceChunk, tg.frames() - start);
    nn::Mat<float> x = tg.values.block(start, k_inf, n, len).transpose();
    const nn::Mat<float> t = nn::encode(model, x);
    for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(start + i)] = t(0, i);
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw DataError("median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

CalibrationCurve calibration_curve(const nn::ModelParams<float>& model, TempogramKind kind,
                                   std::span<const double> tempi, const CalibrationSettings& settings) {
  const auto& pc = settings.pipeline;
  const double lowest = pc.t0;
  const double highest = pc.t0 * std::exp2(static_cast<double>(pc.num_bins - 1) / pc.bins_per_octave);
  for (double bpm : tempi) {
    if (!(bpm >= lowest && bpm <= highest)) {
      throw ConfigError(fmt::format("calibration tempo {} outside the log axis [{}, {:.1f}]", bpm, lowest, highest));
    }
  }

  CalibrationCurve curve;
  for (double bpm : tempi) {
    try {
      const AudioBuffer audio = synth_click_track(bpm, settings.track_seconds, kAnalysisSampleRate);
      const LogTempogram tg = log_tempogram_from_audio(audio, kind, pc);
      const std::vector<float> t = frame_outputs(model, tg, settings.k_inf);
      curve.points.push_back({bpm, median(std::vector<double>(t.begin(), t.end()))});
    } catch (const Error& e) {
      curve.failures.push_back(fmt::format("{:.3f} BPM: {}", bpm, e.what()));
    }
  }
  return curve;
}

CalibrationMap fit_calibration(const CalibrationCurve& curve, int k_inf) {
  const std::size_t n = curve.points.size();
  if (n < 2) throw CalibrationError("calibration needs at least two points");
  double mean_t = 0.0;
  double mean_y = 0.0;
  for (const auto& p : curve.points) {
    if (!(p.true_bpm > 0.0) || !std::isfinite(p.output)) throw CalibrationError("invalid calibration point");
    mean_t += p.output;
    mean_y += std::log2(p.true_bpm);
  }
  mean_t /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);
  double stt = 0.0;
  double sty = 0.0;
  for (const auto& p : curve.points) {
    const double dt = p.output - mean_t;
    stt += dt * dt;
    sty += dt * (std::log2(p.true_bpm) - mean_y);
  }
  if (!(stt > 0.0)) throw CalibrationError("model output is constant over the calibration tempi");

  CalibrationMap cal;
  cal.k_inf = k_inf;
  cal.a = sty / stt;
  cal.b = mean_y - cal.a * mean_t;
  double ss = 0.0;
  for (const auto& p : curve.points) {
    const double r = std::log2(p.true_bpm) - (cal.a * p.output + cal.b);
    ss += r * r;
  }
  cal.fit_residual = std::sqrt(ss / static_cast<double>(n));
  return cal;
}

TempoPrediction predict_bpm(const nn::ModelParams<float>& model, const CalibrationMap& cal, const LogTempogram& tg) {
  if (tg.frames() == 0) throw DataError("tempogram has no frames");
  const std::vector<float> t = frame_outputs(model, tg, cal.k_inf);
  TempoPrediction out;
  out.frame_bpm.reserve(t.size());
  for (float v : t) out.frame_bpm.push_back(cal.bpm(v));
  out.global_bpm = median(out.frame_bpm);
  return out;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractError("spearman: length mismatch");
  if (x.size() < 2) throw ContractError("spearman needs at least two points");
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

void write_curve_csv(const std::filesystem::path& path, const CalibrationCurve& curve, const CalibrationMap* cal) {
  std::ofstream os(path);
  if (!os) throw_io_error("cannot write calibration curve", path.string());
  os << "true_bpm,model_output,predicted_bpm\n";
  for (const auto& p : curve.points) {
    if (cal != nullptr) {
      os << fmt::format("{:.6f},{:.9g},{:.6f}\n", p.true_bpm, p.output, cal->bpm(p.output));
    } else {
      os << fmt::format("{:.6f},{:.9g},\n", p.true_bpm, p.output);
    }
  }
}

CalibrationCurve read_curve_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw_io_error("cannot read calibration curve", path.string());
  std::string line;
  std::getline(is, line);
  if (line.rfind("true_bpm,model_output", 0) != 0) throw FormatError("bad curve CSV header: " + path.string());
  CalibrationCurve curve;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string bpm_s, out_s;
    std::getline(ss, bpm_s, ',');
    std::getline(ss, out_s, ',');
    try {
      curve.points.push_back({std::stod(bpm_s), std::stod(out_s)});
    } catch (const std::exception&) {
      throw FormatError("malformed curve row: " + line);
    }
  }
  return curve;
}

}  // namespace sstempo
