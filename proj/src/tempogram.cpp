#include "sstempo/tempogram.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "sstempo/errors.hpp"

namespace sstempo {
namespace {

int window_frames(double window_s, double frame_rate) {
  if (!(window_s > 0.0)) throw ConfigError("tempogram window must be positive");
  if (!(frame_rate > 0.0)) throw DataError("novelty curve has no frame rate");
  return std::max(2, static_cast<int>(std::lround(window_s * frame_rate)));
}

void check_axis(std::span<const double> axis) {
  if (axis.size() < 2) throw ConfigError("tempo axis needs at least two bins");
  for (std::size_t i = 1; i < axis.size(); ++i) {
    if (!(axis[i] > axis[i - 1])) throw ConfigError("tempo axis must be strictly increasing");
  }
  if (axis.front() > 25.0 || axis.back() < 310.0) {
    throw ConfigError(fmt::format("tempo axis [{}, {}] must cover [25, 310] BPM", axis.front(), axis.back()));
  }
}

void check_novelty(const NoveltyCurve& nov) {
  if (nov.values.empty()) throw DataError("novelty curve is empty");
}

std::vector<float> hann(int n) {
  std::vector<float> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] =
        static_cast<float>(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (n - 1)));
  }
  return w;
}

// Novelty zero-padded by half a window on each side so that row n of a
// tempogram is centered on novelty frame n.
Eigen::VectorXf padded_novelty(const NoveltyCurve& nov, int window) {
  const auto n = static_cast<Eigen::Index>(nov.values.size());
  Eigen::VectorXf padded = Eigen::VectorXf::Zero(n + window);
  padded.segment(window / 2, n) = Eigen::Map<const Eigen::VectorXf>(nov.values.data(), n);
  return padded;
}

}  // namespace

std::string_view to_string(TempogramKind kind) {
  switch (kind) {
    case TempogramKind::Autocorrelation: return "acf";
    case TempogramKind::Fourier: return "fourier";
    case TempogramKind::Hybrid: return "hybrid";
  }
  return "unknown";
}

TempogramKind tempogram_kind_from_string(std::string_view s) {
  if (s == "acf" || s == "autocorrelation") return TempogramKind::Autocorrelation;
  if (s == "fourier") return TempogramKind::Fourier;
  if (s == "hybrid") return TempogramKind::Hybrid;
  throw ConfigError(fmt::format("unknown tempogram kind '{}' (expected acf|fourier|hybrid)", s));
}

std::vector<double> LogTempogram::centers() const { return log_bin_centers(t0, bins_per_octave, num_bins()); }

std::vector<double> default_tempo_axis() {
  std::vector<double> axis;
  for (int bpm = 25; bpm <= 320; ++bpm) axis.push_back(bpm);
  return axis;
}

std::vector<double> log_bin_centers(double t0, int bins_per_octave, int num_bins) {
  if (num_bins < 1) throw ConfigError("log axis needs at least one bin");
  if (!(t0 > 0.0) || bins_per_octave < 1) throw ConfigError("log axis needs t0 > 0 and Q >= 1");
  std::vector<double> c(static_cast<std::size_t>(num_bins));
  for (int k = 0; k < num_bins; ++k) {
    c[static_cast<std::size_t>(k)] = t0 * std::exp2(static_cast<double>(k) / bins_per_octave);
  }
  return c;
}

LinearTempogram fourier_tempogram(const NoveltyCurve& nov, double window_s, std::span<const double> tempo_axis) {
  check_novelty(nov);
  check_axis(tempo_axis);
  const int window = window_frames(window_s, nov.frame_rate);
  const Eigen::VectorXf padded = padded_novelty(nov, window);
  const std::vector<float> w = hann(window);
  const auto frames = static_cast<Eigen::Index>(nov.values.size());
  const auto bins = static_cast<Eigen::Index>(tempo_axis.size());

  LinearTempogram out;
  out.tempo_axis.assign(tempo_axis.begin(), tempo_axis.end());
  out.frame_rate = nov.frame_rate;
  out.window_s = window_s;
  out.values.resize(frames, bins);

  Eigen::VectorXf kc(window);
  Eigen::VectorXf ks(window);
  for (Eigen::Index b = 0; b < bins; ++b) {
    const double omega = 2.0 * std::numbers::pi * (tempo_axis[static_cast<std::size_t>(b)] / 60.0) / nov.frame_rate;
    for (int j = 0; j < window; ++j) {
      const double phase = omega * j;
      kc[j] = w[static_cast<std::size_t>(j)] * static_cast<float>(std::cos(phase));
      ks[j] = w[static_cast<std::size_t>(j)] * static_cast<float>(std::sin(phase));
    }
    for (Eigen::Index n = 0; n < frames; ++n) {
      const auto seg = padded.segment(n, window);
      const float re = kc.dot(seg);
      const float im = ks.dot(seg);
      out.values(n, b) = std::sqrt(re * re + im * im);
    }
  }
  return out;
}

MatrixRF local_autocorrelation(const NoveltyCurve& nov, double window_s, int first_lag, int last_lag) {
  check_novelty(nov);
  const int window = window_frames(window_s, nov.frame_rate);
  if (first_lag < 1 || last_lag < first_lag || last_lag >= window) {
    throw ConfigError(fmt::format("lag range [{}, {}] invalid for a {}-frame window", first_lag, last_lag, window));
  }
  const Eigen::VectorXf padded = padded_novelty(nov, window);
  const std::vector<float> w = hann(window);
  const Eigen::Map<const Eigen::VectorXf> wv(w.data(), window);
  const auto frames = static_cast<Eigen::Index>(nov.values.size());

  MatrixRF lag(frames, last_lag - first_lag + 1);
  Eigen::VectorXf seg(window);
  for (Eigen::Index n = 0; n < frames; ++n) {
    seg = padded.segment(n, window).cwiseProduct(wv);
    const float energy = seg.squaredNorm();
    for (int l = first_lag; l <= last_lag; ++l) {
      const float r = energy > 0.0F ? seg.head(window - l).dot(seg.tail(window - l)) / energy : 0.0F;
      lag(n, l - first_lag) = r;
    }
  }
  return lag;
}

std::vector<float> lag_row_to_tempo(std::span<const float> lag_values, int first_lag, double frame_rate,
                                    std::span<const double> tempo_axis) {
  if (lag_values.empty()) throw ContractError("empty lag row");
  if (first_lag < 1) throw ContractError("lags start at 1");
  // Tempi of the lags in ascending order (largest lag first).
  const std::size_t n = lag_values.size();
  std::vector<double> tempi(n);
  std::vector<double> vals(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = n - 1 - i;
    tempi[i] = 60.0 * frame_rate / static_cast<double>(first_lag + static_cast<int>(src));
    vals[i] = lag_values[src];
  }

  std::vector<float> out(tempo_axis.size());
  for (std::size_t b = 0; b < tempo_axis.size(); ++b) {
    const double t = tempo_axis[b];
    if (t <= tempi.front()) {
      out[b] = static_cast<float>(vals.front());
      continue;
    }
    if (t >= tempi.back()) {
      out[b] = static_cast<float>(vals.back());
      continue;
    }
    const auto hi = static_cast<std::size_t>(std::upper_bound(tempi.begin(), tempi.end(), t) - tempi.begin());
    const std::size_t lo = hi - 1;
    const double frac = (t - tempi[lo]) / (tempi[hi] - tempi[lo]);
    out[b] = static_cast<float>(vals[lo] + frac * (vals[hi] - vals[lo]));
  }
  return out;
}

LinearTempogram autocorr_tempogram(const NoveltyCurve& nov, double window_s, std::span<const double> tempo_axis) {
  check_novelty(nov);
  check_axis(tempo_axis);
  const int window = window_frames(window_s, nov.frame_rate);
  // Only lags whose tempi bracket the axis contribute to the interpolation.
  const double lag_rate = 60.0 * nov.frame_rate;
  const int first_lag = std::clamp(static_cast<int>(std::floor(lag_rate / tempo_axis.back())), 1, window - 1);
  const int last_lag = std::clamp(static_cast<int>(std::ceil(lag_rate / tempo_axis.front())), first_lag, window - 1);
  const MatrixRF lag = local_autocorrelation(nov, window_s, first_lag, last_lag);

  LinearTempogram out;
  out.tempo_axis.assign(tempo_axis.begin(), tempo_axis.end());
  out.frame_rate = nov.frame_rate;
  out.window_s = window_s;
  out.values.resize(lag.rows(), static_cast<Eigen::Index>(tempo_axis.size()));
  for (Eigen::Index n = 0; n < lag.rows(); ++n) {
    const std::vector<float> row =
        lag_row_to_tempo(std::span<const float>(lag.row(n).data(), static_cast<std::size_t>(lag.cols())),
                         first_lag, nov.frame_rate, tempo_axis);
    for (std::size_t b = 0; b < row.size(); ++b) out.values(n, static_cast<Eigen::Index>(b)) = std::max(0.0F, row[b]);
  }
  return out;
}

LinearTempogram hybrid_tempogram(const LinearTempogram& ta, const LinearTempogram& tf) {
  if (ta.values.rows() != tf.values.rows() || ta.values.cols() != tf.values.cols()) {
    throw ContractError("hybrid tempogram needs tempograms of identical shape");
  }
  if (ta.tempo_axis != tf.tempo_axis) throw ContractError("hybrid tempogram needs identical tempo axes");
  LinearTempogram out = tf;
  out.values = ta.values.cwiseProduct(tf.values);
  return out;
}

LogTempogram to_log_axis(const LinearTempogram& lin, double t0, int bins_per_octave, int num_bins) {
  const std::vector<double> centers = log_bin_centers(t0, bins_per_octave, num_bins);
  const auto& axis = lin.tempo_axis;
  if (axis.size() < 2 || static_cast<Eigen::Index>(axis.size()) != lin.values.cols()) {
    throw ContractError("linear tempogram axis does not match its values");
  }
  const double top = t0 * std::exp2(static_cast<double>(num_bins) / bins_per_octave);
  if (axis.front() > t0 || axis.back() < top) {
    throw ConfigError(fmt::format("linear axis [{}, {}] does not cover log range [{}, {:.2f}]", axis.front(),
                                  axis.back(), t0, top));
  }

  LogTempogram out;
  out.t0 = t0;
  out.bins_per_octave = bins_per_octave;
  out.frame_rate = lin.frame_rate;
  out.values.resize(lin.values.rows(), num_bins);

  for (int k = 0; k < num_bins; ++k) {
    const double lo = t0 * std::exp2((k - 0.5) / bins_per_octave);
    const double hi = t0 * std::exp2((k + 0.5) / bins_per_octave);
    const auto first = static_cast<Eigen::Index>(std::lower_bound(axis.begin(), axis.end(), lo) - axis.begin());
    const auto last = static_cast<Eigen::Index>(std::lower_bound(axis.begin(), axis.end(), hi) - axis.begin());
    if (last > first) {
      out.values.col(k) = lin.values.middleCols(first, last - first).rowwise().mean();
      continue;
    }
    const double c = centers[static_cast<std::size_t>(k)];
    const auto upper = static_cast<Eigen::Index>(std::upper_bound(axis.begin(), axis.end(), c) - axis.begin());
    const Eigen::Index right = std::clamp<Eigen::Index>(upper, 1, static_cast<Eigen::Index>(axis.size()) - 1);
    const Eigen::Index left = right - 1;
    const double frac = std::clamp((c - axis[left]) / (axis[right] - axis[left]), 0.0, 1.0);
    out.values.col(k) =
        ((1.0 - frac) * lin.values.col(left).cast<double>() + frac * lin.values.col(right).cast<double>())
            .cast<float>();
  }
  return out;
}

void normalize_frames(LogTempogram& tg) {
  for (Eigen::Index n = 0; n < tg.values.rows(); ++n) {
    const float peak = tg.values.row(n).maxCoeff();
    if (peak > 0.0F) tg.values.row(n) /= peak;
  }
}

LinearTempogram compute_linear_tempogram(TempogramKind kind, const NoveltyCurve& nov, double window_s,
                                         std::span<const double> tempo_axis) {
  switch (kind) {
    case TempogramKind::Fourier: return fourier_tempogram(nov, window_s, tempo_axis);
    case TempogramKind::Autocorrelation: return autocorr_tempogram(nov, window_s, tempo_axis);
    case TempogramKind::Hybrid:
      return hybrid_tempogram(autocorr_tempogram(nov, window_s, tempo_axis),
                              fourier_tempogram(nov, window_s, tempo_axis));
  }
  throw ContractError("unknown tempogram kind");
}

}  // namespace sstempo
