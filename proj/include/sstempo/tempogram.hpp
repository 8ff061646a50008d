#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "sstempo/novelty.hpp"
#include "sstempo/types.hpp"

namespace sstempo {

enum class TempogramKind { Autocorrelation, Fourier, Hybrid };

std::string_view to_string(TempogramKind kind);
/// Accepts "acf", "autocorrelation", "fourier", "hybrid".
TempogramKind tempogram_kind_from_string(std::string_view s);

/// Frames x tempo-bins salience on a linearly spaced BPM axis.
struct LinearTempogram {
  MatrixRF values;
  std::vector<double> tempo_axis;
  double frame_rate = 0.0;
  int frame_hop = 1;
  double window_s = 10.0;

  Eigen::Index frames() const { return values.rows(); }
};

/// Frames x K salience with bin k centered at t0 * 2^(k / bins_per_octave).
struct LogTempogram {
  MatrixRF values;
  double t0 = 25.0;
  int bins_per_octave = 40;
  double frame_rate = 0.0;

  Eigen::Index frames() const { return values.rows(); }
  int num_bins() const { return static_cast<int>(values.cols()); }
  std::vector<double> centers() const;
};

inline constexpr double kDefaultT0 = 25.0;
inline constexpr int kDefaultBinsPerOctave = 40;
inline constexpr int kDefaultLogBins = 146;

/// 25..320 BPM in 1-BPM steps.
std::vector<double> default_tempo_axis();

/// [t0 * 2^(k / Q)] for k = 0 .. K-1.
std::vector<double> log_bin_centers(double t0, int bins_per_octave, int num_bins);

/// Magnitude of the Hann-windowed complex correlation of the novelty curve with
/// a sinusoid at tempo / 60 Hz, one row per novelty frame.
LinearTempogram fourier_tempogram(const NoveltyCurve& nov, double window_s, std::span<const double> tempo_axis);

/// Short-time autocorrelation (Hann-windowed segment, normalized by lag 0) for
/// lags first_lag..last_lag. Row n is centered on novelty frame n.
MatrixRF local_autocorrelation(const NoveltyCurve& nov, double window_s, int first_lag, int last_lag);

/// Maps one time-lag row (lags first_lag, first_lag + 1, ...) onto a tempo axis
/// by linear interpolation in tempo, tempo(lag) = 60 * frame_rate / lag.
std::vector<float> lag_row_to_tempo(std::span<const float> lag_values, int first_lag, double frame_rate,
                                    std::span<const double> tempo_axis);

LinearTempogram autocorr_tempogram(const NoveltyCurve& nov, double window_s, std::span<const double> tempo_axis);

/// Elementwise product of an autocorrelation and a Fourier tempogram.
LinearTempogram hybrid_tempogram(const LinearTempogram& ta, const LinearTempogram& tf);

/// Log bin k averages the linear bins inside [t0 2^((k-.5)/Q), t0 2^((k+.5)/Q));
/// empty bins are linearly interpolated at the bin center.
LogTempogram to_log_axis(const LinearTempogram& lin, double t0 = kDefaultT0,
                         int bins_per_octave = kDefaultBinsPerOctave, int num_bins = kDefaultLogBins);

/// Scales every frame so that its maximum is 1; all-zero frames are left alone.
void normalize_frames(LogTempogram& tg);

LinearTempogram compute_linear_tempogram(TempogramKind kind, const NoveltyCurve& nov, double window_s,
                                         std::span<const double> tempo_axis);

}  // namespace sstempo
