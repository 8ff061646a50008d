#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sstempo {

inline constexpr double kAnalysisSampleRate = 22050.0;

/// Mono audio at a fixed sample rate. Samples are expected in [-1, 1].
struct AudioBuffer {
  std::vector<float> samples;
  double sample_rate = kAnalysisSampleRate;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

enum class DistributionKind { LogNormal, LogUniform };

/// Tempo distribution for synthetic datasets.
///
/// LogNormal: log2(X) ~ N(log2(mu), sigma_dist^2), so `mu` is the median in BPM.
/// LogUniform: X = t_min * (t_max / t_min)^i with i ~ U[0, 1).
struct TempoDistribution {
  DistributionKind kind = DistributionKind::LogUniform;
  double mu = 120.0;
  double sigma_dist = 0.25;
  double t_min = 30.0;
  double t_max = 240.0;

  static TempoDistribution log_normal(double mu, double sigma_dist = 0.25);
  static TempoDistribution log_uniform(double t_min = 30.0, double t_max = 240.0);

  /// Throws ConfigError when the parameters are inconsistent.
  void validate() const;
  /// Short label such as "lognormal70" or "loguniform30-240".
  std::string label() const;
};

std::string_view to_string(DistributionKind kind);
DistributionKind distribution_kind_from_string(std::string_view s);

std::vector<double> sample_tempi(const TempoDistribution& dist, std::size_t n, std::uint64_t seed);

/// Deterministic inverse-CDF form of the log-uniform law, `i` in [0, 1).
double log_uniform_quantile(double t_min, double t_max, double i);

/// Metronome click shape: exponentially decaying 1 kHz sine burst.
struct ClickShape {
  double length_s = 0.010;
  double frequency_hz = 1000.0;
  double amplitude = 0.9;
  double decay_s = 0.0025;
};

/// Clicks at n * 60 / bpm seconds for every n with onset time < duration_s.
AudioBuffer synth_click_track(double bpm, double duration_s,
                              double sample_rate = kAnalysisSampleRate,
                              const ClickShape& click = {});

/// Sample indices at which synth_click_track starts each click.
std::vector<std::size_t> click_onsets(double bpm, double duration_s, double sample_rate);

/// Windowed-sinc (Kaiser, beta = 8) sample-rate conversion.
std::vector<float> resample(std::span<const float> in, double rate_in, double rate_out);

/// Reads a PCM16 / float32 WAV, downmixes to mono, resamples to 22050 Hz and
/// peak-normalizes so that max |x| <= 1.
AudioBuffer load_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono.
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio);

struct ManifestRow {
  std::string path;
  double bpm = 0.0;
  std::string distribution;
  std::uint64_t seed = 0;
};

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

}  // namespace sstempo
