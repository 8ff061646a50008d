#include "sstempo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "sstempo/errors.hpp"
#include "sstempo/wav.hpp"

namespace sstempo {

TempoDistribution TempoDistribution::log_normal(double mu, double sigma_dist) {
  TempoDistribution d;
  d.kind = DistributionKind::LogNormal;
  d.mu = mu;
  d.sigma_dist = sigma_dist;
  return d;
}

TempoDistribution TempoDistribution::log_uniform(double t_min, double t_max) {
  TempoDistribution d;
  d.kind = DistributionKind::LogUniform;
  d.t_min = t_min;
  d.t_max = t_max;
  return d;
}

void TempoDistribution::validate() const {
  if (!(t_min > 0.0) || !std::isfinite(t_min)) throw ConfigError("t_min must be positive");
  if (!(t_max > t_min) || !std::isfinite(t_max)) throw ConfigError("t_max must exceed t_min");
  if (kind == DistributionKind::LogNormal) {
    if (!(mu > 0.0) || !std::isfinite(mu)) throw ConfigError("log-normal mu must be positive");
    if (!(sigma_dist > 0.0) || !std::isfinite(sigma_dist)) {
      throw ConfigError("log-normal sigma must be positive");
    }
  }
}

std::string TempoDistribution::label() const {
  if (kind == DistributionKind::LogNormal) return fmt::format("lognormal{:g}", mu);
  return fmt::format("loguniform{:g}-{:g}", t_min, t_max);
}

std::string_view to_string(DistributionKind kind) {
  return kind == DistributionKind::LogNormal ? "lognormal" : "loguniform";
}

DistributionKind distribution_kind_from_string(std::string_view s) {
  if (s == "lognormal") return DistributionKind::LogNormal;
  if (s == "loguniform") return DistributionKind::LogUniform;
  throw ConfigError(fmt::format("unknown distribution '{}' (expected lognormal|loguniform)", s));
}

double log_uniform_quantile(double t_min, double t_max, double i) {
  return t_min * std::pow(t_max / t_min, i);
}

std::vector<double> sample_tempi(const TempoDistribution& dist, std::size_t n, std::uint64_t seed) {
  dist.validate();
  if (n < 1) throw ConfigError("sample_tempi needs n >= 1");
  std::mt19937_64 rng(seed);
  std::vector<double> out(n);
  if (dist.kind == DistributionKind::LogNormal) {
    std::normal_distribution<double> normal(std::log2(dist.mu), dist.sigma_dist);
    for (auto& v : out) v = std::exp2(normal(rng));
  } else {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& v : out) {
      const double i = std::min(unit(rng), std::nextafter(1.0, 0.0));
      v = log_uniform_quantile(dist.t_min, dist.t_max, i);
    }
  }
  return out;
}

std::vector<std::size_t> click_onsets(double bpm, double duration_s, double sample_rate) {
  const double period = 60.0 / bpm;
  std::vector<std::size_t> onsets;
  for (std::size_t n = 0;; ++n) {
    const double t = static_cast<double>(n) * period;
    if (t >= duration_s) break;
    onsets.push_back(static_cast<std::size_t>(std::llround(t * sample_rate)));
  }
  return onsets;
}

AudioBuffer synth_click_track(double bpm, double duration_s, double sample_rate, const ClickShape& click) {
  if (!(bpm > 0.0) || !std::isfinite(bpm)) throw ConfigError("bpm must be positive");
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) throw ConfigError("duration must be positive");
  if (!(sample_rate > 0.0)) throw ConfigError("sample rate must be positive");
  if (60.0 / bpm < click.length_s) {
    throw ConfigError(fmt::format("inter-click interval {:.4f} s is shorter than the click", 60.0 / bpm));
  }

  const auto click_len = static_cast<std::size_t>(std::llround(click.length_s * sample_rate));
  std::vector<float> shape(click_len);
  for (std::size_t i = 0; i < click_len; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    shape[i] = static_cast<float>(click.amplitude * std::exp(-t / click.decay_s) *
                                  std::sin(2.0 * std::numbers::pi * click.frequency_hz * t));
  }

  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.samples.assign(static_cast<std::size_t>(std::llround(duration_s * sample_rate)), 0.0F);
  for (std::size_t onset : click_onsets(bpm, duration_s, sample_rate)) {
    for (std::size_t i = 0; i < click_len && onset + i < out.samples.size(); ++i) {
      out.samples[onset + i] = shape[i];
    }
  }
  return out;
}

std::vector<float> resample(std::span<const float> in, double rate_in, double rate_out) {
  if (!(rate_in > 0.0) || !(rate_out > 0.0)) throw ConfigError("sample rates must be positive");
  if (rate_in == rate_out) return {in.begin(), in.end()};

  constexpr double kBeta = 8.0;
  constexpr double kZeroCrossings = 32.0;
  const double ratio = rate_out / rate_in;
  const double cutoff = std::min(1.0, ratio) * 0.95;
  const double half_width = kZeroCrossings / cutoff;
  const double i0_beta = std::cyl_bessel_i(0.0, kBeta);

  // Kernel tabulated on a fine grid over [0, half_width]; linear interpolation between entries.
  constexpr double kTableStep = 1.0 / 512.0;
  const auto table_len = static_cast<std::size_t>(std::ceil(half_width / kTableStep)) + 2;
  std::vector<double> kernel(table_len);
  for (std::size_t i = 0; i < table_len; ++i) {
    const double x = static_cast<double>(i) * kTableStep;
    const double u = std::min(1.0, x / half_width);
    const double window = std::cyl_bessel_i(0.0, kBeta * std::sqrt(1.0 - u * u)) / i0_beta;
    const double arg = std::numbers::pi * cutoff * x;
    const double sinc = arg < 1e-12 ? 1.0 : std::sin(arg) / arg;
    kernel[i] = cutoff * sinc * window;
  }

  const auto n_out = static_cast<std::size_t>(std::llround(static_cast<double>(in.size()) * ratio));
  std::vector<float> out(n_out);
  const auto n_in = static_cast<long long>(in.size());
  for (std::size_t n = 0; n < n_out; ++n) {
    const double center = static_cast<double>(n) / ratio;
    const long long lo = std::max(0LL, static_cast<long long>(std::ceil(center - half_width)));
    const long long hi = std::min(n_in - 1, static_cast<long long>(std::floor(center + half_width)));
    double acc = 0.0;
    for (long long j = lo; j <= hi; ++j) {
      const double pos = std::abs(center - static_cast<double>(j)) / kTableStep;
      const auto idx = static_cast<std::size_t>(pos);
      const double frac = pos - static_cast<double>(idx);
      const double h = kernel[idx] + frac * (kernel[idx + 1] - kernel[idx]);
      acc += static_cast<double>(in[static_cast<std::size_t>(j)]) * h;
    }
    out[n] = static_cast<float>(acc);
  }
  return out;
}

AudioBuffer load_wav(const std::filesystem::path& path) {
  const wav::RawWav raw = wav::read(path);
  const std::size_t frames = raw.frames();
  if (frames == 0) throw DataError("WAV file contains no audio: " + path.string());

  std::vector<float> mono(frames);
  if (raw.channels == 1) {
    mono = raw.interleaved;
  } else {
    for (std::size_t i = 0; i < frames; ++i) {
      mono[i] = 0.5F * (raw.interleaved[2 * i] + raw.interleaved[2 * i + 1]);
    }
  }
  for (float v : mono) {
    if (!std::isfinite(v)) throw DataError("WAV file contains non-finite samples: " + path.string());
  }

  AudioBuffer out;
  out.sample_rate = kAnalysisSampleRate;
  out.samples = resample(mono, raw.sample_rate, kAnalysisSampleRate);
  if (out.samples.empty()) throw DataError("audio too short after resampling: " + path.string());

  float peak = 0.0F;
  for (float v : out.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.0F) {
    for (float& v : out.samples) v /= peak;
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio) {
  wav::write_pcm16(path, audio.samples, audio.sample_rate);
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
  std::ofstream os(path);
  if (!os) throw_io_error("cannot write manifest", path.string());
  os << "path,bpm,distribution,seed\n";
  for (const auto& r : rows) os << fmt::format("{},{:.6f},{},{}\n", r.path, r.bpm, r.distribution, r.seed);
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_io_error("cannot read manifest", path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("path,bpm,distribution,seed", 0) != 0) throw FormatError("bad manifest header: " + path.string());
  std::vector<ManifestRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string path_s, bpm_s, dist_s, seed_s;
    std::getline(ss, path_s, ',');
    std::getline(ss, bpm_s, ',');
    std::getline(ss, dist_s, ',');
    std::getline(ss, seed_s, ',');
    try {
      rows.push_back({path_s, std::stod(bpm_s), dist_s, std::stoull(seed_s)});
    } catch (const std::exception&) {
      throw FormatError("malformed manifest row: " + line);
    }
  }
  return rows;
}

}  // namespace sstempo
