#include "sstempo/novelty.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>

#include <fftw3.h>
#include <fmt/format.h>

#include "sstempo/errors.hpp"

namespace sstempo {
namespace {

struct FftwPlan {
  fftw_plan plan = nullptr;
  ~FftwPlan() {
    if (plan != nullptr) fftw_destroy_plan(plan);
  }
};

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

// numpy-style reflect padding: mirror about the edge sample, edge not repeated.
float reflect_at(const std::vector<float>& x, long long i) {
  const auto n = static_cast<long long>(x.size());
  if (n == 1) return x[0];
  const long long period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  if (i >= n) i = period - i;
  return x[static_cast<std::size_t>(i)];
}

}  // namespace

void NoveltyConfig::validate() const {
  if (!(hop > 0) || !(window > hop)) throw ConfigError("novelty config needs window > hop > 0");
  if (!(gamma > 0.0)) throw ConfigError("novelty gamma must be positive");
}

Spectrogram stft_magnitude(const AudioBuffer& audio, const NoveltyConfig& cfg) {
  cfg.validate();
  const std::size_t len = audio.samples.size();
  const auto window = static_cast<std::size_t>(cfg.window);
  const auto hop = static_cast<std::size_t>(cfg.hop);
  if (len < window) {
    throw DataError(fmt::format("audio has {} samples, shorter than one {}-sample window", len, window));
  }

  const std::size_t frames = (len + hop - 1) / hop;
  const std::size_t bins = window / 2 + 1;

  std::vector<double> hann(window);
  for (std::size_t i = 0; i < window; ++i) {
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(window));
  }

  std::unique_ptr<double, FftwDeleter> in(static_cast<double*>(fftw_malloc(sizeof(double) * window)));
  std::unique_ptr<fftw_complex, FftwDeleter> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
  FftwPlan plan;
  plan.plan = fftw_plan_dft_r2c_1d(static_cast<int>(window), in.get(), out.get(), FFTW_ESTIMATE);

  Spectrogram spec;
  spec.frame_rate = audio.sample_rate / static_cast<double>(hop);
  spec.magnitude.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(bins));
  const auto half = static_cast<long long>(window / 2);
  for (std::size_t f = 0; f < frames; ++f) {
    const long long start = static_cast<long long>(f * hop) - half;
    for (std::size_t i = 0; i < window; ++i) {
      in.get()[i] = hann[i] * reflect_at(audio.samples, start + static_cast<long long>(i));
    }
    fftw_execute(plan.plan);
    for (std::size_t b = 0; b < bins; ++b) {
      spec.magnitude(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(b)) =
          static_cast<float>(std::hypot(out.get()[b][0], out.get()[b][1]));
    }
  }
  return spec;
}

NoveltyCurve spectral_flux(const Spectrogram& spec, const NoveltyConfig& cfg) {
  cfg.validate();
  if ((spec.magnitude.array() < 0.0F).any()) throw ContractError("spectral_flux needs a nonnegative spectrogram");

  const Eigen::Index frames = spec.magnitude.rows();
  NoveltyCurve nov;
  nov.frame_rate = spec.frame_rate;
  nov.values.assign(static_cast<std::size_t>(frames), 0.0F);
  if (frames == 0) return nov;

  const Eigen::ArrayXXd compressed = (1.0 + cfg.gamma * spec.magnitude.cast<double>().array()).log();
  for (Eigen::Index f = 1; f < frames; ++f) {
    const double flux = (compressed.row(f) - compressed.row(f - 1)).max(0.0).sum();
    nov.values[static_cast<std::size_t>(f)] = static_cast<float>(flux);
  }
  const float peak = *std::max_element(nov.values.begin(), nov.values.end());
  if (peak > 0.0F) {
    for (float& v : nov.values) v /= peak;
  }
  return nov;
}

void write_novelty_csv(const std::filesystem::path& path, const NoveltyCurve& nov) {
  std::ofstream os(path);
  if (!os) throw_io_error("cannot write novelty CSV", path.string());
  os << "frame_index,value\n";
  for (std::size_t i = 0; i < nov.values.size(); ++i) os << fmt::format("{},{:.8g}\n", i, nov.values[i]);
}

}  // namespace sstempo
