#pragma once

#include <filesystem>
#include <vector>

#include "sstempo/synth.hpp"
#include "sstempo/types.hpp"

namespace sstempo {

struct NoveltyConfig {
  int window = 2048;
  int hop = 512;
  double gamma = 100.0;

  void validate() const;
};

/// Magnitude STFT, frames x (window / 2 + 1) bins.
struct Spectrogram {
  MatrixRF magnitude;
  double frame_rate = 0.0;
};

/// Spectral-flux onset strength, one value per STFT frame.
struct NoveltyCurve {
  std::vector<float> values;
  double frame_rate = 0.0;

  std::size_t size() const { return values.size(); }
};

/// Hann-windowed, centered frames with reflect padding; ceil(len / hop) frames.
Spectrogram stft_magnitude(const AudioBuffer& audio, const NoveltyConfig& cfg = {});

/// Log-compressed, half-wave rectified frame difference summed over all bins,
/// divided by its global maximum.
NoveltyCurve spectral_flux(const Spectrogram& spec, const NoveltyConfig& cfg = {});

inline NoveltyCurve compute_novelty(const AudioBuffer& audio, const NoveltyConfig& cfg = {}) {
  return spectral_flux(stft_magnitude(audio, cfg), cfg);
}

void write_novelty_csv(const std::filesystem::path& path, const NoveltyCurve& nov);

}  // namespace sstempo
