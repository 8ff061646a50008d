#pragma once

#include <filesystem>
#include <vector>

namespace sstempo::wav {

/// Interleaved samples as read from disk, converted to float in [-1, 1].
struct RawWav {
  std::vector<float> interleaved;
  int channels = 0;
  double sample_rate = 0.0;

  std::size_t frames() const { return channels > 0 ? interleaved.size() / channels : 0; }
};

/// Supports PCM 16-bit and IEEE float 32-bit (plain or WAVE_FORMAT_EXTENSIBLE).
RawWav read(const std::filesystem::path& path);

void write_pcm16(const std::filesystem::path& path, const std::vector<float>& mono, double sample_rate);
void write_float32(const std::filesystem::path& path, const std::vector<float>& interleaved,
                   int channels, double sample_rate);

}  // namespace sstempo::wav
