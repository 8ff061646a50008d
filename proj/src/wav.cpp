#include "sstempo/wav.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sstempo/errors.hpp"

namespace sstempo::wav {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

void put32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>(v >> 24)};
  os.write(b, 4);
}

void write_header(std::ostream& os, std::uint16_t format, int channels, double sample_rate,
                  int bits, std::uint32_t data_bytes) {
  const auto rate = static_cast<std::uint32_t>(std::lround(sample_rate));
  const auto block = static_cast<std::uint16_t>(channels * bits / 8);
  os.write("RIFF", 4);
  put32(os, 36 + data_bytes);
  os.write("WAVEfmt ", 8);
  put32(os, 16);
  put16(os, format);
  put16(os, static_cast<std::uint16_t>(channels));
  put32(os, rate);
  put32(os, rate * block);
  put16(os, block);
  put16(os, static_cast<std::uint16_t>(bits));
  os.write("data", 4);
  put32(os, data_bytes);
}

}  // namespace

RawWav read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io_error("cannot open WAV file", path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file: " + path.string());
  }

  std::uint16_t format = 0;
  int channels = 0;
  std::uint32_t rate = 0;
  int bits = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = le32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(len, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw FormatError("truncated fmt chunk: " + path.string());
      format = le16(chunk + 8);
      channels = le16(chunk + 10);
      rate = le32(chunk + 12);
      bits = le16(chunk + 22);
      if (format == kFormatExtensible) {
        if (avail < 26) throw FormatError("truncated extensible fmt chunk: " + path.string());
        format = le16(chunk + 8 + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = avail;
    }
    pos = body + len + (len & 1U);
  }

  if (!have_fmt || data == nullptr) throw FormatError("missing fmt or data chunk: " + path.string());
  if (channels < 1 || channels > 2) throw FormatError("unsupported channel count in " + path.string());
  if (rate == 0) throw FormatError("zero sample rate in " + path.string());

  RawWav out;
  out.channels = channels;
  out.sample_rate = rate;
  if (format == kFormatPcm && bits == 16) {
    const std::size_t n = data_len / 2;
    out.interleaved.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.interleaved[i] = static_cast<float>(static_cast<std::int16_t>(le16(data + 2 * i))) / 32768.0F;
    }
  } else if (format == kFormatFloat && bits == 32) {
    const std::size_t n = data_len / 4;
    out.interleaved.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.interleaved[i] = std::bit_cast<float>(le32(data + 4 * i));
    }
  } else {
    throw FormatError("unsupported WAV encoding (need PCM16 or float32): " + path.string());
  }
  out.interleaved.resize(out.frames() * static_cast<std::size_t>(channels));
  return out;
}

void write_pcm16(const std::filesystem::path& path, const std::vector<float>& mono, double sample_rate) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw_io_error("cannot write WAV file", path.string());
  write_header(os, kFormatPcm, 1, sample_rate, 16, static_cast<std::uint32_t>(mono.size() * 2));
  for (float s : mono) {
    const float c = std::clamp(s, -1.0F, 1.0F);
    put16(os, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32767.0F))));
  }
  if (!os) throw_io_error("error writing WAV file", path.string());
}

void write_float32(const std::filesystem::path& path, const std::vector<float>& interleaved,
                   int channels, double sample_rate) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw_io_error("cannot write WAV file", path.string());
  write_header(os, kFormatFloat, channels, sample_rate, 32,
               static_cast<std::uint32_t>(interleaved.size() * 4));
  for (float s : interleaved) put32(os, std::bit_cast<std::uint32_t>(s));
  if (!os) throw_io_error("error writing WAV file", path.string());
}

}  // namespace sstempo::wav
