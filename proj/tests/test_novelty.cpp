#include <cmath>
#include <numbers>
#include <vector>

#include <catch_amalgamated.hpp>

#include "sstempo/errors.hpp"
#include "sstempo/novelty.hpp"
#include "sstempo/synth.hpp"
#include "support.hpp"

using namespace sstempo;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

AudioBuffer tone(double hz, double seconds) {
  AudioBuffer a;
  a.sample_rate = 22050.0;
  a.samples.resize(static_cast<std::size_t>(seconds * 22050.0));
  for (std::size_t n = 0; n < a.samples.size(); ++n) {
    a.samples[n] = static_cast<float>(std::sin(2.0 * std::numbers::pi * hz * n / 22050.0));
  }
  return a;
}

}  // namespace

TEST_CASE("STFT frame count and rate", "[novelty]") {
  const Spectrogram s = stft_magnitude(tone(440.0, 1.0));
  CHECK(s.magnitude.rows() == 44);
  CHECK(s.magnitude.cols() == 1025);
  CHECK_THAT(s.frame_rate, WithinRel(22050.0 / 512.0, 1e-12));
  AudioBuffer exact = tone(440.0, 1.0);
  exact.samples.resize(512 * 40);
  CHECK(stft_magnitude(exact).magnitude.rows() == 40);
}

TEST_CASE("a 1 kHz tone peaks in DFT bin 93", "[novelty]") {
  const Spectrogram s = stft_magnitude(tone(1000.0, 2.0));
  for (Eigen::Index f = 4; f < s.magnitude.rows() - 4; ++f) {
    Eigen::Index arg = 0;
    s.magnitude.row(f).maxCoeff(&arg);
    REQUIRE(arg == 93);
  }
  // Hann window coherent gain: amplitude * N / 4.
  CHECK_THAT(s.magnitude(20, 93), WithinRel(2048.0 / 4.0, 0.1));
}

TEST_CASE("STFT edge frames use reflect padding", "[novelty]") {
  AudioBuffer a;
  a.sample_rate = 22050.0;
  a.samples.assign(4096, 0.0F);
  a.samples[1] = 1.0F;
  const Spectrogram s = stft_magnitude(a);
  // The reflected copy of sample 1 lands at index -1, so frame 0 sees two impulses.
  const double dc = s.magnitude(0, 0);
  const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * 1023.0 / 2048.0);
  const double w2 = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * 1025.0 / 2048.0);
  CHECK_THAT(dc, WithinRel(w + w2, 1e-5));
}

TEST_CASE("novelty is normalized and nonnegative", "[novelty]") {
  const NoveltyCurve n = compute_novelty(synth_click_track(100.0, 10.0));
  float peak = 0.0F;
  for (float v : n.values) {
    REQUIRE(v >= 0.0F);
    peak = std::max(peak, v);
  }
  CHECK(peak == 1.0F);
  CHECK(n.values[0] == 0.0F);
}

TEST_CASE("novelty peaks recur at the beat period", "[novelty]") {
  const NoveltyCurve n = compute_novelty(synth_click_track(120.0, 10.0));
  std::vector<std::size_t> peaks;
  for (std::size_t i = 1; i + 1 < n.size(); ++i) {
    if (n.values[i] > 0.5F && n.values[i] >= n.values[i - 1] && n.values[i] > n.values[i + 1]) peaks.push_back(i);
  }
  REQUIRE(peaks.size() >= 18);
  for (std::size_t i = 1; i < peaks.size(); ++i) {
    const auto gap = peaks[i] - peaks[i - 1];
    CHECK((gap == 21 || gap == 22));
  }
}

TEST_CASE("silence gives an all-zero novelty curve", "[novelty]") {
  AudioBuffer a;
  a.sample_rate = 22050.0;
  a.samples.assign(22050, 0.0F);
  for (float v : compute_novelty(a).values) REQUIRE(v == 0.0F);
}

TEST_CASE("novelty error paths", "[novelty]") {
  AudioBuffer a;
  a.sample_rate = 22050.0;
  a.samples.assign(1000, 0.0F);
  CHECK_THROWS_AS(stft_magnitude(a), DataError);
  Spectrogram bad;
  bad.frame_rate = 43.0;
  bad.magnitude = MatrixRF::Constant(3, 4, -1.0F);
  CHECK_THROWS_AS(spectral_flux(bad), ContractError);
  NoveltyConfig cfg;
  cfg.hop = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("novelty CSV dump", "[novelty]") {
  testing::TempDir dir("nov");
  NoveltyCurve n;
  n.frame_rate = 43.0;
  n.values = {0.0F, 0.5F, 1.0F};
  write_novelty_csv(dir / "n.csv", n);
  CHECK(testing::slurp(dir / "n.csv").rfind("frame_index,value\n0,0\n1,0.5\n2,1", 0) == 0);
}
