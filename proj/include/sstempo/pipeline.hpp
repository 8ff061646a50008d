#pragma once

#include <vector>

#include "sstempo/novelty.hpp"
#include "sstempo/synth.hpp"
#include "sstempo/tempogram.hpp"

namespace sstempo {

/// Audio -> novelty -> linear tempogram -> log tempogram.
struct PipelineConfig {
  NoveltyConfig novelty;
  double window_s = 10.0;
  std::vector<double> tempo_axis = default_tempo_axis();
  double t0 = kDefaultT0;
  int bins_per_octave = kDefaultBinsPerOctave;
  int num_bins = kDefaultLogBins;
  bool normalize = true;
};

LogTempogram log_tempogram_from_novelty(const NoveltyCurve& nov, TempogramKind kind, const PipelineConfig& cfg = {});
LogTempogram log_tempogram_from_audio(const AudioBuffer& audio, TempogramKind kind, const PipelineConfig& cfg = {});

}  // namespace sstempo
