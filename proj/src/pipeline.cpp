#include "sstempo/pipeline.hpp"

namespace sstempo {

LogTempogram log_tempogram_from_novelty(const NoveltyCurve& nov, TempogramKind kind, const PipelineConfig& cfg) {
  LogTempogram log =
      to_log_axis(compute_linear_tempogram(kind, nov, cfg.window_s, cfg.tempo_axis), cfg.t0, cfg.bins_per_octave,
                  cfg.num_bins);
  if (cfg.normalize) normalize_frames(log);
  return log;
}

LogTempogram log_tempogram_from_audio(const AudioBuffer& audio, TempogramKind kind, const PipelineConfig& cfg) {
  return log_tempogram_from_novelty(compute_novelty(audio, cfg.novelty), kind, cfg);
}

}  // namespace sstempo
