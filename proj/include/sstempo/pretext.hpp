#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "sstempo/nn.hpp"
#include "sstempo/tempogram.hpp"

namespace sstempo {

inline constexpr int kSliceLength = 128;
inline constexpr int kMinShift = 11;
inline constexpr int kMaxShift = 18;

/// Two slices of one tempogram frame, offset vertically by k1 and k2 bins.
struct SlicePair {
  std::vector<float> x1;
  std::vector<float> x2;
  int k1 = kMinShift;
  int k2 = kMinShift;
  Eigen::Index frame_index = 0;
};

/// Copy of bins [shift, shift + length) of one frame.
std::vector<float> extract_slice(const LogTempogram& tg, Eigen::Index frame, int shift, int length = kSliceLength);

SlicePair sample_pair(const LogTempogram& tg, Eigen::Index frame, std::mt19937_64& rng,
                      int length = kSliceLength);

/// 1 / (Q log2(t_max / t_min)): output units per tempogram bin.
double sigma_of(double t_min, double t_max, int bins_per_octave);

struct LossConfig {
  double sigma = 1.0 / 120.0;
  double delta = 0.25;
  double w_t = 1e4;
  double w_r = 1.0;
  double t_min = 30.0;
  double t_max = 240.0;
  int bins_per_octave = 40;

  /// sigma derived from the tempo range.
  static LossConfig for_range(double t_min, double t_max, int bins_per_octave = 40);
  void validate() const;
};

/// |(t1 - t2) - sigma (k2 - k1)|
double tempo_error(double t1, double t2, int k1, int k2, double sigma);

double huber(double x, double delta = 0.25);
/// dh/dx; at |x| = delta the quadratic branch is used.
double huber_grad(double x, double delta = 0.25);

struct TempoItem {
  double t1 = 0.0;
  double t2 = 0.0;
  int k1 = kMinShift;
  int k2 = kMinShift;
};

/// Mean Huber tempo error over the batch.
double loss_t(std::span<const TempoItem> batch, const LossConfig& cfg);

/// (1/T) sum over items of ||x1 - x1_hat||^2 + ||x2 - x2_hat||^2, with each
/// matrix holding one item per column.
template <typename T>
double loss_r(const nn::Mat<T>& x1, const nn::Mat<T>& x1_hat, const nn::Mat<T>& x2, const nn::Mat<T>& x2_hat);

double total_loss(double l_t, double l_r, const LossConfig& cfg);

struct LossValues {
  double l_t = 0.0;
  double l_r = 0.0;
  double total = 0.0;
};

/// Forward both branches of a batch through shared weights (x1 | x2 stacked
/// column-wise), return the combined loss and accumulate its gradient.
template <typename T>
LossValues pretext_loss_and_grad(const nn::ModelParams<T>& p, const nn::Mat<T>& x1, const nn::Mat<T>& x2,
                                 std::span<const int> k1, std::span<const int> k2, const LossConfig& cfg,
                                 nn::ModelParams<T>* grads);

struct TrainConfig {
  int batch_size = 64;
  int epochs = 15;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  /// Use every frame_stride-th tempogram frame of each track (1 = all frames).
  int frame_stride = 1;

  void validate() const;
};

struct EpochLoss {
  int epoch = 0;
  double l_t = 0.0;
  double l_r = 0.0;
  double total = 0.0;
};

struct TrainResult {
  nn::ModelParams<float> params;
  nn::AdamState<float> adam;
  std::vector<EpochLoss> history;
};

struct TrainHooks {
  std::function<void(const EpochLoss&, const nn::ModelParams<float>&, const nn::AdamState<float>&)> on_epoch;
  /// Where to write parameters if a non-finite loss aborts training.
  std::filesystem::path dump_on_failure;
};

/// (track, frame) pairs visited in one epoch, in shuffled order.
std::vector<std::pair<std::size_t, Eigen::Index>> epoch_order(std::span<const LogTempogram> dataset, int frame_stride,
                                                              std::mt19937_64& rng);

TrainResult train(std::span<const LogTempogram> dataset, nn::ModelParams<float> params, const LossConfig& loss,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

void write_loss_history(const std::filesystem::path& path, std::span<const EpochLoss> history);

}  // namespace sstempo
