#include "sstempo/pretext.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "sstempo/errors.hpp"
#include "sstempo/matrix_io.hpp"

namespace sstempo {

std::vector<float> extract_slice(const LogTempogram& tg, Eigen::Index frame, int shift, int length) {
  if (frame < 0 || frame >= tg.frames()) throw ContractError(fmt::format("frame {} out of range", frame));
  if (shift < 0 || shift + length > tg.num_bins()) {
    throw ConfigError(fmt::format("slice [{}, {}) exceeds the {} log bins", shift, shift + length, tg.num_bins()));
  }
  const auto row = tg.values.row(frame).segment(shift, length);
  return {row.begin(), row.end()};
}

SlicePair sample_pair(const LogTempogram& tg, Eigen::Index frame, std::mt19937_64& rng, int length) {
  if (tg.num_bins() < kMaxShift + length) {
    throw ConfigError(fmt::format("pretext slices need at least {} log bins, tempogram has {}", kMaxShift + length,
                                  tg.num_bins()));
  }
  std::uniform_int_distribution<int> shift(kMinShift, kMaxShift);
  SlicePair pair;
  pair.k1 = shift(rng);
  pair.k2 = shift(rng);
  pair.frame_index = frame;
  pair.x1 = extract_slice(tg, frame, pair.k1, length);
  pair.x2 = extract_slice(tg, frame, pair.k2, length);
  return pair;
}

double sigma_of(double t_min, double t_max, int bins_per_octave) {
  if (!(t_min > 0.0) || !(t_max > t_min)) throw ConfigError("sigma needs t_max > t_min > 0");
  if (bins_per_octave <= 0) throw ConfigError("sigma needs Q > 0");
  return 1.0 / (bins_per_octave * std::log2(t_max / t_min));
}

LossConfig LossConfig::for_range(double t_min, double t_max, int bins_per_octave) {
  LossConfig cfg;
  cfg.t_min = t_min;
  cfg.t_max = t_max;
  cfg.bins_per_octave = bins_per_octave;
  cfg.sigma = sigma_of(t_min, t_max, bins_per_octave);
  return cfg;
}

void LossConfig::validate() const {
  if (!(delta > 0.0)) throw ConfigError("Huber delta must be positive");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be positive");
  if (!(w_t >= 0.0) || !(w_r >= 0.0)) throw ConfigError("loss weights must be nonnegative");
}

double tempo_error(double t1, double t2, int k1, int k2, double sigma) {
  return std::abs((t1 - t2) - sigma * static_cast<double>(k2 - k1));
}

double huber(double x, double delta) {
  const double a = std::abs(x);
  if (a <= delta) return 0.5 * x * x;
  return 0.5 * delta * delta + delta * (a - delta);
}

double huber_grad(double x, double delta) {
  if (std::abs(x) <= delta) return x;
  return x > 0.0 ? delta : -delta;
}

double loss_t(std::span<const TempoItem> batch, const LossConfig& cfg) {
  if (batch.empty()) throw ContractError("loss_T needs a nonempty batch");
  double sum = 0.0;
  for (const auto& item : batch) sum += huber(tempo_error(item.t1, item.t2, item.k1, item.k2, cfg.sigma), cfg.delta);
  return sum / static_cast<double>(batch.size());
}

template <typename T>
double loss_r(const nn::Mat<T>& x1, const nn::Mat<T>& x1_hat, const nn::Mat<T>& x2, const nn::Mat<T>& x2_hat) {
  if (x1.rows() != x1_hat.rows() || x1.cols() != x1_hat.cols() || x2.rows() != x2_hat.rows() ||
      x2.cols() != x2_hat.cols() || x1.cols() != x2.cols()) {
    throw ContractError("loss_R: slice shapes differ");
  }
  if (x1.cols() == 0) throw ContractError("loss_R needs a nonempty batch");
  const double sum = (x1 - x1_hat).template cast<double>().squaredNorm() +
                     (x2 - x2_hat).template cast<double>().squaredNorm();
  return sum / static_cast<double>(x1.cols());
}

double total_loss(double l_t, double l_r, const LossConfig& cfg) { return cfg.w_t * l_t + cfg.w_r * l_r; }

template <typename T>
LossValues pretext_loss_and_grad(const nn::ModelParams<T>& p, const nn::Mat<T>& x1, const nn::Mat<T>& x2,
                                 std::span<const int> k1, std::span<const int> k2, const LossConfig& cfg,
                                 nn::ModelParams<T>* grads) {
  const Eigen::Index batch = x1.cols();
  if (batch == 0) throw ContractError("empty pretext batch");
  if (x2.cols() != batch || x1.rows() != x2.rows() || static_cast<Eigen::Index>(k1.size()) != batch ||
      static_cast<Eigen::Index>(k2.size()) != batch) {
    throw ContractError("pretext batch components disagree in size");
  }

  nn::Mat<T> x(x1.rows(), 2 * batch);
  x << x1, x2;
  const nn::ForwardCache<T> cache = nn::forward(p, x);

  std::vector<TempoItem> items(static_cast<std::size_t>(batch));
  nn::Mat<T> dt(1, 2 * batch);
  const double scale_t = cfg.w_t / static_cast<double>(batch);
  for (Eigen::Index i = 0; i < batch; ++i) {
    auto& item = items[static_cast<std::size_t>(i)];
    item.t1 = cache.t(0, i);
    item.t2 = cache.t(0, batch + i);
    item.k1 = k1[static_cast<std::size_t>(i)];
    item.k2 = k2[static_cast<std::size_t>(i)];
    const double signed_err = (item.t1 - item.t2) - cfg.sigma * static_cast<double>(item.k2 - item.k1);
    const double g = scale_t * huber_grad(signed_err, cfg.delta);
    dt(0, i) = static_cast<T>(g);
    dt(0, batch + i) = static_cast<T>(-g);
  }

  LossValues out;
  out.l_t = loss_t(items, cfg);
  out.l_r = loss_r<T>(x1, cache.xhat.leftCols(batch), x2, cache.xhat.rightCols(batch));
  out.total = total_loss(out.l_t, out.l_r, cfg);

  if (grads != nullptr) {
    const nn::Mat<T> dxhat = static_cast<T>(2.0 * cfg.w_r / static_cast<double>(batch)) * (cache.xhat - x);
    nn::backward(p, cache, dxhat, dt, *grads);
  }
  return out;
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch size must be at least 2");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be finite and nonnegative");
  if (frame_stride < 1) throw ConfigError("frame stride must be at least 1");
}

std::vector<std::pair<std::size_t, Eigen::Index>> epoch_order(std::span<const LogTempogram> dataset, int frame_stride,
                                                              std::mt19937_64& rng) {
  std::vector<std::pair<std::size_t, Eigen::Index>> order;
  for (std::size_t t = 0; t < dataset.size(); ++t) {
    for (Eigen::Index f = 0; f < dataset[t].frames(); f += frame_stride) order.emplace_back(t, f);
  }
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

TrainResult train(std::span<const LogTempogram> dataset, nn::ModelParams<float> params, const LossConfig& loss,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  loss.validate();
  if (dataset.empty()) throw DataError("training dataset is empty");
  const auto& ref = dataset.front();
  for (const auto& tg : dataset) {
    if (tg.num_bins() != ref.num_bins() || tg.t0 != ref.t0 || tg.bins_per_octave != ref.bins_per_octave) {
      throw ConfigError("all training tempograms must share t0, Q and bin count");
    }
  }
  const int len = params.config.encoder.input_len;
  if (ref.num_bins() < kMaxShift + len) {
    throw ConfigError(fmt::format("training needs at least {} log bins", kMaxShift + len));
  }

  TrainResult result{std::move(params), {}, {}};
  nn::AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  result.adam = nn::AdamState<float>::for_params(result.params, adam_cfg);
  nn::ModelParams<float> grads = result.params.zeros_like();

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> shift(kMinShift, kMaxShift);
  nn::Mat<float> x1;
  nn::Mat<float> x2;
  std::vector<int> k1;
  std::vector<int> k2;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = epoch_order(dataset, cfg.frame_stride, rng);
    if (order.empty()) throw DataError("training dataset has no frames");
    EpochLoss sums{epoch, 0.0, 0.0, 0.0};
    std::size_t batches = 0;

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const auto n = static_cast<Eigen::Index>(std::min<std::size_t>(cfg.batch_size, order.size() - start));
      x1.resize(len, n);
      x2.resize(len, n);
      k1.resize(static_cast<std::size_t>(n));
      k2.resize(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto [track, frame] = order[start + static_cast<std::size_t>(i)];
        const auto& row = dataset[track].values.row(frame);
        const int a = shift(rng);
        const int b = shift(rng);
        k1[static_cast<std::size_t>(i)] = a;
        k2[static_cast<std::size_t>(i)] = b;
        x1.col(i) = row.segment(a, len).transpose();
        x2.col(i) = row.segment(b, len).transpose();
      }

      grads.set_zero();
      const LossValues lv = pretext_loss_and_grad<float>(result.params, x1, x2, k1, k2, loss, &grads);
      if (!std::isfinite(lv.total) || !grads.all_finite()) {
        if (!hooks.dump_on_failure.empty()) {
          TensorBundle dump;
          for (std::size_t i = 0; i < result.params.size(); ++i) {
            dump.tensors.push_back({result.params.names[i], result.params.tensors[i]});
          }
          dump.metadata["epoch"] = std::to_string(epoch);
          dump.metadata["batch"] = std::to_string(batches);
          dump.metadata["loss_T"] = fmt::format("{}", lv.l_t);
          dump.metadata["loss_R"] = fmt::format("{}", lv.l_r);
          write_bundle(hooks.dump_on_failure, dump);
        }
        throw NumericalError(fmt::format("non-finite loss at epoch {} batch {} (L_T={}, L_R={})", epoch, batches,
                                         lv.l_t, lv.l_r));
      }
      nn::adam_step(result.params, grads, result.adam);
      sums.l_t += lv.l_t;
      sums.l_r += lv.l_r;
      sums.total += lv.total;
      ++batches;
    }

    const auto denom = static_cast<double>(batches);
    EpochLoss mean{epoch, sums.l_t / denom, sums.l_r / denom, sums.total / denom};
    result.history.push_back(mean);
    if (hooks.on_epoch) hooks.on_epoch(mean, result.params, result.adam);
  }
  return result;
}

void write_loss_history(const std::filesystem::path& path, std::span<const EpochLoss> history) {
  std::ofstream os(path);
  if (!os) throw_io_error("cannot write loss history", path.string());
  os << "epoch,loss_T,loss_R,loss_total\n";
  for (const auto& e : history) os << fmt::format("{},{:.9g},{:.9g},{:.9g}\n", e.epoch, e.l_t, e.l_r, e.total);
}

template double loss_r<float>(const nn::Mat<float>&, const nn::Mat<float>&, const nn::Mat<float>&,
                              const nn::Mat<float>&);
template double loss_r<double>(const nn::Mat<double>&, const nn::Mat<double>&, const nn::Mat<double>&,
                               const nn::Mat<double>&);
template LossValues pretext_loss_and_grad<float>(const nn::ModelParams<float>&, const nn::Mat<float>&,
                                                 const nn::Mat<float>&, std::span<const int>, std::span<const int>,
                                                 const LossConfig&, nn::ModelParams<float>*);
template LossValues pretext_loss_and_grad<double>(const nn::ModelParams<double>&, const nn::Mat<double>&,
                                                  const nn::Mat<double>&, std::span<const int>, std::span<const int>,
                                                  const LossConfig&, nn::ModelParams<double>*);

}  // namespace sstempo
