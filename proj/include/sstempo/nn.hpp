#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace sstempo::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

struct EncoderConfig {
  int d = 64;
  std::vector<int> channel_mults{1, 2, 4, 8, 8, 8};
  int kernel = 3;
  int stride = 2;
  std::vector<int> head_units{48, 1};
  int input_len = 128;
};

struct DecoderConfig {
  std::vector<int> channel_mults{8, 8, 8, 4, 2, 1};
  int kernel = 3;
  int stride = 2;
};

/// Encoder/decoder architecture. The decoder mirrors the encoder's spatial
/// lengths, so both stacks need the same number of layers.
struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;

  static ModelConfig with_width(int d, int input_len = 128);

  void validate() const;
  /// Spatial length before every encoder layer plus the final one.
  std::vector<int> encoder_lengths() const;
  std::vector<int> encoder_channels() const;  ///< includes the single input channel
  std::vector<int> decoder_channels() const;  ///< includes the expansion channels
  int flat_size() const;
  int num_conv_layers() const { return static_cast<int>(encoder.channel_mults.size()); }
  int num_head_layers() const { return static_cast<int>(encoder.head_units.size()); }
};

/// Parameter tensors in a fixed order: encoder convs, tempo head, decoder
/// expansion, transposed convs, output projection. Each layer is a weight
/// matrix followed by a bias column.
template <typename T>
struct ModelParams {
  ModelConfig config;
  std::vector<std::string> names;
  std::vector<Mat<T>> tensors;

  std::size_t size() const { return tensors.size(); }
  std::size_t num_scalars() const;
  ModelParams zeros_like() const;
  void set_zero();
  bool all_finite() const;
  /// Fan-in used for He initialization of weight tensor i (0 for biases).
  int fan_in(std::size_t i) const;

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    out.config = config;
    out.names = names;
    for (const auto& t : tensors) out.tensors.push_back(t.template cast<U>());
    return out;
  }
};

/// He-uniform weights, zero biases.
template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Activations kept for backpropagation. Column n*L + i of a layer activation
/// holds all channels of sample n at position i.
template <typename T>
struct ForwardCache {
  Eigen::Index batch = 0;
  Mat<T> input;                       ///< input_len x batch
  std::vector<Mat<T>> conv_cols;      ///< im2col matrices
  std::vector<Mat<T>> conv_out;       ///< post-ReLU
  std::vector<Mat<T>> head_in;
  std::vector<Mat<T>> head_out;       ///< last entry is t (post-sigmoid)
  Mat<T> t;                           ///< 1 x batch
  Mat<T> expand_out;                  ///< flat x batch, post-ReLU
  std::vector<Mat<T>> tconv_in;
  std::vector<Mat<T>> tconv_out;      ///< post-ReLU
  Mat<T> xhat;                        ///< input_len x batch
};

/// Encoder output t in (0, 1), one per column of `x` (input_len x batch).
template <typename T>
Mat<T> encode(const ModelParams<T>& p, const Mat<T>& x, ForwardCache<T>* cache = nullptr);

/// Decoder reconstruction (input_len x batch) from a 1 x batch row of tempi.
template <typename T>
Mat<T> decode(const ModelParams<T>& p, const Mat<T>& t, ForwardCache<T>* cache = nullptr);

/// Encoder followed by decoder; fills the cache.
template <typename T>
ForwardCache<T> forward(const ModelParams<T>& p, const Mat<T>& x);

/// Accumulates into `grads` the gradient of a loss whose partial derivatives
/// with respect to the outputs are `dxhat` (input_len x batch) and `dt`
/// (1 x batch). The decoder path into t is included.
template <typename T>
void backward(const ModelParams<T>& p, const ForwardCache<T>& cache, const Mat<T>& dxhat, const Mat<T>& dt,
              ModelParams<T>& grads);

/// Single-sample conveniences.
template <typename T>
T encoder_forward(const ModelParams<T>& p, const Vec<T>& x);
template <typename T>
Vec<T> decoder_forward(const ModelParams<T>& p, T t);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::vector<Mat<T>> m;
  std::vector<Mat<T>> v;
  std::int64_t step = 0;

  static AdamState for_params(const ModelParams<T>& p, const AdamConfig& cfg = {});
};

/// Bias-corrected Adam update; increments the step counter.
template <typename T>
void adam_step(ModelParams<T>& p, const ModelParams<T>& grads, AdamState<T>& s);

}  // namespace sstempo::nn
