#include "sstempo/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "sstempo/errors.hpp"

namespace sstempo::nn {
namespace {

struct ConvGeometry {
  int c_in = 0;
  int c_out = 0;
  int len_in = 0;   // the long side
  int len_out = 0;  // the short side
  int kernel = 0;
  int stride = 0;
  int pad_left = 0;
};

// "Same" zero padding: len_out = ceil(len_in / stride).
ConvGeometry same_geometry(int c_in, int c_out, int len_in, int kernel, int stride) {
  ConvGeometry g;
  g.c_in = c_in;
  g.c_out = c_out;
  g.len_in = len_in;
  g.len_out = (len_in + stride - 1) / stride;
  g.kernel = kernel;
  g.stride = stride;
  g.pad_left = std::max((g.len_out - 1) * stride + kernel - len_in, 0) / 2;
  return g;
}

struct Layout {
  int convs = 0;
  int heads = 0;
  std::size_t conv_w(int i) const { return 2 * static_cast<std::size_t>(i); }
  std::size_t head_w(int j) const { return 2 * static_cast<std::size_t>(convs + j); }
  std::size_t expand_w() const { return 2 * static_cast<std::size_t>(convs + heads); }
  std::size_t tconv_w(int i) const { return 2 * static_cast<std::size_t>(convs + heads + 1 + i); }
  std::size_t proj_w() const { return 2 * static_cast<std::size_t>(2 * convs + heads + 1); }
  std::size_t count() const { return proj_w() + 2; }
};

Layout layout_of(const ModelConfig& cfg) { return {cfg.num_conv_layers(), cfg.num_head_layers()}; }

ConvGeometry encoder_geometry(const ModelConfig& cfg, int i) {
  const auto ch = cfg.encoder_channels();
  const auto len = cfg.encoder_lengths();
  return same_geometry(ch[static_cast<std::size_t>(i)], ch[static_cast<std::size_t>(i) + 1],
                       len[static_cast<std::size_t>(i)], cfg.encoder.kernel, cfg.encoder.stride);
}

// Transposed conv i maps decoder channels i -> i + 1 and spatial length
// encoder_lengths[L - i] -> encoder_lengths[L - 1 - i]. It is the adjoint of a
// conv with c_in/c_out swapped, so geometry.c_in is the wide (output) side.
ConvGeometry decoder_geometry(const ModelConfig& cfg, int i) {
  const auto ch = cfg.decoder_channels();
  const auto len = cfg.encoder_lengths();
  const int layers = cfg.num_conv_layers();
  return same_geometry(ch[static_cast<std::size_t>(i) + 1], ch[static_cast<std::size_t>(i)],
                       len[static_cast<std::size_t>(layers - 1 - i)], cfg.decoder.kernel, cfg.decoder.stride);
}

// cols(k * C + c, n * len_out + o) = x(c, n * len_in + stride * o + k - pad_left), zero outside.
template <typename T>
Mat<T> im2col(const Mat<T>& x, const ConvGeometry& g, Eigen::Index batch) {
  Mat<T> cols = Mat<T>::Zero(static_cast<Eigen::Index>(g.kernel) * g.c_in, batch * g.len_out);
  for (Eigen::Index n = 0; n < batch; ++n) {
    for (int o = 0; o < g.len_out; ++o) {
      const Eigen::Index col = n * g.len_out + o;
      for (int k = 0; k < g.kernel; ++k) {
        const int src = g.stride * o + k - g.pad_left;
        if (src < 0 || src >= g.len_in) continue;
        cols.col(col).segment(static_cast<Eigen::Index>(k) * g.c_in, g.c_in) = x.col(n * g.len_in + src);
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatter-add columns back onto a c_in x (batch * len_in) map.
template <typename T>
Mat<T> col2im(const Mat<T>& cols, const ConvGeometry& g, Eigen::Index batch) {
  Mat<T> x = Mat<T>::Zero(g.c_in, batch * g.len_in);
  for (Eigen::Index n = 0; n < batch; ++n) {
    for (int o = 0; o < g.len_out; ++o) {
      const Eigen::Index col = n * g.len_out + o;
      for (int k = 0; k < g.kernel; ++k) {
        const int dst = g.stride * o + k - g.pad_left;
        if (dst < 0 || dst >= g.len_in) continue;
        x.col(n * g.len_in + dst) += cols.col(col).segment(static_cast<Eigen::Index>(k) * g.c_in, g.c_in);
      }
    }
  }
  return x;
}

template <typename T>
void relu_inplace(Mat<T>& m) {
  m = m.cwiseMax(T(0));
}

// Zeroes gradient entries where the post-ReLU activation is not positive.
template <typename T>
Mat<T> relu_mask(const Mat<T>& grad, const Mat<T>& activation) {
  return (activation.array() > T(0)).select(grad, T(0));
}

template <typename T>
T sigmoid(T z) {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

template <typename T>
void require_finite(const Mat<T>& m, const char* what) {
  if (!m.allFinite()) throw DataError(fmt::format("non-finite values in {}", what));
}

}  // namespace

ModelConfig ModelConfig::with_width(int d, int input_len) {
  ModelConfig cfg;
  cfg.encoder.d = d;
  cfg.encoder.input_len = input_len;
  return cfg;
}

void ModelConfig::validate() const {
  if (encoder.d < 1) throw ConfigError("encoder width d must be positive");
  if (encoder.input_len < 1) throw ConfigError("input length must be positive");
  if (encoder.kernel < 1 || encoder.stride < 1 || decoder.kernel < 1 || decoder.stride < 1) {
    throw ConfigError("kernel and stride must be positive");
  }
  if (encoder.kernel != decoder.kernel || encoder.stride != decoder.stride) {
    throw ConfigError("decoder must use the encoder's kernel and stride");
  }
  if (encoder.channel_mults.empty()) throw ConfigError("encoder needs at least one conv layer");
  if (decoder.channel_mults.size() != encoder.channel_mults.size()) {
    throw ConfigError("decoder must have as many layers as the encoder");
  }
  if (encoder.head_units.empty() || encoder.head_units.back() != 1) {
    throw ConfigError("tempo head must end in a single unit");
  }
  for (int m : encoder.channel_mults) {
    if (m < 1) throw ConfigError("channel multipliers must be positive");
  }
  for (int m : decoder.channel_mults) {
    if (m < 1) throw ConfigError("channel multipliers must be positive");
  }
  for (int u : encoder.head_units) {
    if (u < 1) throw ConfigError("head units must be positive");
  }
}

std::vector<int> ModelConfig::encoder_lengths() const {
  std::vector<int> len{encoder.input_len};
  for (std::size_t i = 0; i < encoder.channel_mults.size(); ++i) {
    len.push_back((len.back() + encoder.stride - 1) / encoder.stride);
  }
  return len;
}

std::vector<int> ModelConfig::encoder_channels() const {
  std::vector<int> ch{1};
  for (int m : encoder.channel_mults) ch.push_back(encoder.d * m);
  return ch;
}

std::vector<int> ModelConfig::decoder_channels() const {
  std::vector<int> ch{encoder_channels().back()};
  for (int m : decoder.channel_mults) ch.push_back(encoder.d * m);
  return ch;
}

int ModelConfig::flat_size() const { return encoder_channels().back() * encoder_lengths().back(); }

template <typename T>
std::size_t ModelParams<T>::num_scalars() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += static_cast<std::size_t>(t.size());
  return n;
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros_like() const {
  ModelParams out;
  out.config = config;
  out.names = names;
  for (const auto& t : tensors) out.tensors.push_back(Mat<T>::Zero(t.rows(), t.cols()));
  return out;
}

template <typename T>
void ModelParams<T>::set_zero() {
  for (auto& t : tensors) t.setZero();
}

template <typename T>
bool ModelParams<T>::all_finite() const {
  return std::all_of(tensors.begin(), tensors.end(), [](const Mat<T>& t) { return t.allFinite(); });
}

template <typename T>
int ModelParams<T>::fan_in(std::size_t i) const {
  if (i % 2 == 1) return 0;
  const Layout lay = layout_of(config);
  if (i == lay.expand_w()) return 1;
  for (int l = 0; l < config.num_conv_layers(); ++l) {
    if (i == lay.tconv_w(l)) return static_cast<int>(tensors[i].cols()) * config.decoder.kernel;
  }
  return static_cast<int>(tensors[i].cols());
}

template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams<T> p;
  p.config = cfg;
  const int k = cfg.encoder.kernel;
  auto add = [&p](std::string name, Eigen::Index rows, Eigen::Index cols) {
    p.names.push_back(std::move(name));
    p.tensors.push_back(Mat<T>::Zero(rows, cols));
  };

  for (int i = 0; i < cfg.num_conv_layers(); ++i) {
    const ConvGeometry g = encoder_geometry(cfg, i);
    add(fmt::format("enc{}.w", i), g.c_out, static_cast<Eigen::Index>(k) * g.c_in);
    add(fmt::format("enc{}.b", i), g.c_out, 1);
  }
  int in = cfg.flat_size();
  for (int j = 0; j < cfg.num_head_layers(); ++j) {
    const int units = cfg.encoder.head_units[static_cast<std::size_t>(j)];
    add(fmt::format("head{}.w", j), units, in);
    add(fmt::format("head{}.b", j), units, 1);
    in = units;
  }
  add("expand.w", cfg.flat_size(), 1);
  add("expand.b", cfg.flat_size(), 1);
  for (int i = 0; i < cfg.num_conv_layers(); ++i) {
    const ConvGeometry g = decoder_geometry(cfg, i);
    add(fmt::format("dec{}.w", i), static_cast<Eigen::Index>(k) * g.c_in, g.c_out);
    add(fmt::format("dec{}.b", i), g.c_in, 1);
  }
  add("proj.w", 1, cfg.decoder_channels().back());
  add("proj.b", 1, 1);

  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < p.tensors.size(); i += 2) {
    const double limit = std::sqrt(6.0 / p.fan_in(i));
    std::uniform_real_distribution<double> uni(-limit, limit);
    auto& w = p.tensors[i];
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = static_cast<T>(uni(rng));
    }
  }
  return p;
}

template <typename T>
Mat<T> encode(const ModelParams<T>& p, const Mat<T>& x, ForwardCache<T>* cache) {
  const ModelConfig& cfg = p.config;
  const Layout lay = layout_of(cfg);
  if (p.size() != lay.count()) throw ContractError("parameter set does not match its configuration");
  if (x.rows() != cfg.encoder.input_len) {
    throw ContractError(fmt::format("encoder expects {}-long slices, got {}", cfg.encoder.input_len, x.rows()));
  }
  require_finite(x, "encoder input");
  const Eigen::Index batch = x.cols();

  // x is input_len x batch; as a 1-channel map it is 1 x (batch * input_len).
  Mat<T> act = Eigen::Map<const Mat<T>>(x.data(), 1, batch * cfg.encoder.input_len);
  if (cache != nullptr) {
    cache->batch = batch;
    cache->input = x;
    cache->conv_cols.clear();
    cache->conv_out.clear();
    cache->head_in.clear();
    cache->head_out.clear();
  }
  for (int i = 0; i < cfg.num_conv_layers(); ++i) {
    const ConvGeometry g = encoder_geometry(cfg, i);
    Mat<T> cols = im2col(act, g, batch);
    act = p.tensors[lay.conv_w(i)] * cols;
    act.colwise() += p.tensors[lay.conv_w(i) + 1].col(0);
    relu_inplace(act);
    if (cache != nullptr) {
      cache->conv_cols.push_back(std::move(cols));
      cache->conv_out.push_back(act);
    }
  }

  // Position-major flatten: each sample's columns are contiguous.
  Mat<T> h = Eigen::Map<const Mat<T>>(act.data(), cfg.flat_size(), batch);
  for (int j = 0; j < cfg.num_head_layers(); ++j) {
    if (cache != nullptr) cache->head_in.push_back(h);
    Mat<T> z = p.tensors[lay.head_w(j)] * h;
    z.colwise() += p.tensors[lay.head_w(j) + 1].col(0);
    if (j + 1 < cfg.num_head_layers()) {
      relu_inplace(z);
    } else {
      z = z.unaryExpr([](T v) { return sigmoid(v); });
    }
    h = std::move(z);
    if (cache != nullptr) cache->head_out.push_back(h);
  }
  if (cache != nullptr) cache->t = h;
  return h;
}

// Skips the finiteness check so a diverged encoder surfaces as a non-finite loss.
template <typename T>
Mat<T> decode_unchecked(const ModelParams<T>& p, const Mat<T>& t, ForwardCache<T>* cache) {
  const ModelConfig& cfg = p.config;
  const Layout lay = layout_of(cfg);
  if (p.size() != lay.count()) throw ContractError("parameter set does not match its configuration");
  if (t.rows() != 1) throw ContractError("decoder expects a 1 x batch row of tempi");
  const Eigen::Index batch = t.cols();
  const auto lengths = cfg.encoder_lengths();

  Mat<T> e = p.tensors[lay.expand_w()] * t;
  e.colwise() += p.tensors[lay.expand_w() + 1].col(0);
  relu_inplace(e);
  if (cache != nullptr) {
    cache->expand_out = e;
    cache->tconv_in.clear();
    cache->tconv_out.clear();
  }

  Mat<T> act = Eigen::Map<const Mat<T>>(e.data(), cfg.decoder_channels().front(), batch * lengths.back());
  for (int i = 0; i < cfg.num_conv_layers(); ++i) {
    const ConvGeometry g = decoder_geometry(cfg, i);
    const Mat<T> cols = p.tensors[lay.tconv_w(i)] * act;
    Mat<T> out = col2im(cols, g, batch);
    out.colwise() += p.tensors[lay.tconv_w(i) + 1].col(0);
    relu_inplace(out);
    if (cache != nullptr) {
      cache->tconv_in.push_back(std::move(act));
      cache->tconv_out.push_back(out);
    }
    act = std::move(out);
  }

  Mat<T> proj = p.tensors[lay.proj_w()] * act;
  proj.array() += p.tensors[lay.proj_w() + 1](0, 0);
  Mat<T> xhat = Eigen::Map<const Mat<T>>(proj.data(), cfg.encoder.input_len, batch);
  if (cache != nullptr) cache->xhat = xhat;
  return xhat;
}

template <typename T>
Mat<T> decode(const ModelParams<T>& p, const Mat<T>& t, ForwardCache<T>* cache) {
  require_finite(t, "decoder input");
  return decode_unchecked(p, t, cache);
}

template <typename T>
ForwardCache<T> forward(const ModelParams<T>& p, const Mat<T>& x) {
  ForwardCache<T> cache;
  const Mat<T> t = encode(p, x, &cache);
  decode_unchecked(p, t, &cache);
  return cache;
}

template <typename T>
void backward(const ModelParams<T>& p, const ForwardCache<T>& cache, const Mat<T>& dxhat, const Mat<T>& dt,
              ModelParams<T>& grads) {
  const ModelConfig& cfg = p.config;
  const Layout lay = layout_of(cfg);
  const int layers = cfg.num_conv_layers();
  const int heads = cfg.num_head_layers();
  const Eigen::Index batch = cache.batch;
  const auto lengths = cfg.encoder_lengths();

  if (grads.size() != p.size()) throw ContractError("gradient set does not match parameters");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (grads.tensors[i].rows() != p.tensors[i].rows() || grads.tensors[i].cols() != p.tensors[i].cols()) {
      throw ContractError("gradient tensor shape mismatch for " + p.names[i]);
    }
  }
  if (static_cast<int>(cache.conv_out.size()) != layers || static_cast<int>(cache.tconv_out.size()) != layers ||
      static_cast<int>(cache.head_out.size()) != heads || cache.t.cols() != batch || cache.xhat.cols() != batch) {
    throw ContractError("forward cache does not match the model (run forward() first)");
  }
  for (int i = 0; i < layers; ++i) {
    if (cache.conv_out[static_cast<std::size_t>(i)].rows() != p.tensors[lay.conv_w(i)].rows()) {
      throw ContractError("forward cache was produced by a different model");
    }
  }
  if (dxhat.rows() != cfg.encoder.input_len || dxhat.cols() != batch) {
    throw ContractError("reconstruction gradient has the wrong shape");
  }
  if (dt.rows() != 1 || dt.cols() != batch) throw ContractError("tempo gradient has the wrong shape");

  // Output projection.
  const Mat<T>& dec_last = cache.tconv_out.back();
  const Eigen::Map<const Mat<T>> dproj(dxhat.data(), 1, batch * cfg.encoder.input_len);
  grads.tensors[lay.proj_w()].noalias() += dproj * dec_last.transpose();
  grads.tensors[lay.proj_w() + 1](0, 0) += dproj.sum();
  Mat<T> dact = p.tensors[lay.proj_w()].transpose() * dproj;

  // Transposed convolutions, last to first.
  for (int i = layers - 1; i >= 0; --i) {
    const ConvGeometry g = decoder_geometry(cfg, i);
    const Mat<T> dz = relu_mask(dact, cache.tconv_out[static_cast<std::size_t>(i)]);
    grads.tensors[lay.tconv_w(i) + 1].col(0) += dz.rowwise().sum();
    const Mat<T> dcols = im2col(dz, g, batch);
    grads.tensors[lay.tconv_w(i)].noalias() += dcols * cache.tconv_in[static_cast<std::size_t>(i)].transpose();
    dact = p.tensors[lay.tconv_w(i)].transpose() * dcols;
  }

  // Expansion: dact is channels x (batch * len); reinterpret as flat x batch.
  const Eigen::Map<const Mat<T>> dexp_raw(dact.data(), cfg.flat_size(), batch);
  const Mat<T> dexp = relu_mask(Mat<T>(dexp_raw), cache.expand_out);
  grads.tensors[lay.expand_w()].noalias() += dexp * cache.t.transpose();
  grads.tensors[lay.expand_w() + 1].col(0) += dexp.rowwise().sum();
  Mat<T> dh = dt + p.tensors[lay.expand_w()].transpose() * dexp;

  // Tempo head.
  for (int j = heads - 1; j >= 0; --j) {
    const Mat<T>& out = cache.head_out[static_cast<std::size_t>(j)];
    Mat<T> dz;
    if (j + 1 == heads) {
      dz = dh.cwiseProduct(out.unaryExpr([](T s) { return s * (T(1) - s); }));
    } else {
      dz = relu_mask(dh, out);
    }
    grads.tensors[lay.head_w(j)].noalias() += dz * cache.head_in[static_cast<std::size_t>(j)].transpose();
    grads.tensors[lay.head_w(j) + 1].col(0) += dz.rowwise().sum();
    dh = p.tensors[lay.head_w(j)].transpose() * dz;
  }

  // Encoder convolutions, last to first.
  dact = Eigen::Map<const Mat<T>>(dh.data(), cfg.encoder_channels().back(), batch * lengths.back());
  for (int i = layers - 1; i >= 0; --i) {
    const ConvGeometry g = encoder_geometry(cfg, i);
    const Mat<T> dz = relu_mask(dact, cache.conv_out[static_cast<std::size_t>(i)]);
    grads.tensors[lay.conv_w(i)].noalias() += dz * cache.conv_cols[static_cast<std::size_t>(i)].transpose();
    grads.tensors[lay.conv_w(i) + 1].col(0) += dz.rowwise().sum();
    if (i > 0) dact = col2im(Mat<T>(p.tensors[lay.conv_w(i)].transpose() * dz), g, batch);
  }
}

template <typename T>
T encoder_forward(const ModelParams<T>& p, const Vec<T>& x) {
  return encode(p, Mat<T>(x))(0, 0);
}

template <typename T>
Vec<T> decoder_forward(const ModelParams<T>& p, T t) {
  Mat<T> tm(1, 1);
  tm(0, 0) = t;
  return decode(p, tm).col(0);
}

template <typename T>
AdamState<T> AdamState<T>::for_params(const ModelParams<T>& p, const AdamConfig& cfg) {
  AdamState s;
  s.config = cfg;
  for (const auto& t : p.tensors) {
    s.m.push_back(Mat<T>::Zero(t.rows(), t.cols()));
    s.v.push_back(Mat<T>::Zero(t.rows(), t.cols()));
  }
  return s;
}

template <typename T>
void adam_step(ModelParams<T>& p, const ModelParams<T>& grads, AdamState<T>& s) {
  if (grads.size() != p.size() || s.m.size() != p.size() || s.v.size() != p.size()) {
    throw ContractError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& g = grads.tensors[i];
    if (g.rows() != p.tensors[i].rows() || g.cols() != p.tensors[i].cols() || s.m[i].rows() != g.rows() ||
        s.m[i].cols() != g.cols()) {
      throw ContractError("adam_step: shape mismatch for " + p.names[i]);
    }
  }
  ++s.step;
  const AdamConfig& c = s.config;
  const auto b1 = static_cast<T>(c.beta1);
  const auto b2 = static_cast<T>(c.beta2);
  const auto correction1 = static_cast<T>(1.0 - std::pow(c.beta1, static_cast<double>(s.step)));
  const auto correction2 = static_cast<T>(1.0 - std::pow(c.beta2, static_cast<double>(s.step)));
  const auto lr = static_cast<T>(c.lr);
  const auto eps = static_cast<T>(c.epsilon);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& g = grads.tensors[i];
    s.m[i] = b1 * s.m[i] + (T(1) - b1) * g;
    s.v[i] = b2 * s.v[i] + (T(1) - b2) * g.cwiseAbs2();
    p.tensors[i].array() -=
        lr * (s.m[i].array() / correction1) / ((s.v[i].array() / correction2).sqrt() + eps);
  }
}

#define SSTEMPO_INSTANTIATE(T)                                                                               \
  template struct ModelParams<T>;                                                                             \
  template struct AdamState<T>;                                                                               \
  template ModelParams<T> init_params<T>(const ModelConfig&, std::uint64_t);                                  \
  template Mat<T> encode<T>(const ModelParams<T>&, const Mat<T>&, ForwardCache<T>*);                          \
  template Mat<T> decode<T>(const ModelParams<T>&, const Mat<T>&, ForwardCache<T>*);                          \
  template ForwardCache<T> forward<T>(const ModelParams<T>&, const Mat<T>&);                                  \
  template void backward<T>(const ModelParams<T>&, const ForwardCache<T>&, const Mat<T>&, const Mat<T>&,      \
                            ModelParams<T>&);                                                                 \
  template T encoder_forward<T>(const ModelParams<T>&, const Vec<T>&);                                        \
  template Vec<T> decoder_forward<T>(const ModelParams<T>&, T);                                               \
  template void adam_step<T>(ModelParams<T>&, const ModelParams<T>&, AdamState<T>&);

SSTEMPO_INSTANTIATE(float)
SSTEMPO_INSTANTIATE(double)

#undef SSTEMPO_INSTANTIATE

}  // namespace sstempo::nn
