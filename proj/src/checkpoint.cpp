#include "sstempo/checkpoint.hpp"

#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "sstempo/errors.hpp"
#include "sstempo/matrix_io.hpp"

namespace sstempo {
namespace {

std::string join(const std::vector<int>& v) { return fmt::format("{}", fmt::join(v, " ")); }

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::istringstream in(s);
  int v = 0;
  while (in >> v) out.push_back(v);
  if (!in.eof()) throw FormatError("malformed integer list: " + s);
  return out;
}

const std::string& require(const std::map<std::string, std::string>& meta, const std::string& key) {
  const auto it = meta.find(key);
  if (it == meta.end()) throw FormatError("checkpoint metadata lacks " + key);
  return it->second;
}

MatrixRF to_row_major(const nn::Mat<float>& m) { return m; }

}  // namespace

void save_model(const std::filesystem::path& path, const nn::ModelParams<float>& params,
                const std::map<std::string, std::string>& extra) {
  TensorBundle bundle;
  bundle.metadata = extra;
  const auto& c = params.config;
  bundle.metadata["format"] = "sstempo-model-1";
  bundle.metadata["d"] = std::to_string(c.encoder.d);
  bundle.metadata["input_len"] = std::to_string(c.encoder.input_len);
  bundle.metadata["kernel"] = std::to_string(c.encoder.kernel);
  bundle.metadata["stride"] = std::to_string(c.encoder.stride);
  bundle.metadata["encoder_mults"] = join(c.encoder.channel_mults);
  bundle.metadata["decoder_mults"] = join(c.decoder.channel_mults);
  bundle.metadata["head_units"] = join(c.encoder.head_units);
  for (std::size_t i = 0; i < params.size(); ++i) {
    bundle.tensors.push_back({params.names[i], to_row_major(params.tensors[i])});
  }
  write_bundle(path, bundle);
}

LoadedModel load_model(const std::filesystem::path& path) {
  TensorBundle bundle = read_bundle(path);
  const auto& meta = bundle.metadata;
  if (require(meta, "format") != "sstempo-model-1") throw FormatError("not a model checkpoint: " + path.string());

  nn::ModelConfig cfg;
  try {
    cfg.encoder.d = std::stoi(require(meta, "d"));
    cfg.encoder.input_len = std::stoi(require(meta, "input_len"));
    cfg.encoder.kernel = cfg.decoder.kernel = std::stoi(require(meta, "kernel"));
    cfg.encoder.stride = cfg.decoder.stride = std::stoi(require(meta, "stride"));
  } catch (const std::invalid_argument&) {
    throw FormatError("malformed model metadata in " + path.string());
  }
  cfg.encoder.channel_mults = split_ints(require(meta, "encoder_mults"));
  cfg.decoder.channel_mults = split_ints(require(meta, "decoder_mults"));
  cfg.encoder.head_units = split_ints(require(meta, "head_units"));

  LoadedModel out{nn::init_params<float>(cfg, 0), meta};
  for (std::size_t i = 0; i < out.params.size(); ++i) {
    const MatrixRF& m = bundle.at(out.params.names[i]);
    auto& dst = out.params.tensors[i];
    if (m.rows() != dst.rows() || m.cols() != dst.cols()) {
      throw FormatError(fmt::format("tensor {} has shape {}x{}, expected {}x{}", out.params.names[i], m.rows(),
                                    m.cols(), dst.rows(), dst.cols()));
    }
    dst = m;
  }
  if (!out.params.all_finite()) throw DataError("checkpoint contains non-finite parameters: " + path.string());
  return out;
}

void save_adam_state(const std::filesystem::path& path, const nn::AdamState<float>& state,
                     const nn::ModelParams<float>& params) {
  if (state.m.size() != params.size()) throw ContractError("optimizer state does not match parameters");
  TensorBundle bundle;
  bundle.metadata["format"] = "sstempo-adam-1";
  bundle.metadata["step"] = std::to_string(state.step);
  bundle.metadata["lr"] = fmt::format("{:.17g}", state.config.lr);
  bundle.metadata["beta1"] = fmt::format("{:.17g}", state.config.beta1);
  bundle.metadata["beta2"] = fmt::format("{:.17g}", state.config.beta2);
  bundle.metadata["epsilon"] = fmt::format("{:.17g}", state.config.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    bundle.tensors.push_back({"m:" + params.names[i], to_row_major(state.m[i])});
    bundle.tensors.push_back({"v:" + params.names[i], to_row_major(state.v[i])});
  }
  write_bundle(path, bundle);
}

nn::AdamState<float> load_adam_state(const std::filesystem::path& path, const nn::ModelParams<float>& params) {
  const TensorBundle bundle = read_bundle(path);
  const auto& meta = bundle.metadata;
  if (require(meta, "format") != "sstempo-adam-1") throw FormatError("not an optimizer state: " + path.string());
  nn::AdamConfig cfg;
  nn::AdamState<float> s;
  try {
    cfg.lr = std::stod(require(meta, "lr"));
    cfg.beta1 = std::stod(require(meta, "beta1"));
    cfg.beta2 = std::stod(require(meta, "beta2"));
    cfg.epsilon = std::stod(require(meta, "epsilon"));
    s = nn::AdamState<float>::for_params(params, cfg);
    s.step = std::stoll(require(meta, "step"));
  } catch (const std::invalid_argument&) {
    throw FormatError("malformed optimizer metadata in " + path.string());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const MatrixRF& m = bundle.at("m:" + params.names[i]);
    const MatrixRF& v = bundle.at("v:" + params.names[i]);
    if (m.rows() != s.m[i].rows() || m.cols() != s.m[i].cols() || v.rows() != s.v[i].rows() ||
        v.cols() != s.v[i].cols()) {
      throw FormatError("optimizer tensor shape mismatch for " + params.names[i]);
    }
    s.m[i] = m;
    s.v[i] = v;
  }
  return s;
}

}  // namespace sstempo
