#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "sstempo/nn.hpp"

namespace sstempo {

/// Model parameters plus the architecture needed to rebuild them, stored as a
/// STEM1 tensor bundle. `extra` lands in the manifest metadata.
void save_model(const std::filesystem::path& path, const nn::ModelParams<float>& params,
                const std::map<std::string, std::string>& extra = {});

struct LoadedModel {
  nn::ModelParams<float> params;
  std::map<std::string, std::string> metadata;
};

LoadedModel load_model(const std::filesystem::path& path);

void save_adam_state(const std::filesystem::path& path, const nn::AdamState<float>& state,
                     const nn::ModelParams<float>& params);
nn::AdamState<float> load_adam_state(const std::filesystem::path& path, const nn::ModelParams<float>& params);

}  // namespace sstempo
