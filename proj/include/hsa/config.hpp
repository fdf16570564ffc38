#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "hsa/generator.hpp"
#include "hsa/model.hpp"
#include "hsa/tasks.hpp"

namespace hsa {

/// `key=value` lines; blank lines and lines starting with '#' are ignored.
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Every setting a CLI run can take from a config file.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  GeneratorOptions generator;
  double train_fraction = 0.8;
  int bin_width = 20;
  std::uint64_t seed = 7;

  /// Copies the seed into the model, trainer and generator.
  void set_seed(std::uint64_t s);
};

/// Applies recognised keys on top of `base`; unknown keys or bad values throw InvalidConfig.
RunConfig apply_config(RunConfig base, const std::map<std::string, std::string>& values);
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// key=value text that apply_config reads back to the same settings.
std::string format_config(const RunConfig& config);

}  // namespace hsa
