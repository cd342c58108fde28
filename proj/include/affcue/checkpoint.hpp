#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "affcue/config_io.hpp"
#include "affcue/model.hpp"

namespace affcue {

/// Model configuration, training settings, simulator settings and float32
/// parameters. Stored as a directory with config.json and params.bin.
struct Checkpoint {
  ModelConfig model;
  Json train = Json::object();
  SimConfig sim;
  std::vector<float> params;
  int epoch = 0;
  std::optional<double> eval_success;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
/// Throws CheckpointError on missing files, bad magic, or a parameter count
/// that does not fit the stored model config.
Checkpoint load_checkpoint(const std::filesystem::path& dir);
/// Additionally requires the stored model config to equal `expected`; the
/// error message lists every differing field.
Checkpoint load_checkpoint(const std::filesystem::path& dir, const ModelConfig& expected);

}  // namespace affcue
