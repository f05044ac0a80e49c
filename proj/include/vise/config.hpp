#pragma once

// The single JSON document that drives a run.

#include "vise/camera.hpp"
#include "vise/checkpoint.hpp"
#include "vise/nn/network.hpp"
#include "vise/serialize.hpp"
#include "vise/training.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>

namespace vise::config {

struct DatasetCounts {
  std::size_t train = 2000;
  std::size_t test = 200;
};

/// Optional default locations; relative entries resolve against the config
/// file's directory. Command-line flags take precedence.
struct RunPaths {
  std::optional<std::filesystem::path> train_data;
  std::optional<std::filesystem::path> test_data;
  std::optional<std::filesystem::path> weights;
  std::optional<std::filesystem::path> reports;
};

struct RunConfig {
  std::uint64_t seed = 0;  // required in the JSON form
  unsigned jobs = 1;
  training::GenerateSpec generate;  // scene, motion, preprocess, label
  nn::NetworkSpec network;
  training::TrainConfig train;
  DatasetCounts dataset;
  std::optional<checkpoint::Fiducial> fiducial;
  camera::AlignmentThreshold alignment;
  RunPaths paths;

  /// Cross-checks the parts: label width vs network output, preprocess
  /// size vs network input, crops inside the camera images.
  void validate() const;
};

/// Desk-scale setup: two 128 px cameras, 64 px network input, striped arm.
RunConfig desk_config(std::uint64_t seed = 7);

/// Checkpoint metadata for a network trained under `cfg`.
checkpoint::Metadata make_metadata(const RunConfig& cfg);

/// Reads, resolves paths, and validates. Throws ConfigError.
RunConfig load_config(const std::filesystem::path& path);

void to_json(Json& j, const RunConfig& c);
void from_json(const Json& j, RunConfig& c);

}  // namespace vise::config

namespace vise::checkpoint {
void to_json(Json& j, const Fiducial& f);
void from_json(const Json& j, Fiducial& f);
}  // namespace vise::checkpoint
