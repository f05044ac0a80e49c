#pragma once

// Dataset generation from the two actuation patterns, dataset persistence,
// splitting, and the AdamW / L1 training loop.

#include "vise/geometry.hpp"
#include "vise/image.hpp"
#include "vise/imgproc.hpp"
#include "vise/nn/network.hpp"
#include "vise/nn/optim.hpp"
#include "vise/render.hpp"
#include "vise/serialize.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vise::training {

class TrainingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Unreadable or unwritable dataset directory.
class DatasetIoError : public TrainingError {
public:
  using TrainingError::TrainingError;
};

/// NaN or Inf in a loss or a parameter.
class NumericalError : public TrainingError {
public:
  using TrainingError::TrainingError;
};

enum class MotionMode { Circular, Random };

std::string to_string(MotionMode mode);
MotionMode motion_mode_from_string(const std::string& name);

/// How sample configurations are drawn.
///
/// Circular: section i holds curvature amplitude * pi / L_i and sweeps
/// phi_i(t) = 2 pi t / T_i, with t = index * time_step.
/// Random: per sample, curvature ~ U[0, kappa_max * pi / L_i] and
/// phi ~ U[0, 2 pi), drawn from a stream keyed by (seed, index).
struct MotionSpec {
  MotionMode mode = MotionMode::Circular;
  std::vector<double> section_lengths{110.0, 110.0, 115.0};
  std::vector<double> periods{100.0, 10.0, 1.0};  // seconds
  double amplitude = 0.6;                         // fraction of pi / L
  double kappa_max = 0.6;                         // fraction of pi / L
  double time_step = 0.04;                        // seconds

  void validate() const;
};

geometry::ArmConfiguration configuration_at(const MotionSpec& motion, std::size_t index, std::uint64_t seed);

struct LabelSpec {
  geometry::Representation representation = geometry::Representation::Points;
  std::size_t key_points = 3;  // Points only; Pcc uses one pair per section

  /// Output width for an arm with `sections` sections.
  std::size_t width(std::size_t sections) const;
};

geometry::ShapeLabel make_label(const geometry::ArmConfiguration& config, const LabelSpec& spec);

struct DatasetRecord {
  std::size_t id = 0;
  geometry::ArmConfiguration config;
  geometry::ShapeLabel label;
  std::array<ImageBuffer, 2> raw;    // rendered grayscale views
  std::array<ImageBuffer, 2> input;  // preprocessed binary views
};

struct GenerateSpec {
  render::SceneSpec scene;
  MotionSpec motion;
  imgproc::PreprocessSpec preprocess;
  LabelSpec label;
};

/// Records first_index .. first_index + count - 1. Each record depends only
/// on (spec, seed, index), so the result is independent of `jobs`.
std::vector<DatasetRecord> generate_dataset(const GenerateSpec& spec, std::size_t count, std::uint64_t seed,
                                            unsigned jobs = 1, std::size_t first_index = 0);

/// Writes manifest.jsonl, dataset.json and raw/ + input/ PGMs.
void write_dataset(const std::filesystem::path& dir, std::span<const DatasetRecord> records,
                   const GenerateSpec& spec, std::uint64_t seed);

struct LoadedDataset {
  GenerateSpec spec;
  std::uint64_t seed = 0;
  std::vector<DatasetRecord> records;
};

LoadedDataset read_dataset(const std::filesystem::path& dir);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle of 0..count-1, then a contiguous cut at
/// round(count * train_fraction).
Split split_indices(std::size_t count, double train_fraction, std::uint64_t seed);

template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_dataset(std::span<const T> records, double train_fraction,
                                                        std::uint64_t seed) {
  const Split s = split_indices(records.size(), train_fraction, seed);
  std::pair<std::vector<T>, std::vector<T>> out;
  for (auto i : s.train) out.first.push_back(records[i]);
  for (auto i : s.test) out.second.push_back(records[i]);
  return out;
}

struct TrainConfig {
  std::size_t batch_size = 64;
  int max_epochs = 450;
  double lr = 1e-4;
  double lr_decay = 0.5;
  int lr_decay_every = 200;
  double weight_decay = 0.01;
  std::optional<int> early_stop_patience = 50;  // nullopt disables early stopping
  double min_improvement = 1e-6;
  double train_fraction = 0.9;

  void validate() const;
};

/// lr * lr_decay ^ floor(epoch / lr_decay_every).
double lr_at(const TrainConfig& cfg, int epoch);

/// Network input: [N, 2, S, S] with {0, 255} mapped to {0, 1}.
nn::Tensor make_inputs(std::span<const DatasetRecord> records);
nn::Tensor make_inputs(std::span<const std::array<ImageBuffer, 2>> pairs);
/// Normalized targets [N, K].
nn::Tensor make_targets(std::span<const DatasetRecord> records);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains in place and leaves the network at its best-validation epoch.
/// Epoch e's shuffle and dropout masks derive from (seed, e) only.
TrainResult train(nn::VggSBn& net, const nn::Tensor& train_inputs, const nn::Tensor& train_targets,
                  const nn::Tensor& val_inputs, const nn::Tensor& val_targets, const TrainConfig& cfg,
                  std::uint64_t seed, const EpochCallback& on_epoch = {});

/// Mean L1 of inference-mode predictions, evaluated in fixed batches.
double evaluate_loss(const nn::VggSBn& net, const nn::Tensor& inputs, const nn::Tensor& targets);

/// Inference in fixed batches of 64, so a row's result does not depend on
/// how many rows are passed.
nn::Tensor predict(const nn::VggSBn& net, const nn::Tensor& inputs);

/// The learning-rate schedule alone, one record per epoch (losses zero).
std::vector<EpochRecord> schedule_dry_run(const TrainConfig& cfg);

std::string history_csv(std::span<const EpochRecord> history);

}  // namespace vise::training

namespace vise::training {
void to_json(Json& j, const MotionSpec& m);
void from_json(const Json& j, MotionSpec& m);
void to_json(Json& j, const LabelSpec& l);
void from_json(const Json& j, LabelSpec& l);
void to_json(Json& j, const TrainConfig& c);
void from_json(const Json& j, TrainConfig& c);
void to_json(Json& j, const GenerateSpec& g);
void from_json(const Json& j, GenerateSpec& g);
}  // namespace vise::training
