#pragma once

#include "vise/nn/layers.hpp"
#include "vise/nn/tensor.hpp"
#include "vise/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace vise::nn {

struct NetworkSpec {
  int input_size = 256;
  int input_channels = 2;
  std::vector<int> conv_channels{6, 16, 32, 64, 128};
  int fc_hidden = 1000;
  int output_size = 6;
  double dropout_p = 0.5;

  void validate() const;
  /// Spatial size after all pooling stages.
  int final_spatial() const;
  /// Width of the first fully connected layer's input.
  std::size_t flatten_size() const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

/// Truncated VGG regressor: five blocks of conv3x3 -> batchnorm -> ReLU ->
/// maxpool2, then flatten -> linear -> ReLU -> dropout -> linear.
class VggSBn {
public:
  /// Kaiming-uniform (fan-in) weights, zero biases, gamma 1, beta 0,
  /// running mean 0, running variance 1. Deterministic in `seed`.
  static VggSBn build(const NetworkSpec& spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }

  /// Inference-mode forward. Reads parameters only, so concurrent calls are safe.
  Tensor infer(const Tensor& input) const;

  /// Train-mode forward that caches activations for backward().
  Tensor forward_train(const Tensor& input, Rng& dropout_rng);

  /// Backpropagates d(loss)/d(output) through the last forward_train call,
  /// overwriting the parameter gradients.
  void backward(const Tensor& grad_output);

  /// Trainable parameters in a fixed order, with matching gradients.
  std::vector<NamedTensor> parameters();
  std::vector<NamedTensor> gradients();
  /// Batch-norm running statistics.
  std::vector<NamedTensor> buffers();
  /// parameters() followed by buffers(); the serialization order.
  std::vector<NamedTensor> state();

  std::size_t parameter_count() const;

  /// Counts trainable parameters from the spec alone.
  static std::size_t parameter_count(const NetworkSpec& spec);

private:
  struct Block {
    Tensor weight, bias, gamma, beta, running_mean, running_var;
    Tensor grad_weight, grad_bias, grad_gamma, grad_beta;
    // Train-mode caches.
    Tensor input, bn_out;
    BatchNormCache<float> bn_cache;
    std::vector<std::size_t> argmax;
  };

  void check_input(const Tensor& input) const;

  NetworkSpec spec_;
  std::vector<Block> blocks_;
  Tensor fc1_weight_, fc1_bias_, fc2_weight_, fc2_bias_;
  Tensor grad_fc1_weight_, grad_fc1_bias_, grad_fc2_weight_, grad_fc2_bias_;
  Tensor flat_, fc1_out_, fc2_in_;
  std::vector<float> dropout_mask_;
};

}  // namespace vise::nn
