#pragma once

// Layer kernels with analytic gradients. Every function is instantiated for
// float (the training path) and double (used by finite-difference checks).

#include "vise/nn/tensor.hpp"
#include "vise/rng.hpp"

#include <cstddef>
#include <vector>

namespace vise::nn {

enum class Mode { Train, Infer };

// Convolution, stride 1, "same" zero padding (kernel / 2). Weight layout is
// [C_out, C_in, k, k] with odd k.

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias);

template <typename T>
struct Conv2dGrads {
  BasicTensor<T> input;  // empty when not requested
  BasicTensor<T> weight;
  BasicTensor<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& grad_output, bool need_input_grad = true);

// Batch normalization over (N, H, W) per channel.

struct BatchNormOptions {
  double momentum = 0.1;
  double eps = 1e-5;
};

template <typename T>
struct BatchNormCache {
  BasicTensor<T> normalized;
  std::vector<T> inv_std;
};

/// Train mode normalizes with batch statistics and updates the running
/// (biased) statistics; infer mode uses the running statistics. `cache` may
/// be null when no backward pass follows.
template <typename T>
BasicTensor<T> batchnorm2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                                   const BasicTensor<T>& beta, BasicTensor<T>& running_mean,
                                   BasicTensor<T>& running_var, Mode mode, BatchNormCache<T>* cache,
                                   const BatchNormOptions& options = {});

/// Infer-mode normalization with fixed statistics; reads its inputs only.
template <typename T>
BasicTensor<T> batchnorm2d_infer(const BasicTensor<T>& input, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                                 const BasicTensor<T>& running_mean, const BasicTensor<T>& running_var,
                                 double eps = 1e-5);

template <typename T>
struct BatchNormGrads {
  BasicTensor<T> input;
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
};

/// Backward of the train-mode forward that filled `cache`.
template <typename T>
BatchNormGrads<T> batchnorm2d_backward(const BatchNormCache<T>& cache, const BasicTensor<T>& gamma,
                                       const BasicTensor<T>& grad_output);

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output);

/// 2x2 max pooling, stride 2. `argmax` (optional) receives, per output
/// element, the flat input index of the first maximum in scan order.
template <typename T>
BasicTensor<T> maxpool2d_forward(const BasicTensor<T>& input, std::vector<std::size_t>* argmax);

template <typename T>
BasicTensor<T> maxpool2d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax,
                                  const BasicTensor<T>& grad_output);

/// input [N, F_in], weight [F_out, F_in], bias [F_out] -> [N, F_out].
template <typename T>
BasicTensor<T> linear_forward(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias);

template <typename T>
struct LinearGrads {
  BasicTensor<T> input;
  BasicTensor<T> weight;
  BasicTensor<T> bias;
};

template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& grad_output);

/// Inverted dropout. In train mode each unit is zeroed with probability p
/// and survivors are scaled by 1 / (1 - p); `mask` receives the per-unit
/// factor. Infer mode (or p == 0) is the identity.
template <typename T>
BasicTensor<T> dropout_forward(const BasicTensor<T>& input, double p, Mode mode, Rng& rng, std::vector<T>* mask);

template <typename T>
BasicTensor<T> dropout_backward(const std::vector<T>& mask, const BasicTensor<T>& grad_output);

/// Mean absolute error over all entries, accumulated in double.
template <typename T>
double l1_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target);

/// sign(pred - target) / numel, zero at exact ties.
template <typename T>
BasicTensor<T> l1_loss_backward(const BasicTensor<T>& pred, const BasicTensor<T>& target);

}  // namespace vise::nn
