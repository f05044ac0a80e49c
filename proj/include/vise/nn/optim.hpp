#pragma once

#include "vise/nn/network.hpp"
#include "vise/nn/tensor.hpp"

#include <cstdint>
#include <vector>

namespace vise::nn {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// First/second moment estimates, one pair per parameter tensor.
struct AdamWState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;

  static AdamWState zeros_like(const std::vector<NamedTensor>& params);
};

/// One decoupled-weight-decay Adam update. `lr` overrides cfg.lr so a
/// schedule can drive it. Moments and step are advanced in place.
void adamw_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads, AdamWState& state,
                double lr, const AdamWConfig& cfg);

void adamw_step(const std::vector<NamedTensor>& params, const std::vector<NamedTensor>& grads, AdamWState& state,
                double lr, const AdamWConfig& cfg);

}  // namespace vise::nn
