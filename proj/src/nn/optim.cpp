#include "vise/nn/optim.hpp"

#include <cmath>
#include <string>

namespace vise::nn {

AdamWState AdamWState::zeros_like(const std::vector<NamedTensor>& params) {
  AdamWState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor->shape());
    s.v.emplace_back(p.tensor->shape());
  }
  return s;
}

void adamw_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads, AdamWState& state,
                double lr, const AdamWConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size()) {
    throw NnError("adamw: parameter, gradient and state counts differ");
  }
  if (state.step < 0) throw NnError("adamw: negative step counter");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Shape& s = params[i]->shape();
    if (grads[i]->shape() != s || state.m[i].shape() != s || state.v[i].shape() != s) {
      throw NnError("adamw: shape mismatch for tensor " + std::to_string(i) + ": " + shape_string(s) + " vs " +
                    shape_string(grads[i]->shape()));
    }
  }
  const std::int64_t t = state.step + 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const double decay = lr * cfg.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    float* p = params[i]->data();
    const float* g = grads[i]->data();
    float* m = state.m[i].data();
    float* v = state.v[i].data();
    const std::size_t n = params[i]->numel();
    for (std::size_t j = 0; j < n; ++j) {
      const double gj = g[j];
      const double mj = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      const double vj = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      double pj = p[j];
      pj -= decay * pj;
      pj -= lr * (mj / c1) / (std::sqrt(vj / c2) + cfg.eps);
      p[j] = static_cast<float>(pj);
    }
  }
  state.step = t;
}

void adamw_step(const std::vector<NamedTensor>& params, const std::vector<NamedTensor>& grads, AdamWState& state,
                double lr, const AdamWConfig& cfg) {
  std::vector<Tensor*> p;
  std::vector<const Tensor*> g;
  for (const auto& x : params) p.push_back(x.tensor);
  for (const auto& x : grads) g.push_back(x.tensor);
  adamw_step(p, g, state, lr, cfg);
}

}  // namespace vise::nn
