#pragma once

// Central-difference gradient checks. The analytic gradient comes from the
// 32-bit kernels; the numeric reference evaluates the same kernels in 64-bit
// so the oracle itself carries no single-precision cancellation error.

#include "vise/nn/layers.hpp"
#include "vise/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace vise::testing {

using nn::BasicTensor;
using nn::Shape;

constexpr double kFdStep = 1e-3;

inline BasicTensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  BasicTensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

/// Values with |v| in [gap, 1], random sign: keeps ReLU away from its kink.
inline BasicTensor<double> kink_free_tensor(Shape shape, Rng& rng, double gap = 0.05) {
  BasicTensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(gap, 1.0);
  return t;
}

/// Loss = sum(r * f(x)); the numeric gradient of one argument.
inline BasicTensor<double> numeric_gradient(const std::function<BasicTensor<double>(const BasicTensor<double>&)>& f,
                                            const BasicTensor<double>& x, const BasicTensor<double>& r,
                                            double eps = kFdStep) {
  BasicTensor<double> g(x.shape());
  BasicTensor<double> probe = x;
  auto loss = [&](const BasicTensor<double>& in) {
    const auto y = f(in);
    double s = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) s += r[i] * y[i];
    return s;
  };
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double keep = probe[i];
    probe[i] = keep + eps;
    const double up = loss(probe);
    probe[i] = keep - eps;
    const double down = loss(probe);
    probe[i] = keep;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

/// Largest elementwise |a - n| / max(|a|, |n|, 1e-3 * max|n|). The floor
/// judges entries that are near zero against the tensor's own scale.
inline double max_relative_error(const BasicTensor<float>& analytic, const BasicTensor<double>& numeric) {
  double scale = 0.0;
  for (double v : numeric.values()) scale = std::max(scale, std::abs(v));
  const double floor = std::max(1e-3 * scale, 1e-12);
  double worst = 0.0;
  for (std::size_t i = 0; i < numeric.numel(); ++i) {
    const double a = analytic[i];
    const double n = numeric[i];
    worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor}));
  }
  return worst;
}

struct GradCheck {
  std::string layer;
  double max_error = 0.0;
};

inline BasicTensor<float> to_float(const BasicTensor<double>& t) { return t.cast<float>(); }

/// Random 2x3x6x6 input, 4x3x3x3 kernel: input, weight and bias gradients.
inline double conv_check(std::uint64_t seed) {
  Rng rng(seed);
  const auto x = random_tensor({2, 3, 6, 6}, rng);
  const auto w = random_tensor({4, 3, 3, 3}, rng);
  const auto b = random_tensor({4}, rng);
  const auto r = random_tensor({2, 4, 6, 6}, rng);
  const auto g = nn::conv2d_backward(to_float(x), to_float(w), to_float(r));
  double worst = 0.0;
  worst = std::max(worst, max_relative_error(g.input, numeric_gradient(
                                                          [&](const auto& in) { return nn::conv2d_forward(in, w, b); }, x, r)));
  worst = std::max(worst, max_relative_error(g.weight, numeric_gradient(
                                                           [&](const auto& in) { return nn::conv2d_forward(x, in, b); }, w, r)));
  worst = std::max(worst, max_relative_error(g.bias, numeric_gradient(
                                                         [&](const auto& in) { return nn::conv2d_forward(x, w, in); }, b, r)));
  return worst;
}

/// Train-mode batch norm on 4x3x4x4: input, gamma and beta gradients.
inline double batchnorm_check(std::uint64_t seed) {
  Rng rng(seed);
  const auto x = random_tensor({4, 3, 4, 4}, rng, -2.0, 2.0);
  const auto gamma = random_tensor({3}, rng, 0.5, 1.5);
  const auto beta = random_tensor({3}, rng);
  const auto r = random_tensor({4, 3, 4, 4}, rng);
  auto forward = [](const BasicTensor<double>& in, const BasicTensor<double>& ga, const BasicTensor<double>& be) {
    BasicTensor<double> rm({in.dim(1)}), rv({in.dim(1)}, 1.0);
    return nn::batchnorm2d_forward(in, ga, be, rm, rv, nn::Mode::Train, static_cast<nn::BatchNormCache<double>*>(nullptr));
  };
  nn::Tensor rm({3}), rv({3}, 1.0f);
  nn::BatchNormCache<float> cache;
  nn::batchnorm2d_forward(to_float(x), to_float(gamma), to_float(beta), rm, rv, nn::Mode::Train, &cache);
  const auto g = nn::batchnorm2d_backward(cache, to_float(gamma), to_float(r));
  double worst = 0.0;
  worst = std::max(worst, max_relative_error(g.input, numeric_gradient([&](const auto& in) { return forward(in, gamma, beta); }, x, r)));
  worst = std::max(worst, max_relative_error(g.gamma, numeric_gradient([&](const auto& in) { return forward(x, in, beta); }, gamma, r)));
  worst = std::max(worst, max_relative_error(g.beta, numeric_gradient([&](const auto& in) { return forward(x, gamma, in); }, beta, r)));
  return worst;
}

inline double relu_check(std::uint64_t seed) {
  Rng rng(seed);
  const auto x = kink_free_tensor({2, 3, 5, 5}, rng);
  const auto r = random_tensor(x.shape(), rng);
  const auto g = nn::relu_backward(to_float(x), to_float(r));
  return max_relative_error(g, numeric_gradient([](const auto& in) { return nn::relu_forward(in); }, x, r));
}

/// Each 2x2 window gets a unique maximum at least 0.05 above the rest, so
/// no finite-difference probe can swap the argmax.
inline double maxpool_check(std::uint64_t seed) {
  Rng rng(seed);
  BasicTensor<double> x({2, 3, 6, 6});
  for (std::size_t nc = 0; nc < 6; ++nc) {
    for (std::size_t wy = 0; wy < 3; ++wy) {
      for (std::size_t wx = 0; wx < 3; ++wx) {
        const std::size_t winner = rng.below(4);
        const double top = rng.uniform(0.5, 1.0);
        for (std::size_t k = 0; k < 4; ++k) {
          const std::size_t idx = nc * 36 + (2 * wy + k / 2) * 6 + 2 * wx + k % 2;
          x[idx] = k == winner ? top : rng.uniform(-1.0, top - 0.05);
        }
      }
    }
  }
  const auto r = random_tensor({2, 3, 3, 3}, rng);
  std::vector<std::size_t> argmax;
  nn::maxpool2d_forward(to_float(x), &argmax);
  const auto g = nn::maxpool2d_backward(x.shape(), argmax, to_float(r));
  return max_relative_error(
      g, numeric_gradient([](const auto& in) { return nn::maxpool2d_forward<double>(in, nullptr); }, x, r));
}

inline double linear_check(std::uint64_t seed) {
  Rng rng(seed);
  const auto x = random_tensor({3, 7}, rng);
  const auto w = random_tensor({5, 7}, rng);
  const auto b = random_tensor({5}, rng);
  const auto r = random_tensor({3, 5}, rng);
  const auto g = nn::linear_backward(to_float(x), to_float(w), to_float(r));
  double worst = 0.0;
  worst = std::max(worst, max_relative_error(g.input, numeric_gradient([&](const auto& in) { return nn::linear_forward(in, w, b); }, x, r)));
  worst = std::max(worst, max_relative_error(g.weight, numeric_gradient([&](const auto& in) { return nn::linear_forward(x, in, b); }, w, r)));
  worst = std::max(worst, max_relative_error(g.bias, numeric_gradient([&](const auto& in) { return nn::linear_forward(x, w, in); }, b, r)));
  return worst;
}

/// Predictions kept at least 0.05 away from their targets (no ties).
inline double l1_check(std::uint64_t seed) {
  Rng rng(seed);
  const auto target = random_tensor({4, 9}, rng);
  BasicTensor<double> pred(target.shape());
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    pred[i] = target[i] + (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.05, 1.0);
  }
  const BasicTensor<double> r({1}, 1.0);
  const auto g = nn::l1_loss_backward(to_float(pred), to_float(target));
  return max_relative_error(g, numeric_gradient(
                                   [&](const auto& in) { return BasicTensor<double>({1}, nn::l1_loss(in, target)); },
                                   pred, r));
}

inline std::vector<GradCheck> run_gradient_suite(int trials, std::uint64_t seed) {
  std::vector<std::pair<std::string, double (*)(std::uint64_t)>> layers{
      {"conv2d", conv_check}, {"batchnorm2d", batchnorm_check}, {"relu", relu_check},
      {"maxpool2d", maxpool_check}, {"linear", linear_check},     {"l1_loss", l1_check}};
  std::vector<GradCheck> out;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    GradCheck c{layers[li].first, 0.0};
    for (int t = 0; t < trials; ++t) {
      c.max_error = std::max(c.max_error, layers[li].second(stream_seed(seed, static_cast<std::uint64_t>(t), li)));
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace vise::testing
