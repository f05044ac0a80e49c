#include "vise/nn/network.hpp"

#include <cmath>
#include <string>

namespace vise::nn {

namespace {

void kaiming_uniform(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(-bound, bound));
}

}  // namespace

void NetworkSpec::validate() const {
  if (input_size <= 0) throw NnError("input size must be positive");
  const int stages = static_cast<int>(conv_channels.size());
  if (stages == 0) throw NnError("network needs at least one conv block");
  if (input_size % (1 << stages) != 0) {
    throw NnError("input size " + std::to_string(input_size) + " is not divisible by 2^" + std::to_string(stages));
  }
  if (input_channels <= 0 || fc_hidden <= 0 || output_size <= 0) throw NnError("layer widths must be positive");
  for (int c : conv_channels) {
    if (c <= 0) throw NnError("conv channels must be positive");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw NnError("dropout probability must be in [0, 1)");
}

int NetworkSpec::final_spatial() const { return input_size >> conv_channels.size(); }

std::size_t NetworkSpec::flatten_size() const {
  const auto s = static_cast<std::size_t>(final_spatial());
  return s * s * static_cast<std::size_t>(conv_channels.back());
}

VggSBn VggSBn::build(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  VggSBn net;
  net.spec_ = spec;
  Rng rng(seed);
  std::size_t in = static_cast<std::size_t>(spec.input_channels);
  for (int channels : spec.conv_channels) {
    const auto out = static_cast<std::size_t>(channels);
    Block b;
    b.weight = Tensor({out, in, 3, 3});
    kaiming_uniform(b.weight, in * 9, rng);
    b.bias = Tensor({out});
    b.gamma = Tensor({out}, 1.0f);
    b.beta = Tensor({out});
    b.running_mean = Tensor({out});
    b.running_var = Tensor({out}, 1.0f);
    b.grad_weight = Tensor(b.weight.shape());
    b.grad_bias = Tensor({out});
    b.grad_gamma = Tensor({out});
    b.grad_beta = Tensor({out});
    net.blocks_.push_back(std::move(b));
    in = out;
  }
  const std::size_t flat = spec.flatten_size();
  const auto hidden = static_cast<std::size_t>(spec.fc_hidden);
  const auto outputs = static_cast<std::size_t>(spec.output_size);
  net.fc1_weight_ = Tensor({hidden, flat});
  kaiming_uniform(net.fc1_weight_, flat, rng);
  net.fc1_bias_ = Tensor({hidden});
  net.fc2_weight_ = Tensor({outputs, hidden});
  kaiming_uniform(net.fc2_weight_, hidden, rng);
  net.fc2_bias_ = Tensor({outputs});
  net.grad_fc1_weight_ = Tensor(net.fc1_weight_.shape());
  net.grad_fc1_bias_ = Tensor({hidden});
  net.grad_fc2_weight_ = Tensor(net.fc2_weight_.shape());
  net.grad_fc2_bias_ = Tensor({outputs});
  return net;
}

void VggSBn::check_input(const Tensor& input) const {
  const auto s = static_cast<std::size_t>(spec_.input_size);
  if (input.rank() != 4 || input.dim(1) != static_cast<std::size_t>(spec_.input_channels) || input.dim(2) != s ||
      input.dim(3) != s) {
    throw NnError("network input must be [N," + std::to_string(spec_.input_channels) + "," + std::to_string(s) +
                  "," + std::to_string(s) + "], got " + shape_string(input.shape()));
  }
}

Tensor VggSBn::infer(const Tensor& input) const {
  check_input(input);
  Tensor x = input;
  for (const auto& b : blocks_) {
    x = conv2d_forward(x, b.weight, b.bias);
    x = batchnorm2d_infer(x, b.gamma, b.beta, b.running_mean, b.running_var);
    x = relu_forward(x);
    x = maxpool2d_forward<float>(x, nullptr);
  }
  x = x.reshaped({x.dim(0), spec_.flatten_size()});
  x = relu_forward(linear_forward(x, fc1_weight_, fc1_bias_));
  return linear_forward(x, fc2_weight_, fc2_bias_);
}

Tensor VggSBn::forward_train(const Tensor& input, Rng& dropout_rng) {
  check_input(input);
  Tensor x = input;
  for (auto& b : blocks_) {
    b.input = x;
    x = conv2d_forward(x, b.weight, b.bias);
    b.bn_out = batchnorm2d_forward(x, b.gamma, b.beta, b.running_mean, b.running_var, Mode::Train, &b.bn_cache);
    x = relu_forward(b.bn_out);
    x = maxpool2d_forward(x, &b.argmax);
  }
  flat_ = x.reshaped({x.dim(0), spec_.flatten_size()});
  fc1_out_ = linear_forward(flat_, fc1_weight_, fc1_bias_);
  fc2_in_ = dropout_forward(relu_forward(fc1_out_), spec_.dropout_p, Mode::Train, dropout_rng, &dropout_mask_);
  return linear_forward(fc2_in_, fc2_weight_, fc2_bias_);
}

void VggSBn::backward(const Tensor& grad_output) {
  if (flat_.numel() == 0) throw NnError("backward called before forward_train");
  auto g2 = linear_backward(fc2_in_, fc2_weight_, grad_output);
  grad_fc2_weight_ = std::move(g2.weight);
  grad_fc2_bias_ = std::move(g2.bias);
  Tensor g = relu_backward(fc1_out_, dropout_backward(dropout_mask_, g2.input));
  auto g1 = linear_backward(flat_, fc1_weight_, g);
  grad_fc1_weight_ = std::move(g1.weight);
  grad_fc1_bias_ = std::move(g1.bias);

  const auto& last = blocks_.back();
  const std::size_t s = static_cast<std::size_t>(spec_.final_spatial());
  g = g1.input.reshaped({g1.input.dim(0), last.weight.dim(0), s, s});
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    auto& b = blocks_[i];
    g = maxpool2d_backward(b.bn_out.shape(), b.argmax, g);
    g = relu_backward(b.bn_out, g);
    auto gbn = batchnorm2d_backward(b.bn_cache, b.gamma, g);
    b.grad_gamma = std::move(gbn.gamma);
    b.grad_beta = std::move(gbn.beta);
    auto gc = conv2d_backward(b.input, b.weight, gbn.input, i > 0);
    b.grad_weight = std::move(gc.weight);
    b.grad_bias = std::move(gc.bias);
    g = std::move(gc.input);
  }
}

std::vector<NamedTensor> VggSBn::parameters() {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string p = "block" + std::to_string(i + 1) + ".";
    auto& b = blocks_[i];
    out.push_back({p + "conv.weight", &b.weight});
    out.push_back({p + "conv.bias", &b.bias});
    out.push_back({p + "bn.gamma", &b.gamma});
    out.push_back({p + "bn.beta", &b.beta});
  }
  out.push_back({"fc1.weight", &fc1_weight_});
  out.push_back({"fc1.bias", &fc1_bias_});
  out.push_back({"fc2.weight", &fc2_weight_});
  out.push_back({"fc2.bias", &fc2_bias_});
  return out;
}

std::vector<NamedTensor> VggSBn::gradients() {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string p = "block" + std::to_string(i + 1) + ".";
    auto& b = blocks_[i];
    out.push_back({p + "conv.weight", &b.grad_weight});
    out.push_back({p + "conv.bias", &b.grad_bias});
    out.push_back({p + "bn.gamma", &b.grad_gamma});
    out.push_back({p + "bn.beta", &b.grad_beta});
  }
  out.push_back({"fc1.weight", &grad_fc1_weight_});
  out.push_back({"fc1.bias", &grad_fc1_bias_});
  out.push_back({"fc2.weight", &grad_fc2_weight_});
  out.push_back({"fc2.bias", &grad_fc2_bias_});
  return out;
}

std::vector<NamedTensor> VggSBn::buffers() {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string p = "block" + std::to_string(i + 1) + ".";
    out.push_back({p + "bn.running_mean", &blocks_[i].running_mean});
    out.push_back({p + "bn.running_var", &blocks_[i].running_var});
  }
  return out;
}

std::vector<NamedTensor> VggSBn::state() {
  auto out = parameters();
  for (auto& b : buffers()) out.push_back(b);
  return out;
}

std::size_t VggSBn::parameter_count() const { return parameter_count(spec_); }

std::size_t VggSBn::parameter_count(const NetworkSpec& spec) {
  std::size_t total = 0;
  std::size_t in = static_cast<std::size_t>(spec.input_channels);
  for (int c : spec.conv_channels) {
    const auto out = static_cast<std::size_t>(c);
    total += out * (in * 9 + 1) + 2 * out;
    in = out;
  }
  const auto hidden = static_cast<std::size_t>(spec.fc_hidden);
  const auto outputs = static_cast<std::size_t>(spec.output_size);
  total += spec.flatten_size() * hidden + hidden;
  total += hidden * outputs + outputs;
  return total;
}

}  // namespace vise::nn
