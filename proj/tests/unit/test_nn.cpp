#include <doctest.h>

#include "support/gradcheck.hpp"
#include "vise/nn/layers.hpp"
#include "vise/nn/network.hpp"
#include "vise/nn/optim.hpp"

#include <cmath>

using namespace vise;
using namespace vise::nn;

TEST_CASE("conv2d examples") {
  Rng rng(1);
  Tensor x({1, 2, 5, 4});
  for (auto& v : x.values()) v = static_cast<float>(rng.uniform(-1, 1));
  Tensor delta({2, 2, 3, 3});
  delta[(0 * 2 + 0) * 9 + 4] = 1.0f;
  delta[(1 * 2 + 1) * 9 + 4] = 1.0f;
  CHECK(conv2d_forward(x, delta, Tensor({2})) == x);

  const auto ones = conv2d_forward(Tensor({1, 1, 3, 3}, 1.0f), Tensor({1, 1, 3, 3}, 1.0f), Tensor({1}));
  CHECK(ones[4] == 9.0f);
  CHECK(ones[0] == 4.0f);
  CHECK(ones[8] == 4.0f);
  CHECK(ones[1] == 6.0f);
  CHECK_THROWS_WITH_AS(conv2d_forward(Tensor({1, 3, 4, 4}), Tensor({1, 2, 3, 3}), Tensor({1})),
                       doctest::Contains("[1,3,4,4]"), NnError);
}

TEST_CASE("batchnorm examples") {
  // Channel 0: zero mean, unit variance. Channel 1: constant.
  Tensor x({2, 2, 1, 2}, std::vector<float>{1, -1, 7, 7, -1, 1, 7, 7});
  Tensor gamma({2}, 1.0f), beta({2}, std::vector<float>{0.0f, 0.25f});
  Tensor rm({2}), rv({2}, 1.0f);
  const auto y = batchnorm2d_forward(x, gamma, beta, rm, rv, Mode::Train, static_cast<BatchNormCache<float>*>(nullptr));
  for (std::size_t i : {0u, 1u, 4u, 5u}) CHECK(std::abs(y[i] - x[i]) < 1e-5);
  for (std::size_t i : {2u, 3u, 6u, 7u}) CHECK(y[i] == doctest::Approx(0.25f));
  CHECK(rm[1] == doctest::Approx(0.7f));
  CHECK(rv[0] == doctest::Approx(0.9f + 0.1f * 1.0f));

  Tensor one({1, 2, 1, 2});
  CHECK_THROWS_WITH_AS(batchnorm2d_forward(one, gamma, beta, rm, rv, Mode::Train, static_cast<BatchNormCache<float>*>(nullptr)),
                       "batch too small for batch statistics", NnError);
  CHECK_NOTHROW(batchnorm2d_forward(one, gamma, beta, rm, rv, Mode::Infer, static_cast<BatchNormCache<float>*>(nullptr)));
}

TEST_CASE("relu, maxpool, linear, dropout examples") {
  CHECK(relu_forward(Tensor({3}, std::vector<float>{-1, 0, 2})) == Tensor({3}, std::vector<float>{0, 0, 2}));

  std::vector<std::size_t> argmax;
  const Tensor block({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  CHECK(maxpool2d_forward(block, &argmax)[0] == 4.0f);
  const auto back = maxpool2d_backward(block.shape(), argmax, Tensor({1, 1, 1, 1}, 1.0f));
  CHECK(back == Tensor({1, 1, 2, 2}, std::vector<float>{0, 0, 0, 1}));
  const Tensor tied({1, 1, 2, 2}, 5.0f);
  maxpool2d_forward(tied, &argmax);
  CHECK(argmax[0] == 0);
  CHECK_THROWS_AS(maxpool2d_forward<float>(Tensor({1, 1, 3, 2}), nullptr), NnError);
  Tensor x({1, 2, 256, 256});
  for (int i = 0; i < 5; ++i) x = maxpool2d_forward<float>(x, nullptr);
  CHECK(x.shape() == Shape{1, 2, 8, 8});

  Tensor eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0f;
  const Tensor in({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
  CHECK(linear_forward(in, eye, Tensor({3})) == in);
  CHECK_THROWS_AS(linear_forward(in, Tensor({3, 2}), Tensor({3})), NnError);

  Rng rng(5);
  CHECK(dropout_forward(in, 0.0, Mode::Train, rng, static_cast<std::vector<float>*>(nullptr)) == in);
  CHECK(dropout_forward(in, 0.5, Mode::Infer, rng, static_cast<std::vector<float>*>(nullptr)) == in);
  const auto d = dropout_forward(Tensor({100000}, 1.0f), 0.5, Mode::Train, rng, static_cast<std::vector<float>*>(nullptr));
  double mean = 0.0;
  for (float v : d.values()) mean += v;
  CHECK(std::abs(mean / 1e5 - 1.0) < 0.02);
  CHECK_THROWS_AS(dropout_forward(in, 1.0, Mode::Train, rng, static_cast<std::vector<float>*>(nullptr)), NnError);
}

TEST_CASE("l1 loss examples") {
  const Tensor t({1, 2}, std::vector<float>{0, 0});
  CHECK(l1_loss(t, t) == 0.0);
  CHECK(l1_loss(Tensor({1, 2}, std::vector<float>{1, 2}), t) == 1.5);
  CHECK(l1_loss_backward(Tensor({1, 2}, std::vector<float>{1, 0}), t) == Tensor({1, 2}, std::vector<float>{0.5f, 0.0f}));
  CHECK_THROWS_AS(l1_loss(Tensor({2, 1}), t), NnError);
}

TEST_CASE("layer gradients match central differences") {
  for (const auto& c : testing::run_gradient_suite(5, 99)) {
    INFO(c.layer << " max relative error " << c.max_error);
    CHECK(c.max_error < 1e-3);
  }
}

TEST_CASE("network shapes and determinism") {
  NetworkSpec full;
  full.output_size = 9;
  CHECK(full.flatten_size() == 8192);
  auto net = VggSBn::build(full, 1);
  const auto out = net.infer(Tensor({4, 2, 256, 256}, 1.0f));
  CHECK(out.shape() == Shape{4, 9});

  NetworkSpec desk;
  desk.input_size = 64;
  CHECK(desk.flatten_size() == 512);
  auto a = VggSBn::build(desk, 7);
  auto b = VggSBn::build(desk, 7);
  const auto pa = a.state();
  const auto pb = b.state();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(*pa[i].tensor == *pb[i].tensor);
  }
  CHECK_FALSE(*VggSBn::build(desk, 8).parameters()[0].tensor == *pa[0].tensor);

  Rng rng(3);
  Tensor x({2, 2, 64, 64});
  for (auto& v : x.values()) v = rng.bernoulli(0.3) ? 1.0f : 0.0f;
  CHECK(a.infer(x) == a.infer(x));
  CHECK(a.infer(x).shape() == Shape{2, 6});
  CHECK_THROWS_AS(a.infer(Tensor({1, 2, 32, 32})), NnError);

  NetworkSpec bad = desk;
  bad.input_size = 48;
  CHECK_THROWS_AS(VggSBn::build(bad, 1), NnError);
}

TEST_CASE("full-scale parameter count") {
  NetworkSpec spec;  // input 256, output 6
  std::size_t conv = 0, bn = 0, in = 2;
  for (std::size_t c : {6u, 16u, 32u, 64u, 128u}) {
    conv += c * (in * 9 + 1);
    bn += 2 * c;
    in = c;
  }
  const std::size_t fc = 8192 * 1000 + 1000 + 1000 * 6 + 6;
  CHECK(conv == 97986);
  CHECK(bn == 492);
  CHECK(VggSBn::parameter_count(spec) == conv + bn + fc);
  CHECK(VggSBn::parameter_count(spec) == 8297484);
  auto net = VggSBn::build(spec, 0);
  std::size_t counted = 0;
  for (const auto& p : net.parameters()) counted += p.tensor->numel();
  CHECK(counted == 8297484);
}

TEST_CASE("network backward matches a directional finite difference") {
  NetworkSpec spec;
  spec.input_size = 32;
  spec.conv_channels = {3, 4, 4, 5, 5};
  spec.fc_hidden = 12;
  spec.output_size = 4;
  spec.dropout_p = 0.0;
  auto net = VggSBn::build(spec, 11);
  Rng rng(12);
  Tensor x({3, 2, 32, 32});
  for (auto& v : x.values()) v = static_cast<float>(rng.uniform(-1, 1));
  Tensor r({3, 4});
  for (auto& v : r.values()) v = static_cast<float>(rng.uniform(-1, 1));

  auto loss = [&]() {
    Rng drop(0);
    const auto y = net.forward_train(x, drop);
    double s = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) s += double{r[i]} * y[i];
    return s;
  };
  loss();
  net.backward(r);
  auto params = net.parameters();
  auto grads = net.gradients();
  std::vector<Tensor> direction;
  double predicted = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor d(params[i].tensor->shape());
    for (std::size_t j = 0; j < d.numel(); ++j) {
      d[j] = static_cast<float>(rng.uniform(-1, 1));
      predicted += double{d[j]} * (*grads[i].tensor)[j];
    }
    direction.push_back(std::move(d));
  }
  // Small step: early conv weights feed five max-pools whose argmax can
  // switch under larger probes.
  const float eps = 2e-4f;
  auto shift = [&](float s) {
    for (std::size_t i = 0; i < params.size(); ++i)
      for (std::size_t j = 0; j < direction[i].numel(); ++j) (*params[i].tensor)[j] += s * direction[i][j];
  };
  shift(eps);
  const double up = loss();
  shift(-2 * eps);
  const double down = loss();
  shift(eps);
  const double measured = (up - down) / (2 * eps);
  INFO("predicted " << predicted << " measured " << measured);
  CHECK(std::abs(predicted - measured) / std::abs(predicted) < 1e-2);
}

TEST_CASE("adamw examples") {
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  Tensor p({1}, 0.0f), g({1}, 1.0f);
  AdamWState s{{Tensor({1})}, {Tensor({1})}, 0};
  adamw_step({&p}, {&g}, s, 1e-4, cfg);
  CHECK(p[0] == doctest::Approx(-1e-4 / (1 + 1e-8)).epsilon(1e-6));
  CHECK(s.step == 1);

  Tensor q({3}, std::vector<float>{1, -2, 3});
  const Tensor q0 = q;
  Tensor zero({3});
  AdamWState s2{{Tensor({3})}, {Tensor({3})}, 0};
  adamw_step({&q}, {&zero}, s2, 1e-4, cfg);
  CHECK(q == q0);

  cfg.weight_decay = 0.01;
  Tensor one({1}, 1.0f), none({1});
  AdamWState s3{{Tensor({1})}, {Tensor({1})}, 0};
  adamw_step({&one}, {&none}, s3, 1e-4, cfg);
  CHECK(one[0] == static_cast<float>(1.0 - 1e-6));

  Tensor wrong({2});
  CHECK_THROWS_AS(adamw_step({&p}, {&wrong}, s, 1e-4, cfg), NnError);
}

TEST_CASE("tensor validity") {
  Tensor t({2, 2});
  CHECK(t.all_finite());
  t[3] = std::nanf("");
  CHECK_FALSE(t.all_finite());
  CHECK_THROWS_AS(t.check_finite("t"), NnError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>{1, 2, 3}), NnError);
  CHECK_THROWS_AS(Tensor({2, 2}).reshaped({3}), NnError);
}
