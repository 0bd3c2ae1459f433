#include <catch2/catch_amalgamated.hpp>

#include "topogen/core/rng.hpp"
#include "topogen/nn/gradient_check.hpp"
#include "topogen/nn/loss.hpp"

using namespace topogen;
using namespace topogen::nn;

namespace {

Tensor<double> random_input(const std::vector<int>& shape, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor<double> x(shape);
  for (std::size_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(lo, hi);
  return x;
}

LossFn<double> mse_to_random_target(const FeatureShape& out_shape, int batch, Rng& rng) {
  std::vector<int> full{batch};
  for (int d : out_shape) full.push_back(d);
  Tensor<double> target = random_input(full, rng);
  return [target](const Tensor<double>& pred) { return mse_loss(pred, target); };
}

double check(NetworkSpec spec, const FeatureShape& in, int batch, std::uint64_t seed) {
  Sequential<double> net(spec, in);
  Rng rng(seed);
  net.init_weights(rng);
  const Tensor<double> x = random_input([&] {
    std::vector<int> full{batch};
    for (int d : in) full.push_back(d);
    return full;
  }(), rng);
  auto loss = mse_to_random_target(net.output_shape(), batch, rng);
  return gradient_check(net, x, loss);
}

}  // namespace

TEST_CASE("convolution gradients match finite differences", "[nn][grad]") {
  NetworkSpec same1;
  same1.conv2d(3, 1, Padding::same, 3);
  CHECK(check(same1, {5, 5, 2}, 2, 100) < 1e-4);

  NetworkSpec strided;
  strided.conv2d(3, 2, Padding::same, 2);
  CHECK(check(strided, {7, 7, 2}, 2, 101) < 1e-4);

  NetworkSpec valid;
  valid.conv2d(3, 1, Padding::valid, 2);
  CHECK(check(valid, {6, 6, 1}, 2, 102) < 1e-4);
}

TEST_CASE("dense gradients match finite differences", "[nn][grad]") {
  NetworkSpec spec;
  spec.dense(4);
  CHECK(check(spec, {6}, 3, 103) < 1e-4);
}

TEST_CASE("a purely linear network checks to near machine precision", "[nn][grad]") {
  NetworkSpec spec;
  spec.dense(5).dense(2);
  CHECK(check(spec, {4}, 3, 104) < 1e-7);
}

TEST_CASE("linear single-dense gradient equals the closed form", "[nn][grad]") {
  // loss = mse(XW + b, Y); dW = 2 X^T (XW + b - Y) / (B * U)
  const int batch = 3, fin = 2, fout = 2;
  NetworkSpec spec;
  spec.dense(fout);
  Sequential<double> net(spec, {fin});
  Rng rng(7);
  net.init_weights(rng);
  Tensor<double> x = random_input({batch, fin}, rng);
  Tensor<double> y = random_input({batch, fout}, rng);

  ForwardCache<double> cache;
  const Tensor<double> pred = net.forward(x, Mode::train, &cache);
  auto [loss, dpred] = mse_loss(pred, y);
  GradientSet<double> grads = net.zero_grads();
  net.backward(dpred, cache, grads);

  const double scale = 2.0 / (batch * fout);
  for (int i = 0; i < fin; ++i) {
    for (int j = 0; j < fout; ++j) {
      double want = 0.0;
      for (int b = 0; b < batch; ++b) want += x.at(b, i) * (pred.at(b, j) - y.at(b, j));
      want *= scale;
      CHECK(grads[0][0].at(i, j) == Catch::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero loss gradient produces zero weight gradients", "[nn][grad]") {
  NetworkSpec spec;
  spec.dense(3).activation(Activation::tanh).dense(2);
  Sequential<double> net(spec, {4});
  Rng rng(8);
  net.init_weights(rng);
  ForwardCache<double> cache;
  const Tensor<double> x = random_input({2, 4}, rng);
  net.forward(x, Mode::train, &cache);
  GradientSet<double> grads = net.zero_grads();
  Tensor<double> dy({2, 2});  // zeros
  net.backward(dy, cache, grads);
  for (const auto& layer : grads) {
    for (const auto& t : layer) {
      for (std::size_t i = 0; i < t.numel(); ++i) CHECK(t[i] == 0.0);
    }
  }
}

TEST_CASE("maxpool gradients match finite differences away from ties", "[nn][grad]") {
  // distinct input values keep the argmax stable under the probe
  NetworkSpec spec;
  spec.conv2d(3, 1, Padding::same, 2).maxpool(2);
  Sequential<double> net(spec, {4, 4, 1});
  Rng rng(105);
  net.init_weights(rng);
  Tensor<double> x({2, 4, 4, 1});
  for (std::size_t i = 0; i < x.numel(); ++i)
    x[i] = 0.31 * static_cast<double>(i + 1) + rng.uniform(0.0, 0.01);
  auto loss = mse_to_random_target(net.output_shape(), 2, rng);
  CHECK(gradient_check(net, x, loss) < 1e-4);
}

TEST_CASE("batchnorm gradients match finite differences", "[nn][grad]") {
  NetworkSpec spec;
  spec.batchnorm();
  CHECK(check(spec, {3, 3, 2}, 4, 106) < 1e-4);

  NetworkSpec dense_bn;
  dense_bn.dense(4).batchnorm();
  CHECK(check(dense_bn, {3}, 5, 107) < 1e-4);
}

TEST_CASE("activation gradients match finite differences", "[nn][grad]") {
  for (auto kind : {Activation::relu, Activation::leaky_relu, Activation::sigmoid,
                    Activation::tanh, Activation::none}) {
    NetworkSpec spec;
    spec.dense(6).activation(kind, 0.2).dense(2);
    CHECK(check(spec, {4}, 3, 108 + static_cast<int>(kind)) < 1e-4);
  }
}

TEST_CASE("upsample and reshape gradients match finite differences", "[nn][grad]") {
  NetworkSpec spec;
  spec.dense(8).reshape(2, 2, 2).upsample(2).conv2d(3, 1, Padding::same, 1).flatten();
  CHECK(check(spec, {3}, 2, 115) < 1e-4);
}

TEST_CASE("a mixed convolutional block checks end to end", "[nn][grad]") {
  NetworkSpec spec;
  spec.conv2d(3, 1, Padding::same, 3)
      .activation(Activation::leaky_relu, 0.2)
      .maxpool(2)
      .batchnorm()
      .flatten()
      .dense(2);
  CHECK(check(spec, {6, 6, 1}, 3, 116) < 1e-4);
}

TEST_CASE("input gradients match finite differences", "[nn][grad]") {
  NetworkSpec spec;
  spec.conv2d(3, 1, Padding::same, 2).activation(Activation::tanh).flatten().dense(2);
  Sequential<double> net(spec, {4, 4, 1});
  Rng rng(117);
  net.init_weights(rng);
  Tensor<double> x = random_input({2, 4, 4, 1}, rng);
  auto loss = mse_to_random_target(net.output_shape(), 2, rng);

  ForwardCache<double> cache;
  auto [value, dpred] = loss(net.forward(x, Mode::train, &cache, false));
  GradientSet<double> grads = net.zero_grads();
  const Tensor<double> dx = net.backward(dpred, cache, grads);

  const double eps = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double keep = x[i];
    ForwardCache<double> scratch;
    x[i] = keep + eps;
    const double up = loss(net.forward(x, Mode::train, &scratch, false)).first;
    x[i] = keep - eps;
    const double down = loss(net.forward(x, Mode::train, &scratch, false)).first;
    x[i] = keep;
    const double fd = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(fd - dx[i]) / std::max({std::abs(fd), std::abs(dx[i]), 1e-10}));
  }
  CHECK(worst < 1e-4);
}
