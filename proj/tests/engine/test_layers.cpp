#include <gtest/gtest.h>

#include <random>

#include "cdmp/layers.h"
#include "cdmp/network.h"

using namespace cdmp;

namespace {

// Direct-summation reference for a valid, stride-1 convolution on [L x C_in].
TensorD naive_conv(const TensorD& x, const TensorD& w, const TensorD& b) {
  const std::size_t len = x.dim(0), c_in = x.dim(1), k = w.dim(0), c_out = w.dim(2);
  TensorD y({len - k + 1, c_out});
  for (std::size_t t = 0; t + k <= len; ++t) {
    for (std::size_t o = 0; o < c_out; ++o) {
      double acc = b[o];
      for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t c = 0; c < c_in; ++c) acc += x.at(t + j, c) * w.at(j, c, o);
      }
      y.at(t, o) = acc;
    }
  }
  return y;
}

TensorD random_tensor(Shape shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  TensorD t(std::move(shape));
  for (auto& v : t.values()) v = u(rng);
  return t;
}

}  // namespace

TEST(Conv1d, CenteredIdentityKernel) {
  auto params = LayerParams<float>::of(Tensor({3, 1, 1}, {0, 1, 0}), Tensor({1}));
  const Tensor out = conv1d_forward(Tensor({5, 1}, {1, 2, 3, 4, 5}), params);
  EXPECT_EQ(out, Tensor({3, 1}, {2, 3, 4}));
}

TEST(Conv1d, PairSumMatchesDirectSummation) {
  const TensorD x({4, 1}, {1, 2, 3, 4});
  const TensorD w({2, 1, 1}, {1, 1});
  const TensorD b({1}, {0});
  const TensorD expected = naive_conv(x, w, b);
  ASSERT_EQ(expected, TensorD({3, 1}, {3, 5, 7}));
  EXPECT_EQ(conv1d_forward(x, LayerParams<double>::of(w, b)), expected);
}

TEST(Conv1d, RandomInputsMatchDirectSummation) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t len = 3 + rng() % 20, c_in = 1 + rng() % 4, c_out = 1 + rng() % 5;
    const std::size_t k = 1 + rng() % 3;
    const TensorD x = random_tensor({len, c_in}, rng);
    const TensorD w = random_tensor({k, c_in, c_out}, rng);
    const TensorD b = random_tensor({c_out}, rng);
    const TensorD got = conv1d_forward(x, LayerParams<double>::of(w, b));
    const TensorD want = naive_conv(x, w, b);
    ASSERT_EQ(got.shape(), want.shape());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(Conv1d, BatchedEqualsPerSample) {
  std::mt19937_64 rng(5);
  const TensorD x = random_tensor({4, 10, 3}, rng);
  auto params = LayerParams<double>::of(random_tensor({3, 3, 2}, rng), random_tensor({2}, rng));
  const TensorD batched = conv1d_forward(x, params);
  for (std::size_t n = 0; n < 4; ++n) {
    const TensorD single = conv1d_forward(x.slice_rows(n, n + 1).reshaped({10, 3}), params);
    EXPECT_EQ(batched.slice_rows(n, n + 1).reshaped({8, 2}), single);
  }
}

TEST(Conv1d, TableOneShapes) {
  auto first = LayerParams<float>::zeros({3, 3, 128}, {128});
  auto second = LayerParams<float>::zeros({3, 128, 128}, {128});
  const Tensor a = conv1d_forward(Tensor({120, 3}), first);
  EXPECT_EQ(a.shape(), (Shape{118, 128}));
  EXPECT_EQ(conv1d_forward(a, second).shape(), (Shape{116, 128}));
}

TEST(Conv1d, ChannelMismatchNamesBothShapes) {
  auto params = LayerParams<float>::zeros({3, 4, 8}, {8});
  try {
    conv1d_forward(Tensor({10, 3}), params);
    FAIL() << "expected a shape error";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[10 x 3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3 x 4 x 8]"), std::string::npos) << msg;
  }
}

TEST(MaxPool1d, PairwiseMax) {
  EXPECT_EQ(maxpool1d_forward(Tensor({4, 1}, {1, 3, 2, 4})).output, Tensor({2, 1}, {3, 4}));
}

TEST(MaxPool1d, OddLengthDropsTrailingElement) {
  EXPECT_EQ(maxpool1d_forward(Tensor({23, 384})).output.shape(), (Shape{11, 384}));
}

TEST(MaxPool1d, BackwardRoutesToArgmax) {
  const auto cache = maxpool1d_forward(Tensor({4, 1}, {1, 3, 2, 4}));
  EXPECT_EQ(maxpool1d_backward(cache, Tensor({2, 1}, {1, 1})), Tensor({4, 1}, {0, 1, 0, 1}));
}

TEST(MaxPool1d, BackwardWithoutForwardFails) {
  PoolResult<float> empty;
  EXPECT_THROW(maxpool1d_backward(empty, Tensor({2, 1}, {1, 1})), std::logic_error);
}

TEST(MaxPool1d, BackwardConservesGradientMass) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t len = 2 + rng() % 30, ch = 1 + rng() % 6;
    const TensorD x = random_tensor({2, len, ch}, rng);
    const auto cache = maxpool1d_forward(x);
    const TensorD g = random_tensor(cache.output.shape(), rng);
    const TensorD gx = maxpool1d_backward(cache, g);
    double in_sum = 0, out_sum = 0;
    for (double v : gx.values()) in_sum += v;
    for (double v : g.values()) out_sum += v;
    EXPECT_NEAR(in_sum, out_sum, 1e-12);
  }
}

TEST(Dense, IdentityMap) {
  auto params = LayerParams<float>::of(Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2}));
  EXPECT_EQ(dense_forward(Tensor::from({5, 7}), params), Tensor::from({5, 7}));
}

TEST(Dense, DotProductPlusBias) {
  // Oracle: 2*1 + 3*1 + 1.
  const double expected = 2.0 * 1.0 + 3.0 * 1.0 + 1.0;
  auto params = LayerParams<double>::of(TensorD({2, 1}, {1, 1}), TensorD({1}, {1}));
  EXPECT_EQ(dense_forward(TensorD::from({2, 3}), params), TensorD({1}, {expected}));
}

TEST(Dense, FlattenedFeaturesToHidden) {
  auto params = LayerParams<float>::zeros({4224, 384}, {384});
  EXPECT_EQ(dense_forward(Tensor({2, 4224}), params).shape(), (Shape{2, 384}));
}

TEST(Dense, DimensionMismatchRejected) {
  auto params = LayerParams<float>::zeros({3, 2}, {2});
  EXPECT_THROW(dense_forward(Tensor({4}), params), std::invalid_argument);
}

TEST(Activation, Relu) {
  EXPECT_EQ(activation_forward(Tensor::from({-1, 0, 2}), Activation::Relu), Tensor::from({0, 0, 2}));
}

TEST(Activation, SigmoidAtZero) {
  EXPECT_EQ(activation_forward(Tensor::from({0}), Activation::Sigmoid)[0], 0.5f);
}

TEST(Activation, SigmoidSaturatesWithoutOverflow) {
  const Tensor s = activation_forward(Tensor::from({-1000, 1000}), Activation::Sigmoid);
  EXPECT_TRUE(all_finite(s));
  EXPECT_EQ(s[0], 0.0f);
  EXPECT_EQ(s[1], 1.0f);
}

TEST(Activation, SoftmaxSymmetric) {
  EXPECT_EQ(activation_forward(Tensor::from({0, 0}), Activation::Softmax), Tensor::from({0.5, 0.5}));
}

TEST(Activation, SoftmaxRowsArePositiveDistributions) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int trial = 0; trial < 100; ++trial) {
    TensorD x({3, 7});
    for (auto& v : x.values()) v = u(rng);
    const TensorD p = activation_forward(x, Activation::Softmax);
    for (std::size_t r = 0; r < 3; ++r) {
      double sum = 0;
      for (std::size_t j = 0; j < 7; ++j) {
        EXPECT_GE(p.at(r, j), 0.0);
        sum += p.at(r, j);
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
}

TEST(Dropout, ZeroRateIsIdentity) {
  std::mt19937_64 rng(1);
  const Tensor x = Tensor::from({1, 2, 3});
  EXPECT_EQ(dropout_forward(x, 0.0, rng, Mode::Train).output, x);
}

TEST(Dropout, EvalModeIsIdentity) {
  std::mt19937_64 rng(1);
  const Tensor x = Tensor::from({1, 2, 3});
  EXPECT_EQ(dropout_forward(x, 0.2, rng, Mode::Eval).output, x);
}

TEST(Dropout, InvertedScalingPreservesExpectation) {
  std::mt19937_64 rng(99);
  const Tensor ones({100000}, 1.0f);
  const Tensor out = dropout_forward(ones, 0.5, rng, Mode::Train).output;
  double mean = 0;
  for (float v : out.values()) {
    EXPECT_TRUE(v == 0.0f || v == 2.0f);
    mean += v;
  }
  mean /= out.size();
  EXPECT_GE(mean, 0.98);
  EXPECT_LE(mean, 1.02);
}

TEST(Dropout, RateOfOneRejected) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(dropout_forward(Tensor::from({1}), 1.0, rng, Mode::Train), std::invalid_argument);
}

TEST(ShapeTrace, IncompatibleLayersRejected) {
  const std::vector<LayerDesc> layers = {conv_layer(3, 4), dense_layer(2)};
  EXPECT_THROW(shape_trace({10, 3}, layers), std::invalid_argument);
}

TEST(Network, ForwardOutputsAreFinite) {
  std::mt19937_64 rng(4);
  const std::vector<LayerDesc> layers = {conv_layer(3, 4), pool_layer(), flatten_layer(),
                                         dense_layer(5, Activation::Sigmoid)};
  std::vector<LayerParams<float>> params(layers.size());
  params[0] = LayerParams<float>::of(random_tensor({3, 3, 4}, rng).cast<float>(),
                                     random_tensor({4}, rng).cast<float>());
  params[3] = LayerParams<float>::of(random_tensor({16, 5}, rng).cast<float>(),
                                     random_tensor({5}, rng).cast<float>());
  const Tensor x = random_tensor({6, 10, 3}, rng).cast<float>();
  const Tensor y = network_forward<float>(layers, params, x, Mode::Eval, nullptr, nullptr);
  EXPECT_EQ(y.shape(), (Shape{6, 5}));
  EXPECT_TRUE(all_finite(y));
}
