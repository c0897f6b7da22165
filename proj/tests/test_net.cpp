#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "chn/errors.hpp"
#include "chn/net.hpp"

using namespace chn;

namespace {

std::vector<LayerSpec> small_specs() {
  return {{4, 3, Activation::kRelu, 0.0}, {3, 2, Activation::kTanh, 0.0}};
}

ModalityNet single_layer(std::size_t in, std::size_t out, Activation a) {
  ModalityNet net = init_network({{in, out, a, 0.0}}, 1);
  for (double& w : net.weights[0].flat()) w = 0.0;
  return net;
}

}  // namespace

TEST(Net, InitShapesAndZeroBiases) {
  const ModalityNet net = init_network(small_specs(), 7);
  ASSERT_EQ(net.weights.size(), 2u);
  EXPECT_EQ(net.weights[0].rows(), 3u);
  EXPECT_EQ(net.weights[0].cols(), 4u);
  EXPECT_EQ(net.weights[1].rows(), 2u);
  EXPECT_EQ(net.weights[1].cols(), 3u);
  for (const auto& b : net.biases)
    for (double x : b) EXPECT_EQ(x, 0.0);
  const double s = std::sqrt(6.0 / 7.0);
  for (double w : net.weights[0].flat()) EXPECT_LE(std::abs(w), s);
  EXPECT_EQ(net.parameter_count(), 3u * 4 + 3 + 2 * 3 + 2);
}

TEST(Net, InitDeterministic) {
  EXPECT_EQ(init_network(small_specs(), 7), init_network(small_specs(), 7));
  EXPECT_NE(init_network(small_specs(), 7), init_network(small_specs(), 8));
}

TEST(Net, RejectsBadSpecs) {
  EXPECT_THROW(init_network({{4, 3, Activation::kRelu, 0.0}, {5, 2, Activation::kTanh, 0.0}}, 1), ConfigError);
  EXPECT_THROW(init_network({}, 1), ConfigError);
  EXPECT_THROW(init_network({{0, 3, Activation::kTanh, 0.0}}, 1), ConfigError);
  EXPECT_THROW(init_network({{4, 3, Activation::kRelu, 1.0}, {3, 2, Activation::kTanh, 0.0}}, 1), ConfigError);
  EXPECT_THROW(init_network({{4, 3, Activation::kTanh, 0.5}}, 1), ConfigError);
}

TEST(Net, ForwardTanhIdentityAtZero) {
  ModalityNet net = single_layer(2, 2, Activation::kTanh);
  net.weights[0](0, 0) = 1.0;
  net.weights[0](1, 1) = 1.0;
  const std::vector<double> x{0.0, 0.0};
  const ForwardTrace t = forward(net, x, Mode::kEval);
  EXPECT_EQ(t.output()[0], 0.0);
  EXPECT_EQ(t.output()[1], 0.0);
}

TEST(Net, ForwardReluHandExample) {
  ModalityNet net = single_layer(2, 1, Activation::kRelu);
  net.weights[0](0, 0) = 1.0;
  net.weights[0](0, 1) = -1.0;
  const std::vector<double> x{2.0, 3.0};
  const ForwardTrace t = forward(net, x, Mode::kEval);
  EXPECT_EQ(t.pre_activations[0][0], -1.0);
  EXPECT_EQ(t.output()[0], 0.0);
}

TEST(Net, ForwardErrors) {
  const ModalityNet net = init_network(small_specs(), 7);
  const std::vector<double> short_input{1.0, 2.0};
  EXPECT_THROW(forward(net, short_input, Mode::kEval), ShapeError);
  const std::vector<double> bad{1.0, NAN, 0.0, 0.0};
  EXPECT_THROW(forward(net, bad, Mode::kEval), InputError);
}

TEST(Net, EvalForwardDeterministicAndDropoutInactive) {
  const ModalityNet net = init_network({{4, 8, Activation::kRelu, 0.5}, {8, 3, Activation::kTanh, 0.0}}, 3);
  const std::vector<double> x{0.3, -1.0, 2.0, 0.5};
  const ForwardTrace a = forward(net, x, Mode::kEval, 1);
  const ForwardTrace b = forward(net, x, Mode::kEval, 2);
  EXPECT_EQ(a.post_activations, b.post_activations);
  EXPECT_TRUE(a.masks[0].empty());
}

TEST(Net, TrainDropoutMaskScalesSurvivors) {
  const ModalityNet net = init_network({{4, 64, Activation::kTanh, 0.5}, {64, 3, Activation::kTanh, 0.0}}, 3);
  const std::vector<double> x{0.3, -1.0, 2.0, 0.5};
  const ForwardTrace t = forward(net, x, Mode::kTrain, 11);
  ASSERT_EQ(t.masks[0].size(), 64u);
  std::size_t kept = 0;
  for (std::size_t k = 0; k < 64; ++k) {
    const double expected = t.masks[0][k] ? std::tanh(t.pre_activations[0][k]) * 2.0 : 0.0;
    EXPECT_DOUBLE_EQ(t.post_activations[0][k], expected);
    kept += t.masks[0][k];
  }
  EXPECT_GT(kept, 10u);
  EXPECT_LT(kept, 54u);
  EXPECT_EQ(forward(net, x, Mode::kTrain, 11).masks, t.masks);
}

TEST(Net, BackwardZeroResidual) {
  const ModalityNet net = init_network(small_specs(), 7);
  const std::vector<double> x{1.0, -2.0, 0.5, 3.0};
  const ForwardTrace t = forward(net, x, Mode::kEval);
  const std::vector<double> zero(2, 0.0);
  const Gradients g = backward(net, t, zero);
  for (const auto& w : g.weights)
    for (double v : w.flat()) EXPECT_EQ(v, 0.0);
  for (const auto& b : g.biases)
    for (double v : b) EXPECT_EQ(v, 0.0);
}

TEST(Net, BackwardOneHotIsOuterProduct) {
  const ModalityNet net = init_network(small_specs(), 7);
  const std::vector<double> x{1.0, -2.0, 0.5, 3.0};
  const ForwardTrace t = forward(net, x, Mode::kEval);
  for (std::size_t k = 0; k < 2; ++k) {
    std::vector<double> e(2, 0.0);
    e[k] = 1.0;
    const Gradients g = backward(net, t, e);
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 3; ++c)
        EXPECT_EQ(g.weights[1](r, c), r == k ? t.post_activations[0][c] : 0.0);
    EXPECT_EQ(g.biases[1][k], 1.0);
  }
  const std::vector<double> wrong(3, 0.0);
  EXPECT_THROW(backward(net, t, wrong), ShapeError);
}

// Backprop through a two-layer net against central differences of a linear
// readout of the pre-activation.
TEST(Net, BackwardMatchesFiniteDifferences) {
  const std::vector<LayerSpec> specs{{3, 5, Activation::kTanh, 0.0}, {5, 2, Activation::kTanh, 0.0}};
  ModalityNet net = init_network(specs, 5);
  const std::vector<double> x{0.4, -0.7, 1.1};
  const std::vector<double> r{0.8, -1.3};
  auto readout = [&](const ModalityNet& n) {
    const ForwardTrace t = forward(n, x, Mode::kEval);
    return r[0] * t.pre_activations[1][0] + r[1] * t.pre_activations[1][1];
  };
  const Gradients g = backward(net, forward(net, x, Mode::kEval), r);
  const double h = 1e-6;
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t i = 0; i < net.weights[l].flat().size(); ++i) {
      ModalityNet p = net, m = net;
      p.weights[l].flat()[i] += h;
      m.weights[l].flat()[i] -= h;
      EXPECT_NEAR(g.weights[l].flat()[i], (readout(p) - readout(m)) / (2 * h), 1e-8);
    }
}

TEST(Net, SgdPlainStep) {
  ModalityNet net = single_layer(1, 1, Activation::kTanh);
  net.weights[0](0, 0) = 1.0;
  Gradients g = Gradients::zeros_like(net);
  g.weights[0](0, 0) = 2.0;
  OptimizerState st = OptimizerState::for_net(net, 0.1, 0.0);
  sgd_step(net, g, st);
  EXPECT_DOUBLE_EQ(net.weights[0](0, 0), 0.8);
}

TEST(Net, SgdMomentumTwoSteps) {
  ModalityNet net = single_layer(1, 1, Activation::kTanh);
  Gradients g = Gradients::zeros_like(net);
  g.weights[0](0, 0) = 1.0;
  OptimizerState st = OptimizerState::for_net(net, 1.0, 0.9);
  sgd_step(net, g, st);
  EXPECT_DOUBLE_EQ(st.weight_velocity[0](0, 0), -1.0);
  sgd_step(net, g, st);
  EXPECT_DOUBLE_EQ(st.weight_velocity[0](0, 0), -1.9);
  EXPECT_DOUBLE_EQ(net.weights[0](0, 0), -2.9);
}

TEST(Net, SgdZeroGradientKeepsParameters) {
  ModalityNet net = init_network(small_specs(), 7);
  const ModalityNet before = net;
  OptimizerState st = OptimizerState::for_net(net, 0.5, 0.9);
  sgd_step(net, Gradients::zeros_like(net), st);
  EXPECT_EQ(net, before);
}

TEST(Net, SgdOutputLayerMultiplier) {
  ModalityNet net = init_network(small_specs(), 7);
  const ModalityNet before = net;
  Gradients g = Gradients::zeros_like(net);
  g.weights[0](0, 0) = 1.0;
  g.weights[1](0, 0) = 1.0;
  OptimizerState st = OptimizerState::for_net(net, 0.1, 0.0, 10.0);
  sgd_step(net, g, st);
  EXPECT_DOUBLE_EQ(net.weights[0](0, 0), before.weights[0](0, 0) - 0.1);
  EXPECT_DOUBLE_EQ(net.weights[1](0, 0), before.weights[1](0, 0) - 1.0);
}

TEST(Net, SgdNonFiniteGradientNamesLayer) {
  ModalityNet net = init_network(small_specs(), 7);
  Gradients g = Gradients::zeros_like(net);
  g.biases[1][0] = INFINITY;
  OptimizerState st = OptimizerState::for_net(net, 0.1, 0.9);
  try {
    sgd_step(net, g, st);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
  }
}

TEST(Net, ModelRoundTripIsBitExact) {
  ModalityNet net = init_network({{5, 4, Activation::kRelu, 0.5}, {4, 3, Activation::kTanh, 0.0}}, 99);
  net.biases[0][1] = 1.0 / 3.0;
  net.biases[1][2] = -1e-300;
  std::stringstream ss;
  write_model(ss, net);
  const std::string first = ss.str();
  const ModalityNet back = read_model(ss);
  EXPECT_EQ(back, net);
  std::stringstream again;
  write_model(again, back);
  EXPECT_EQ(again.str(), first);
  EXPECT_EQ(first.rfind("CHNM v1\n", 0), 0u);
}

TEST(Net, ModelParseErrorsCarryLine) {
  std::stringstream bad_magic("CHNM v2\n");
  EXPECT_THROW(read_model(bad_magic), ParseError);

  ModalityNet net = init_network(small_specs(), 1);
  std::stringstream ss;
  write_model(ss, net);
  std::string text = ss.str();
  const auto pos = text.find('\n', text.find("\nW\n"));
  text.insert(pos + 1, "abc ");
  std::stringstream corrupt(text);
  try {
    read_model(corrupt);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_GT(e.line(), 1u);
  }
}

TEST(Net, FormatExactRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23, 0.0}) {
    const auto parsed = parse_double(format_exact(v));
    ASSERT_TRUE(parsed.has_value());
    EXPECT_EQ(*parsed, v);
  }
  EXPECT_FALSE(parse_double("1.0x").has_value());
  EXPECT_FALSE(parse_double("").has_value());
}
