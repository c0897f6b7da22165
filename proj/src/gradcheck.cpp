#include "chn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "chn/net.hpp"

namespace chn {

namespace {

ModalityNet random_net(std::mt19937_64& rng, std::size_t input_dim, std::size_t bits) {
  std::uniform_int_distribution<std::size_t> depth(0, 2), width(2, 6), coin(0, 1);
  std::vector<LayerSpec> specs;
  std::size_t in = input_dim;
  const std::size_t hidden = depth(rng);
  for (std::size_t l = 0; l < hidden; ++l) {
    const std::size_t out = width(rng);
    specs.push_back({in, out, coin(rng) ? Activation::kRelu : Activation::kTanh, 0.0});
    in = out;
  }
  specs.push_back({in, bits, Activation::kTanh, 0.0});
  ModalityNet net = init_network(specs, rng());
  std::uniform_real_distribution<double> bias(-0.3, 0.3);
  for (auto& b : net.biases)
    for (double& x : b) x = bias(rng);
  return net;
}

Matrix random_inputs(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& x : m.flat()) x = g(rng);
  return m;
}

// Central differences are only meaningful away from the kinks of relu and of
// |u| in the quantization term, and away from near-zero embeddings where the
// cosine's higher derivatives blow up. Problems closer than these margins are
// redrawn.
constexpr double kKinkMargin = 1e-3;
constexpr double kMinEmbeddingNorm = 0.3;

bool well_conditioned(const ModalityNet& net, const Matrix& inputs) {
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    const ForwardTrace t = forward(net, inputs.row(r), Mode::kEval);
    for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
      if (net.layers[l].activation != Activation::kRelu) continue;
      for (double pre : t.pre_activations[l])
        if (std::abs(pre) < kKinkMargin) return false;
    }
    double sq = 0.0;
    for (double u : t.output()) {
      if (std::abs(u) < kKinkMargin) return false;
      sq += u * u;
    }
    if (std::sqrt(sq) < kMinEmbeddingNorm) return false;
  }
  return true;
}

}  // namespace

GradCheckSuiteResult random_grad_checks(std::size_t configurations, std::uint64_t seed, double step,
                                        const ResidualFn& residuals, const LossWeights* weights_override) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> items_dist(3, 6), dim_dist(2, 6), bits_dist(2, 8);
  std::uniform_real_distribution<double> lambda_dist(0.0, 2.0), gamma_dist(0.0, 1.0);
  GradCheckSuiteResult suite;
  for (std::size_t c = 0; c < configurations; ++c) {
    std::size_t items = 0;
    ModalityNet image_net, text_net;
    Matrix x, y;
    do {
      items = items_dist(rng);
      const std::size_t bits = bits_dist(rng);
      image_net = random_net(rng, dim_dist(rng), bits);
      text_net = random_net(rng, dim_dist(rng), bits);
      x = random_inputs(rng, items, image_net.input_dim());
      y = random_inputs(rng, items, text_net.input_dim());
    } while (!well_conditioned(image_net, x) || !well_conditioned(text_net, y));

    // A random subset of distinct unordered pairs, at least one.
    SimilaritySet pairs;
    std::bernoulli_distribution keep(0.6), similar(0.5);
    for (std::size_t i = 0; i < items; ++i)
      for (std::size_t j = i + 1; j < items; ++j)
        if (keep(rng)) pairs.push_back({i, j, similar(rng) ? 1 : -1});
    if (pairs.empty()) pairs.push_back({0, 1, 1});

    const LossWeights weights =
        weights_override ? *weights_override : LossWeights{1.0, lambda_dist(rng), gamma_dist(rng)};
    const GradCheckBatch batch{&image_net, &text_net, &x, &y, &pairs};
    const GradCheckResult r = finite_diff_check(batch, weights, step, residuals);
    suite.parameters_checked += r.parameters_checked;
    if (c == 0 || r.max_relative_error > suite.max_relative_error) {
      suite.max_relative_error = r.max_relative_error;
      suite.worst_configuration = c;
    }
    ++suite.configurations;
  }
  return suite;
}

}  // namespace chn
