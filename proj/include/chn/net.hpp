#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chn/matrix.hpp"

namespace chn {

enum class Activation { kRelu, kTanh };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

struct LayerSpec {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  Activation activation = Activation::kRelu;
  double dropout_rate = 0.0;

  bool operator==(const LayerSpec&) const = default;
};

// Dense stack. Layer l maps u^{l-1} to u^l = a(W u^{l-1} + b), with W stored
// output_dim x input_dim.
struct ModalityNet {
  std::vector<LayerSpec> layers;
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  std::size_t input_dim() const { return layers.front().input_dim; }
  std::size_t output_dim() const { return layers.back().output_dim; }
  std::size_t parameter_count() const;

  bool operator==(const ModalityNet&) const = default;
};

enum class Mode { kTrain, kEval };

struct ForwardTrace {
  std::vector<double> input;
  // pre_activations[l] = W^l u^{l-1} + b^l
  std::vector<std::vector<double>> pre_activations;
  // post_activations[l] = a(pre) with the dropout mask and 1/(1-p) scale applied.
  std::vector<std::vector<double>> post_activations;
  // One entry per layer; empty for layers without dropout and in eval mode.
  std::vector<std::vector<std::uint8_t>> masks;

  std::span<const double> output() const { return post_activations.back(); }
};

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  static Gradients zeros_like(const ModalityNet& net);
  // this += other; shapes must agree.
  void add(const Gradients& other);
  void scale(double factor);
};

struct OptimizerState {
  std::vector<Matrix> weight_velocity;
  std::vector<std::vector<double>> bias_velocity;
  double learning_rate = 0.01;
  double momentum = 0.9;
  // Learning-rate multiplier applied to the final (hashing) layer only.
  double output_lr_multiplier = 1.0;

  static OptimizerState for_net(const ModalityNet& net, double learning_rate, double momentum,
                                double output_lr_multiplier = 1.0);
};

// Throws ConfigError when specs are empty, do not chain, or carry invalid
// dims / dropout rates.
void validate_specs(const std::vector<LayerSpec>& specs);

// Weights uniform on [-s, s], s = sqrt(6 / (fan_in + fan_out)); biases zero.
ModalityNet init_network(const std::vector<LayerSpec>& specs, std::uint64_t seed);

ForwardTrace forward(const ModalityNet& net, std::span<const double> input, Mode mode,
                     std::uint64_t seed = 0);

// Backpropagates a residual given w.r.t. the final layer's pre-activation.
Gradients backward(const ModalityNet& net, const ForwardTrace& trace,
                   std::span<const double> output_residual);

// v <- momentum * v - lr * g ; theta <- theta + v. Throws DivergenceError
// naming the layer when a gradient entry is not finite.
void sgd_step(ModalityNet& net, const Gradients& grads, OptimizerState& state);

// Model text format ("CHNM v1"). Values are written in shortest round-trip
// decimal form so a reload is bit-exact.
void write_model(std::ostream& out, const ModalityNet& net);
ModalityNet read_model(std::istream& in);
void save_model(const std::filesystem::path& path, const ModalityNet& net);
ModalityNet load_model(const std::filesystem::path& path);

// Shortest decimal text that parses back to exactly `value`.
std::string format_exact(double value);
// Strict full-token parse; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view token);

}  // namespace chn
