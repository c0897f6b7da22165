#include "chn/net.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace chn {

std::string to_string(Activation a) { return a == Activation::kRelu ? "relu" : "tanh"; }

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + name + "'");
}

std::size_t ModalityNet::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) count += weights[l].flat().size() + biases[l].size();
  return count;
}

Gradients Gradients::zeros_like(const ModalityNet& net) {
  Gradients g;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    g.weights.emplace_back(net.weights[l].rows(), net.weights[l].cols());
    g.biases.emplace_back(net.biases[l].size(), 0.0);
  }
  return g;
}

void Gradients::add(const Gradients& other) {
  if (other.weights.size() != weights.size()) throw ShapeError("Gradients::add: layer count mismatch");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    auto dst = weights[l].flat();
    auto src = other.weights[l].flat();
    if (dst.size() != src.size() || biases[l].size() != other.biases[l].size())
      throw ShapeError("Gradients::add: shape mismatch at layer " + std::to_string(l));
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    for (std::size_t k = 0; k < biases[l].size(); ++k) biases[l][k] += other.biases[l][k];
  }
}

void Gradients::scale(double factor) {
  for (auto& w : weights)
    for (double& x : w.flat()) x *= factor;
  for (auto& b : biases)
    for (double& x : b) x *= factor;
}

OptimizerState OptimizerState::for_net(const ModalityNet& net, double learning_rate, double momentum,
                                       double output_lr_multiplier) {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(output_lr_multiplier > 0.0)) throw ConfigError("output lr multiplier must be positive");
  OptimizerState s;
  auto zeros = Gradients::zeros_like(net);
  s.weight_velocity = std::move(zeros.weights);
  s.bias_velocity = std::move(zeros.biases);
  s.learning_rate = learning_rate;
  s.momentum = momentum;
  s.output_lr_multiplier = output_lr_multiplier;
  return s;
}

void validate_specs(const std::vector<LayerSpec>& specs) {
  if (specs.empty()) throw ConfigError("network needs at least one layer");
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const auto& s = specs[l];
    if (s.input_dim == 0 || s.output_dim == 0)
      throw ConfigError("layer " + std::to_string(l) + ": dimensions must be positive");
    if (!(s.dropout_rate >= 0.0 && s.dropout_rate < 1.0))
      throw ConfigError("layer " + std::to_string(l) + ": dropout rate must lie in [0, 1)");
    if (l > 0 && specs[l - 1].output_dim != s.input_dim)
      throw ConfigError("layer " + std::to_string(l) + ": input_dim " + std::to_string(s.input_dim) +
                        " does not match previous output_dim " + std::to_string(specs[l - 1].output_dim));
  }
  // The output residual is defined w.r.t. the final pre-activation, so the
  // final layer cannot carry a dropout mask.
  if (specs.back().dropout_rate != 0.0) throw ConfigError("final layer must not use dropout");
}

ModalityNet init_network(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
  validate_specs(specs);
  std::mt19937_64 rng(seed);
  ModalityNet net;
  net.layers = specs;
  for (const auto& s : specs) {
    const double limit = std::sqrt(6.0 / static_cast<double>(s.input_dim + s.output_dim));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(s.output_dim, s.input_dim);
    for (double& x : w.flat()) x = dist(rng);
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(s.output_dim, 0.0);
  }
  return net;
}

namespace {

double activate(Activation a, double x) { return a == Activation::kRelu ? (x > 0.0 ? x : 0.0) : std::tanh(x); }

// Derivative evaluated at the pre-activation. relu'(0) is taken as 0.
double activation_slope(Activation a, double pre) {
  if (a == Activation::kRelu) return pre > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(pre);
  return 1.0 - t * t;
}

}  // namespace

ForwardTrace forward(const ModalityNet& net, std::span<const double> input, Mode mode, std::uint64_t seed) {
  if (input.size() != net.input_dim())
    throw ShapeError("forward: input length " + std::to_string(input.size()) + " != " +
                     std::to_string(net.input_dim()));
  for (double x : input)
    if (!std::isfinite(x)) throw InputError("forward: non-finite input value");

  ForwardTrace trace;
  trace.input.assign(input.begin(), input.end());
  std::mt19937_64 rng(seed);
  std::span<const double> prev = trace.input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& spec = net.layers[l];
    const auto& w = net.weights[l];
    std::vector<double> pre(spec.output_dim);
    for (std::size_t o = 0; o < spec.output_dim; ++o) {
      auto wrow = w.row(o);
      double acc = net.biases[l][o];
      for (std::size_t i = 0; i < spec.input_dim; ++i) acc += wrow[i] * prev[i];
      pre[o] = acc;
    }
    std::vector<double> post(spec.output_dim);
    for (std::size_t o = 0; o < spec.output_dim; ++o) post[o] = activate(spec.activation, pre[o]);

    std::vector<std::uint8_t> mask;
    if (mode == Mode::kTrain && spec.dropout_rate > 0.0) {
      std::bernoulli_distribution keep(1.0 - spec.dropout_rate);
      const double scale = 1.0 / (1.0 - spec.dropout_rate);
      mask.resize(spec.output_dim);
      for (std::size_t o = 0; o < spec.output_dim; ++o) {
        mask[o] = keep(rng) ? 1 : 0;
        post[o] = mask[o] ? post[o] * scale : 0.0;
      }
    }
    trace.pre_activations.push_back(std::move(pre));
    trace.post_activations.push_back(std::move(post));
    trace.masks.push_back(std::move(mask));
    prev = trace.post_activations.back();
  }
  return trace;
}

Gradients backward(const ModalityNet& net, const ForwardTrace& trace, std::span<const double> output_residual) {
  if (output_residual.size() != net.output_dim())
    throw ShapeError("backward: residual length " + std::to_string(output_residual.size()) + " != " +
                     std::to_string(net.output_dim()));
  if (trace.pre_activations.size() != net.layers.size()) throw ShapeError("backward: trace does not match net");

  Gradients g = Gradients::zeros_like(net);
  std::vector<double> delta(output_residual.begin(), output_residual.end());
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    std::span<const double> below = l == 0 ? std::span<const double>(trace.input)
                                           : std::span<const double>(trace.post_activations[l - 1]);
    auto& dw = g.weights[l];
    for (std::size_t o = 0; o < delta.size(); ++o) {
      auto row = dw.row(o);
      for (std::size_t i = 0; i < below.size(); ++i) row[i] = delta[o] * below[i];
      g.biases[l][o] = delta[o];
    }
    if (l == 0) break;

    const auto& spec_below = net.layers[l - 1];
    const auto& w = net.weights[l];
    const auto& mask = trace.masks[l - 1];
    const double keep_scale = spec_below.dropout_rate > 0.0 ? 1.0 / (1.0 - spec_below.dropout_rate) : 1.0;
    std::vector<double> next(spec_below.output_dim, 0.0);
    for (std::size_t o = 0; o < delta.size(); ++o) {
      if (delta[o] == 0.0) continue;
      auto wrow = w.row(o);
      for (std::size_t k = 0; k < next.size(); ++k) next[k] += delta[o] * wrow[k];
    }
    for (std::size_t k = 0; k < next.size(); ++k) {
      double factor = activation_slope(spec_below.activation, trace.pre_activations[l - 1][k]);
      if (!mask.empty()) factor *= mask[k] ? keep_scale : 0.0;
      next[k] *= factor;
    }
    delta = std::move(next);
  }
  return g;
}

void sgd_step(ModalityNet& net, const Gradients& grads, OptimizerState& state) {
  if (grads.weights.size() != net.layers.size() || state.weight_velocity.size() != net.layers.size())
    throw ShapeError("sgd_step: layer count mismatch");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    for (double x : grads.weights[l].flat())
      if (!std::isfinite(x)) throw DivergenceError("non-finite weight gradient in layer " + std::to_string(l));
    for (double x : grads.biases[l])
      if (!std::isfinite(x)) throw DivergenceError("non-finite bias gradient in layer " + std::to_string(l));
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const double lr = l + 1 == net.layers.size() ? state.learning_rate * state.output_lr_multiplier
                                                 : state.learning_rate;
    auto w = net.weights[l].flat();
    auto vw = state.weight_velocity[l].flat();
    auto gw = grads.weights[l].flat();
    if (w.size() != gw.size() || w.size() != vw.size()) throw ShapeError("sgd_step: weight shape mismatch");
    for (std::size_t k = 0; k < w.size(); ++k) {
      vw[k] = state.momentum * vw[k] - lr * gw[k];
      w[k] += vw[k];
    }
    auto& b = net.biases[l];
    auto& vb = state.bias_velocity[l];
    const auto& gb = grads.biases[l];
    if (b.size() != gb.size() || b.size() != vb.size()) throw ShapeError("sgd_step: bias shape mismatch");
    for (std::size_t k = 0; k < b.size(); ++k) {
      vb[k] = state.momentum * vb[k] - lr * gb[k];
      b[k] += vb[k];
    }
  }
}

std::string format_exact(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

std::optional<double> parse_double(std::string_view token) {
  if (token.empty()) return std::nullopt;
  if (token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) return std::nullopt;
  return value;
}

void write_model(std::ostream& out, const ModalityNet& net) {
  out << "CHNM v1\n";
  out << "layers=" << net.layers.size() << '\n';
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& s = net.layers[l];
    out << "layer " << l << ' ' << s.input_dim << ' ' << s.output_dim << ' ' << to_string(s.activation) << ' '
        << format_exact(s.dropout_rate) << '\n';
    out << "W\n";
    for (std::size_t o = 0; o < s.output_dim; ++o) {
      auto row = net.weights[l].row(o);
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? " " : "") << format_exact(row[i]);
      out << '\n';
    }
    out << "b\n";
    for (std::size_t o = 0; o < s.output_dim; ++o) out << (o ? " " : "") << format_exact(net.biases[l][o]);
    out << '\n';
  }
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::string next(const char* expecting) {
    std::string line;
    if (!std::getline(in_, line)) throw ParseError(std::string("unexpected end of model file, expected ") + expecting,
                                                   line_no_ + 1);
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  std::vector<double> numbers(std::size_t expected, const char* what) {
    const std::string line = next(what);
    std::istringstream ss(line);
    std::vector<double> values;
    std::string tok;
    while (ss >> tok) {
      auto v = parse_double(tok);
      if (!v || !std::isfinite(*v)) throw ParseError("invalid number '" + tok + "' in " + what, line_no_);
      values.push_back(*v);
    }
    if (values.size() != expected)
      throw ParseError(std::string(what) + ": expected " + std::to_string(expected) + " values, got " +
                           std::to_string(values.size()),
                       line_no_);
    return values;
  }

  std::size_t line_no() const { return line_no_; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

}  // namespace

ModalityNet read_model(std::istream& in) {
  LineReader reader(in);
  if (reader.next("header") != "CHNM v1") throw ParseError("missing 'CHNM v1' header", 1);
  const std::string count_line = reader.next("layer count");
  std::size_t layer_count = 0;
  if (count_line.rfind("layers=", 0) != 0) throw ParseError("expected 'layers=<k>'", reader.line_no());
  {
    auto digits = std::string_view(count_line).substr(7);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), layer_count);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || layer_count == 0)
      throw ParseError("invalid layer count", reader.line_no());
  }

  std::vector<LayerSpec> specs;
  ModalityNet net;
  for (std::size_t l = 0; l < layer_count; ++l) {
    std::istringstream header(reader.next("layer header"));
    std::string keyword, activation, dropout;
    std::size_t index = 0;
    LayerSpec spec;
    if (!(header >> keyword >> index >> spec.input_dim >> spec.output_dim >> activation >> dropout) ||
        keyword != "layer" || index != l)
      throw ParseError("malformed layer header", reader.line_no());
    auto rate = parse_double(dropout);
    if (!rate) throw ParseError("invalid dropout rate", reader.line_no());
    spec.dropout_rate = *rate;
    try {
      spec.activation = parse_activation(activation);
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), reader.line_no());
    }
    if (reader.next("'W'") != "W") throw ParseError("expected 'W'", reader.line_no());
    Matrix w;
    for (std::size_t o = 0; o < spec.output_dim; ++o) w.append_row(reader.numbers(spec.input_dim, "weight row"));
    if (reader.next("'b'") != "b") throw ParseError("expected 'b'", reader.line_no());
    net.biases.push_back(reader.numbers(spec.output_dim, "bias row"));
    net.weights.push_back(std::move(w));
    specs.push_back(spec);
  }
  try {
    validate_specs(specs);
  } catch (const ConfigError& e) {
    throw ParseError(std::string("inconsistent model: ") + e.what());
  }
  net.layers = std::move(specs);
  return net;
}

void save_model(const std::filesystem::path& path, const ModalityNet& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_model(out, net);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

ModalityNet load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model '" + path.string() + "'");
  return read_model(in);
}

}  // namespace chn
