#include "chn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "chn/eval.hpp"

namespace chn {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kChn: return "chn";
    case Variant::kChnW: return "chn-w";
    case Variant::kChnC: return "chn-c";
    case Variant::kChnQ: return "chn-q";
  }
  return "chn";
}

Variant parse_variant(const std::string& name) {
  if (name == "chn") return Variant::kChn;
  if (name == "chn-w") return Variant::kChnW;
  if (name == "chn-c") return Variant::kChnC;
  if (name == "chn-q") return Variant::kChnQ;
  throw ConfigError("unknown variant '" + name + "' (expected chn, chn-w, chn-c or chn-q)");
}

void validate_config(const TrainConfig& c) {
  if (c.bits == 0) throw ConfigError("bits must be positive");
  if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda)) throw ConfigError("lambda must be a nonnegative number");
  if (!(c.gamma >= 0.0) || !std::isfinite(c.gamma)) throw ConfigError("gamma must be a nonnegative number");
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) throw ConfigError("learning_rate must be positive");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (c.batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (!(c.image_dropout >= 0.0 && c.image_dropout < 1.0) || !(c.text_dropout >= 0.0 && c.text_dropout < 1.0))
    throw ConfigError("dropout rates must lie in [0, 1)");
  if (!(c.output_lr_multiplier > 0.0)) throw ConfigError("output_lr_multiplier must be positive");
  if (!(c.lr_decay_factor > 0.0)) throw ConfigError("lr_decay_factor must be positive");
  for (auto h : c.image_hidden)
    if (h == 0) throw ConfigError("hidden widths must be positive");
  for (auto h : c.text_hidden)
    if (h == 0) throw ConfigError("hidden widths must be positive");
}

LossWeights effective_weights(const TrainConfig& c) {
  switch (c.variant) {
    case Variant::kChn: return {1.0, c.lambda, c.gamma};
    case Variant::kChnW: return {0.0, c.lambda, 0.0};
    case Variant::kChnC: return {1.0, 0.0, 0.0};
    case Variant::kChnQ: return {1.0, c.lambda, 0.0};
  }
  return {1.0, c.lambda, c.gamma};
}

namespace {

std::vector<LayerSpec> stack(std::size_t input_dim, const std::vector<std::size_t>& hidden, double dropout,
                             std::size_t bits) {
  std::vector<LayerSpec> specs;
  std::size_t in = input_dim;
  for (std::size_t width : hidden) {
    specs.push_back({in, width, Activation::kRelu, dropout});
    in = width;
  }
  specs.push_back({in, bits, Activation::kTanh, 0.0});
  return specs;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined key.
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<std::size_t> parse_dims(const std::string& value) {
  std::vector<std::size_t> dims;
  if (value.empty() || value == "none") return dims;
  std::stringstream ss(value);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto v = parse_double(tok);
    if (!v || *v < 1 || *v != std::floor(*v)) throw ConfigError("invalid layer width '" + tok + "'");
    dims.push_back(static_cast<std::size_t>(*v));
  }
  return dims;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double number(const std::string& key, const std::string& value) {
  auto v = parse_double(value);
  if (!v) throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
  return *v;
}

std::size_t count(const std::string& key, const std::string& value) {
  const double v = number(key, value);
  if (v < 0 || v != std::floor(v)) throw ConfigError("'" + key + "' expects a nonnegative integer");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::vector<LayerSpec> image_specs(const TrainConfig& c, std::size_t input_dim) {
  return stack(input_dim, c.image_hidden, c.image_dropout, c.bits);
}

std::vector<LayerSpec> text_specs(const TrainConfig& c, std::size_t input_dim) {
  return stack(input_dim, c.text_hidden, c.text_dropout, c.bits);
}

void set_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
  if (key == "bits") c.bits = count(key, value);
  else if (key == "lambda") c.lambda = number(key, value);
  else if (key == "gamma") c.gamma = number(key, value);
  else if (key == "learning_rate") c.learning_rate = number(key, value);
  else if (key == "momentum") c.momentum = number(key, value);
  else if (key == "batch_size") c.batch_size = count(key, value);
  else if (key == "epochs") c.epochs = count(key, value);
  else if (key == "seed") c.seed = count(key, value);
  else if (key == "variant") c.variant = parse_variant(value);
  else if (key == "image_layer_dims") c.image_hidden = parse_dims(value);
  else if (key == "text_layer_dims") c.text_hidden = parse_dims(value);
  else if (key == "image_dropout") c.image_dropout = number(key, value);
  else if (key == "text_dropout") c.text_dropout = number(key, value);
  else if (key == "output_lr_multiplier") c.output_lr_multiplier = number(key, value);
  else if (key == "lr_decay_every") c.lr_decay_every = count(key, value);
  else if (key == "lr_decay_factor") c.lr_decay_factor = number(key, value);
  else if (key == "track_validation") {
    if (value != "true" && value != "false") throw ConfigError("track_validation expects true or false");
    c.track_validation = value == "true";
  } else
    throw ConfigError("unknown config key '" + key + "'");
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

void save_history_csv(const std::filesystem::path& path, const TrainHistory& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "epoch,c_xy,c_xx,c_yy,q_x,q_y,total,val_map_i2t,val_map_t2i\n";
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << format_exact(e.loss.c_xy) << ',' << format_exact(e.loss.c_xx) << ','
        << format_exact(e.loss.c_yy) << ',' << format_exact(e.loss.q_x) << ',' << format_exact(e.loss.q_y) << ','
        << format_exact(e.loss.total) << ',' << (e.val_map_i2t ? format_exact(*e.val_map_i2t) : "") << ','
        << (e.val_map_t2i ? format_exact(*e.val_map_t2i) : "") << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

namespace {

// Items are grouped in fixed chunks whose gradient sums are added in chunk
// order, so the reduction order never depends on the thread count.
constexpr std::size_t kGradChunk = 8;

struct BatchOutput {
  Matrix embeddings;
  std::vector<ForwardTrace> traces;
};

BatchOutput forward_batch(const ModalityNet& net, const Matrix& features, const std::vector<std::size_t>& items,
                          std::uint64_t dropout_seed) {
  BatchOutput out{Matrix(items.size(), net.output_dim()), std::vector<ForwardTrace>(items.size())};
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(items.size()); ++r) {
    out.traces[r] = forward(net, features.row(items[r]), Mode::kTrain, mix(dropout_seed, items[r]));
    auto src = out.traces[r].output();
    std::copy(src.begin(), src.end(), out.embeddings.row(r).begin());
  }
  return out;
}

Gradients backward_batch(const ModalityNet& net, const std::vector<ForwardTrace>& traces, const Matrix& residuals) {
  const std::size_t chunks = (traces.size() + kGradChunk - 1) / kGradChunk;
  std::vector<Gradients> partial(chunks);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    Gradients acc = Gradients::zeros_like(net);
    const std::size_t end = std::min(traces.size(), (static_cast<std::size_t>(c) + 1) * kGradChunk);
    for (std::size_t r = static_cast<std::size_t>(c) * kGradChunk; r < end; ++r)
      acc.add(backward(net, traces[r], residuals.row(r)));
    partial[c] = std::move(acc);
  }
  Gradients total = Gradients::zeros_like(net);
  for (const auto& g : partial) total.add(g);
  return total;
}

bool finite(const LossReport& r) {
  return std::isfinite(r.total) && std::isfinite(r.c_xy) && std::isfinite(r.c_xx) && std::isfinite(r.c_yy) &&
         std::isfinite(r.q_x) && std::isfinite(r.q_y);
}

void add_report(LossReport& acc, const LossReport& r) {
  acc.c_xy += r.c_xy;
  acc.c_xx += r.c_xx;
  acc.c_yy += r.c_yy;
  acc.q_x += r.q_x;
  acc.q_y += r.q_y;
  acc.total += r.total;
}

}  // namespace

TrainResult train(const BimodalDataset& data, const SplitSpec& split, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  validate_config(config);
  validate_dataset(data);
  validate_split(split, data.size());
  if (split.train.empty()) throw ConfigError("training split is empty");

  const LossWeights weights = effective_weights(config);
  TrainResult result{init_network(image_specs(config, data.image.cols()), mix(config.seed, 1)),
                     init_network(text_specs(config, data.text.cols()), mix(config.seed, 2)), {}};
  OptimizerState image_opt = OptimizerState::for_net(result.image_net, config.learning_rate, config.momentum,
                                                     config.output_lr_multiplier);
  OptimizerState text_opt = OptimizerState::for_net(result.text_net, config.learning_rate, config.momentum,
                                                    config.output_lr_multiplier);

  std::mt19937_64 shuffle_rng(mix(config.seed, 3));
  std::vector<std::size_t> order = split.train;
  std::vector<std::size_t> batch;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    TrainResult last_good{result.image_net, result.text_net, result.history};
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    LossReport epoch_loss;
    std::size_t batches = 0;
    try {
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        batch.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
        const std::uint64_t batch_seed = mix(mix(config.seed, 4 + epoch), start);
        const SimilaritySet pairs = all_pairs(select_rows(data.labels, batch));
        if (pairs.empty()) continue;

        BatchOutput image_out = forward_batch(result.image_net, data.image, batch, mix(batch_seed, 1));
        BatchOutput text_out = forward_batch(result.text_net, data.text, batch, mix(batch_seed, 2));

        const LossReport report = joint_loss(image_out.embeddings, text_out.embeddings, pairs, weights);
        if (!finite(report)) throw DivergenceError("non-finite loss in epoch " + std::to_string(epoch));
        add_report(epoch_loss, report);
        ++batches;

        ResidualPair residuals = output_residuals(image_out.embeddings, text_out.embeddings, pairs, weights);
        Gradients image_grad = backward_batch(result.image_net, image_out.traces, residuals.image);
        Gradients text_grad = backward_batch(result.text_net, text_out.traces, residuals.text);
        const double per_pair = 1.0 / static_cast<double>(pairs.size());
        image_grad.scale(per_pair);
        text_grad.scale(per_pair);
        sgd_step(result.image_net, image_grad, image_opt);
        sgd_step(result.text_net, text_grad, text_opt);
      }
    } catch (const DivergenceError& e) {
      throw TrainingDiverged(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")", std::move(last_good));
    }

    EpochRecord record;
    record.epoch = epoch;
    if (batches > 0) {
      const double inv = 1.0 / static_cast<double>(batches);
      epoch_loss.c_xy *= inv;
      epoch_loss.c_xx *= inv;
      epoch_loss.c_yy *= inv;
      epoch_loss.q_x *= inv;
      epoch_loss.q_y *= inv;
      epoch_loss.total *= inv;
    }
    epoch_loss.cross_weight = weights.cross;
    epoch_loss.lambda = weights.lambda;
    epoch_loss.gamma = weights.gamma;
    record.loss = epoch_loss;
    if (config.track_validation && !split.validation.empty()) {
      const CrossModalMap m = cross_modal_map(result.image_net, result.text_net, data, split.validation, split.train);
      record.val_map_i2t = m.image_to_text;
      record.val_map_t2i = m.text_to_image;
    }
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);

    if (config.lr_decay_every > 0 && epoch % config.lr_decay_every == 0) {
      image_opt.learning_rate *= config.lr_decay_factor;
      text_opt.learning_rate *= config.lr_decay_factor;
    }
  }
  return result;
}

Encoded encode(const ModalityNet& net, const Matrix& features) {
  if (features.cols() != net.input_dim())
    throw ShapeError("encode: feature dimension " + std::to_string(features.cols()) + " != network input " +
                     std::to_string(net.input_dim()));
  Matrix embeddings(features.rows(), net.output_dim());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(features.rows()); ++r) {
    const ForwardTrace t = forward(net, features.row(r), Mode::kEval);
    std::copy(t.output().begin(), t.output().end(), embeddings.row(r).begin());
  }
  HashCodeMatrix codes = binarize(embeddings);
  return {std::move(embeddings), std::move(codes)};
}

CrossModalMap cross_modal_map(const ModalityNet& image_net, const ModalityNet& text_net, const BimodalDataset& data,
                              const std::vector<std::size_t>& query_items, const std::vector<std::size_t>& db_items,
                              std::size_t R) {
  const LabelMatrix q_labels = select_rows(data.labels, query_items);
  const LabelMatrix db_labels = select_rows(data.labels, db_items);
  const RelevanceJudge judge(q_labels, db_labels);
  const Encoded q_img = encode(image_net, select_rows(data.image, query_items));
  const Encoded q_txt = encode(text_net, select_rows(data.text, query_items));
  const Encoded db_img = encode(image_net, select_rows(data.image, db_items));
  const Encoded db_txt = encode(text_net, select_rows(data.text, db_items));
  CrossModalMap m;
  m.image_to_text = map_at_r(search_all(db_txt.codes, q_img.codes, R), judge, R).map;
  m.text_to_image = map_at_r(search_all(db_img.codes, q_txt.codes, R), judge, R).map;
  return m;
}

double quantization_gap(const ModalityNet& image_net, const ModalityNet& text_net, const BimodalDataset& data,
                        const std::vector<std::size_t>& items) {
  const Encoded img = encode(image_net, select_rows(data.image, items));
  const Encoded txt = encode(text_net, select_rows(data.text, items));
  const std::size_t b = img.codes.bits();
  double sum = 0.0;
  std::size_t count = 0;
  std::vector<double> hi(b), hj(b);
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t k = 0; k < b; ++k) hi[k] = img.codes.sign(i, k);
    for (std::size_t j = 0; j < items.size(); ++j) {
      if (i == j) continue;
      for (std::size_t k = 0; k < b; ++k) hj[k] = txt.codes.sign(j, k);
      sum += std::abs(cosine(img.embeddings.row(i), txt.embeddings.row(j)) - cosine(hi, hj));
      ++count;
    }
  }
  if (count == 0) throw MetricError("quantization_gap needs at least two items");
  return sum / static_cast<double>(count);
}

SweepResult sweep(const BimodalDataset& data, const SplitSpec& split, const TrainConfig& base,
                  std::vector<double> lambda_grid, std::vector<double> gamma_grid) {
  if (lambda_grid.empty() || gamma_grid.empty()) throw ConfigError("sweep grids must be nonempty");
  if (split.validation.empty()) throw ConfigError("sweep needs a validation split");
  for (auto* grid : {&lambda_grid, &gamma_grid}) {
    std::sort(grid->begin(), grid->end());
    grid->erase(std::unique(grid->begin(), grid->end()), grid->end());
  }
  SweepResult result;
  double best_score = -1.0;
  for (double lambda : lambda_grid) {
    for (double gamma : gamma_grid) {
      TrainConfig cfg = base;
      cfg.lambda = lambda;
      cfg.gamma = gamma;
      cfg.track_validation = false;
      const TrainResult trained = train(data, split, cfg);
      SweepCell cell{lambda, gamma,
                     cross_modal_map(trained.image_net, trained.text_net, data, split.validation, split.train)};
      if (cell.map.mean() > best_score) {
        best_score = cell.map.mean();
        result.best = result.cells.size();
      }
      result.cells.push_back(cell);
    }
  }
  return result;
}

}  // namespace chn
