#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chn/data.hpp"
#include "chn/hashing.hpp"
#include "chn/losses.hpp"
#include "chn/net.hpp"

namespace chn {

// Ablations: chn-w keeps only the within-modal loss, chn-c only the
// cross-modal loss, chn-q drops the quantization loss.
enum class Variant { kChn, kChnW, kChnC, kChnQ };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

struct TrainConfig {
  std::size_t bits = 16;
  double lambda = 1.0;
  double gamma = 0.1;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 64;
  std::size_t epochs = 0;
  std::uint64_t seed = 1;
  Variant variant = Variant::kChn;
  std::vector<std::size_t> image_hidden{128};
  std::vector<std::size_t> text_hidden{256, 256};
  double image_dropout = 0.0;
  double text_dropout = 0.5;
  double output_lr_multiplier = 1.0;
  // Multiply the learning rate by lr_decay_factor every lr_decay_every
  // epochs; 0 disables decay.
  std::size_t lr_decay_every = 0;
  double lr_decay_factor = 0.1;
  // Evaluate cross-modal MAP@50 on the validation split after every epoch.
  bool track_validation = false;
};

void validate_config(const TrainConfig& config);

// Effective loss weights after variant masking.
LossWeights effective_weights(const TrainConfig& config);

std::vector<LayerSpec> image_specs(const TrainConfig& config, std::size_t input_dim);
std::vector<LayerSpec> text_specs(const TrainConfig& config, std::size_t input_dim);

// Assigns one `key = value` setting; throws ConfigError on unknown keys or
// unparsable values.
void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);
// Reads `key = value` lines ('#' starts a comment) on top of `base`.
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});

struct EpochRecord {
  std::size_t epoch = 0;
  LossReport loss;  // mean of the per-batch reports
  double seconds = 0.0;
  std::optional<double> val_map_i2t;
  std::optional<double> val_map_t2i;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

// Columns: epoch,c_xy,c_xx,c_yy,q_x,q_y,total,val_map_i2t,val_map_t2i.
// Wall time is not written so reruns produce identical files.
void save_history_csv(const std::filesystem::path& path, const TrainHistory& history);

struct TrainResult {
  ModalityNet image_net;
  ModalityNet text_net;
  TrainHistory history;
};

// Thrown when an epoch produces a non-finite loss or gradient. Carries the
// nets as they were at the end of the last completed epoch.
class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const std::string& what, TrainResult last_good)
      : DivergenceError(what), last_good_(std::move(last_good)) {}
  const TrainResult& last_good() const { return last_good_; }

 private:
  TrainResult last_good_;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch SGD with momentum on both nets. Each batch's similarity set is
// every labelled pair inside the batch, and the step descends the batch loss
// divided by its pair count.
TrainResult train(const BimodalDataset& data, const SplitSpec& split, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

struct Encoded {
  Matrix embeddings;
  HashCodeMatrix codes;
};

// Eval-mode forward of every row, then sgn binarization.
Encoded encode(const ModalityNet& net, const Matrix& features);

struct CrossModalMap {
  double image_to_text = 0.0;
  double text_to_image = 0.0;

  double mean() const { return 0.5 * (image_to_text + text_to_image); }
};

// Queries from `query_items`, database from `db_items`, relevance by shared
// label, MAP@R in both directions.
CrossModalMap cross_modal_map(const ModalityNet& image_net, const ModalityNet& text_net, const BimodalDataset& data,
                              const std::vector<std::size_t>& query_items, const std::vector<std::size_t>& db_items,
                              std::size_t R = 50);

// Mean |cos(u_i, v_j) - cos(h_i, h_j)| over all ordered pairs i != j of
// `items`, u from the image net, v from the text net.
double quantization_gap(const ModalityNet& image_net, const ModalityNet& text_net, const BimodalDataset& data,
                        const std::vector<std::size_t>& items);

struct SweepCell {
  double lambda = 0.0;
  double gamma = 0.0;
  CrossModalMap map;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // lambda-major, both grids ascending
  std::size_t best = 0;          // argmax of mean MAP, ties to smaller lambda then gamma
};

SweepResult sweep(const BimodalDataset& data, const SplitSpec& split, const TrainConfig& base,
                  std::vector<double> lambda_grid, std::vector<double> gamma_grid);

}  // namespace chn
