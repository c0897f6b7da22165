#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "chn/losses.hpp"
#include "chn/matrix.hpp"

namespace chn {

struct BimodalDataset {
  Matrix image;        // n x d_x
  Matrix text;         // n x d_y, binary tag occurrences
  LabelMatrix labels;  // n x classes, multi-hot

  std::size_t size() const { return labels.rows(); }
};

struct SyntheticConfig {
  std::size_t n = 500;
  std::size_t image_dim = 64;
  std::size_t text_dim = 128;
  std::size_t classes = 5;
  double noise = 0.1;
  double second_label_prob = 0.2;
  std::uint64_t seed = 1;
};

// Per class: a N(0,1) image prototype and a vector of tag probabilities drawn
// uniformly from [0,1]. Each item takes one class, plus a distinct second one
// with probability second_label_prob. Image features are the mean of the
// item's prototypes plus N(0, noise^2); text features are Bernoulli draws from
// the averaged tag probabilities.
BimodalDataset generate_synthetic(const SyntheticConfig& config);

// Throws ShapeError / InputError when the modalities disagree on item count,
// contain non-finite values, or labels are not 0/1.
void validate_dataset(const BimodalDataset& data);

struct SimilarityResult {
  SimilaritySet pairs;
  double achieved_balance = 0.0;  // fraction of s = +1 pairs
  bool balance_met = true;        // false when the target was infeasible
};

// Rejection-samples distinct unordered pairs (stored with i < j). s = +1 iff
// the two items share a label.
SimilarityResult build_similarity(const LabelMatrix& labels, std::size_t pair_budget, double balance,
                                  std::uint64_t seed);

// Every unordered pair (i < j) of the given rows, labelled from `labels`.
SimilaritySet all_pairs(const LabelMatrix& labels);

struct SplitSpec {
  std::vector<std::size_t> train;
  std::vector<std::size_t> query;
  std::vector<std::size_t> validation;

  bool operator==(const SplitSpec&) const = default;
};

// Random disjoint split; everything not in query or validation is train.
SplitSpec make_split(std::size_t n, std::size_t query_count, std::size_t validation_count, std::uint64_t seed);
void validate_split(const SplitSpec& split, std::size_t n);

void save_features(const std::filesystem::path& path, const Matrix& features);
Matrix load_features(const std::filesystem::path& path);
void save_labels(const std::filesystem::path& path, const LabelMatrix& labels);
LabelMatrix load_labels(const std::filesystem::path& path);
void save_split(const std::filesystem::path& path, const SplitSpec& split);
SplitSpec load_split(const std::filesystem::path& path);

// Dataset directory layout: image_features.tsv, text_features.tsv,
// labels.tsv and split.txt.
void save_dataset(const std::filesystem::path& dir, const BimodalDataset& data, const SplitSpec& split);
BimodalDataset load_dataset(const std::filesystem::path& dir);
SplitSpec load_dataset_split(const std::filesystem::path& dir);

}  // namespace chn
