#include "chn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "chn/net.hpp"

namespace chn {

BimodalDataset generate_synthetic(const SyntheticConfig& config) {
  if (config.classes < 2) throw ConfigError("synthetic data needs at least two classes");
  if (!(config.noise >= 0.0)) throw ConfigError("noise must be nonnegative");
  if (config.n == 0 || config.image_dim == 0 || config.text_dim == 0) throw ConfigError("dimensions must be positive");
  if (!(config.second_label_prob >= 0.0 && config.second_label_prob <= 1.0))
    throw ConfigError("second label probability must lie in [0, 1]");

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> standard(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Matrix image_protos(config.classes, config.image_dim);
  Matrix text_protos(config.classes, config.text_dim);
  for (double& x : image_protos.flat()) x = standard(rng);
  for (double& x : text_protos.flat()) x = unit(rng);

  BimodalDataset data{Matrix(config.n, config.image_dim), Matrix(config.n, config.text_dim),
                      LabelMatrix(config.n, config.classes)};
  std::uniform_int_distribution<std::size_t> pick_class(0, config.classes - 1);
  std::uniform_int_distribution<std::size_t> pick_other(0, config.classes - 2);
  std::bernoulli_distribution second(config.second_label_prob);
  std::vector<std::size_t> classes;
  for (std::size_t i = 0; i < config.n; ++i) {
    classes.assign(1, pick_class(rng));
    if (second(rng)) {
      std::size_t other = pick_other(rng);
      if (other >= classes[0]) ++other;
      classes.push_back(other);
    }
    for (std::size_t c : classes) data.labels(i, c) = 1;

    const double share = 1.0 / static_cast<double>(classes.size());
    auto img = data.image.row(i);
    for (std::size_t k = 0; k < config.image_dim; ++k) {
      double mean = 0.0;
      for (std::size_t c : classes) mean += share * image_protos(c, k);
      img[k] = mean + config.noise * standard(rng);
    }
    auto txt = data.text.row(i);
    for (std::size_t k = 0; k < config.text_dim; ++k) {
      double p = 0.0;
      for (std::size_t c : classes) p += share * text_protos(c, k);
      txt[k] = unit(rng) < p ? 1.0 : 0.0;
    }
  }
  return data;
}

void validate_dataset(const BimodalDataset& data) {
  const std::size_t n = data.labels.rows();
  if (data.image.rows() != n || data.text.rows() != n)
    throw ShapeError("dataset modalities disagree on item count");
  if (n == 0 || data.image.cols() == 0 || data.text.cols() == 0 || data.labels.cols() == 0)
    throw ShapeError("dataset has an empty dimension");
  for (double x : data.image.flat())
    if (!std::isfinite(x)) throw InputError("non-finite image feature");
  for (double x : data.text.flat())
    if (!std::isfinite(x)) throw InputError("non-finite text feature");
  for (auto v : data.labels.flat())
    if (v > 1) throw InputError("labels must be 0/1");
}

namespace {

bool shares_label(const LabelMatrix& labels, std::size_t a, std::size_t b) {
  auto ra = labels.row(a), rb = labels.row(b);
  for (std::size_t k = 0; k < ra.size(); ++k)
    if (ra[k] && rb[k]) return true;
  return false;
}

}  // namespace

SimilarityResult build_similarity(const LabelMatrix& labels, std::size_t pair_budget, double balance,
                                  std::uint64_t seed) {
  if (pair_budget == 0) throw ConfigError("pair budget must be at least 1");
  if (!(balance >= 0.0 && balance <= 1.0)) throw ConfigError("balance must lie in [0, 1]");
  const std::size_t n = labels.rows();
  if (n < 2) throw ConfigError("need at least two items to form pairs");

  const std::size_t available = n * (n - 1) / 2;
  const std::size_t budget = std::min(pair_budget, available);
  const auto pos_target = static_cast<std::size_t>(std::llround(balance * static_cast<double>(budget)));
  const std::size_t neg_target = budget - pos_target;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  SimilarityResult result;
  std::size_t pos = 0, neg = 0;
  // Pairs that overflow a quota are kept aside to fill the budget if the
  // other quota turns out to be infeasible.
  std::vector<SimilarityPair> overflow;
  const std::size_t max_attempts = 200 * budget + 10000;
  for (std::size_t attempt = 0; attempt < max_attempts && pos + neg < budget; ++attempt) {
    std::size_t a = pick(rng), b = pick(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (!seen.emplace(a, b).second) continue;
    const int s = shares_label(labels, a, b) ? 1 : -1;
    if (s == 1 && pos < pos_target) {
      result.pairs.push_back({a, b, s});
      ++pos;
    } else if (s == -1 && neg < neg_target) {
      result.pairs.push_back({a, b, s});
      ++neg;
    } else {
      overflow.push_back({a, b, s});
    }
  }
  for (std::size_t k = 0; k < overflow.size() && result.pairs.size() < budget; ++k) {
    result.pairs.push_back(overflow[k]);
    (overflow[k].s == 1 ? pos : neg) += 1;
  }
  result.achieved_balance =
      result.pairs.empty() ? 0.0 : static_cast<double>(pos) / static_cast<double>(result.pairs.size());
  result.balance_met = std::abs(result.achieved_balance - balance) <= 0.05 && result.pairs.size() == pair_budget;
  return result;
}

SimilaritySet all_pairs(const LabelMatrix& labels) {
  SimilaritySet pairs;
  const std::size_t n = labels.rows();
  pairs.reserve(n * (n > 0 ? n - 1 : 0) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.push_back({i, j, shares_label(labels, i, j) ? 1 : -1});
  return pairs;
}

SplitSpec make_split(std::size_t n, std::size_t query_count, std::size_t validation_count, std::uint64_t seed) {
  if (query_count + validation_count >= n) throw ConfigError("split leaves no training items");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  SplitSpec split;
  split.query.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(query_count));
  split.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(query_count),
                          order.begin() + static_cast<std::ptrdiff_t>(query_count + validation_count));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(query_count + validation_count), order.end());
  std::sort(split.query.begin(), split.query.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

void validate_split(const SplitSpec& split, std::size_t n) {
  std::vector<std::uint8_t> used(n, 0);
  for (const auto* part : {&split.train, &split.query, &split.validation})
    for (std::size_t idx : *part) {
      if (idx >= n) throw IndexError("split index " + std::to_string(idx) + " out of range");
      if (used[idx]++) throw InputError("split index " + std::to_string(idx) + " appears twice");
    }
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

template <typename T, typename ParseFn>
DenseMatrix<T> read_table(const std::filesystem::path& path, ParseFn parse_field) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  DenseMatrix<T> m;
  std::string line;
  std::size_t line_no = 0;
  std::vector<T> row;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw ParseError(path.filename().string() + ": empty row", line_no);
    const auto fields = split_tabs(line);
    if (m.rows() > 0 && fields.size() != m.cols())
      throw ParseError(path.filename().string() + ": expected " + std::to_string(m.cols()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    row.clear();
    for (const auto& f : fields) row.push_back(parse_field(f, line_no));
    m.append_row(row);
  }
  if (m.rows() == 0) throw ParseError(path.filename().string() + ": file has no rows");
  return m;
}

template <typename T, typename FormatFn>
void write_table(const std::filesystem::path& path, const DenseMatrix<T>& m, FormatFn format_field) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << '\t';
      out << format_field(row[c]);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

void save_features(const std::filesystem::path& path, const Matrix& features) {
  write_table(path, features, [](double x) { return format_exact(x); });
}

Matrix load_features(const std::filesystem::path& path) {
  return read_table<double>(path, [&](const std::string& f, std::size_t line_no) {
    auto v = parse_double(f);
    if (!v || !std::isfinite(*v)) throw ParseError(path.filename().string() + ": invalid number '" + f + "'", line_no);
    return *v;
  });
}

void save_labels(const std::filesystem::path& path, const LabelMatrix& labels) {
  write_table(path, labels, [](std::uint8_t x) { return x ? '1' : '0'; });
}

LabelMatrix load_labels(const std::filesystem::path& path) {
  return read_table<std::uint8_t>(path, [&](const std::string& f, std::size_t line_no) -> std::uint8_t {
    if (f == "0") return 0;
    if (f == "1") return 1;
    throw ParseError(path.filename().string() + ": label must be 0 or 1, found '" + f + "'", line_no);
  });
}

void save_split(const std::filesystem::path& path, const SplitSpec& split) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  auto line = [&](const char* key, const std::vector<std::size_t>& idx) {
    out << key;
    for (std::size_t i : idx) out << ' ' << i;
    out << '\n';
  };
  line("train:", split.train);
  line("query:", split.query);
  line("val:", split.validation);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

SplitSpec load_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  SplitSpec split;
  const std::pair<const char*, std::vector<std::size_t>*> expected[] = {
      {"train:", &split.train}, {"query:", &split.query}, {"val:", &split.validation}};
  std::string line;
  for (std::size_t k = 0; k < 3; ++k) {
    if (!std::getline(in, line)) throw ParseError("split file: missing '" + std::string(expected[k].first) + "' line", k + 1);
    std::istringstream ss(line);
    std::string key, tok;
    ss >> key;
    if (key != expected[k].first)
      throw ParseError("split file: expected '" + std::string(expected[k].first) + "'", k + 1);
    while (ss >> tok) {
      std::size_t v = 0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError("split file: invalid index '" + tok + "'", k + 1);
      expected[k].second->push_back(v);
    }
  }
  return split;
}

void save_dataset(const std::filesystem::path& dir, const BimodalDataset& data, const SplitSpec& split) {
  std::filesystem::create_directories(dir);
  save_features(dir / "image_features.tsv", data.image);
  save_features(dir / "text_features.tsv", data.text);
  save_labels(dir / "labels.tsv", data.labels);
  save_split(dir / "split.txt", split);
}

BimodalDataset load_dataset(const std::filesystem::path& dir) {
  BimodalDataset data{load_features(dir / "image_features.tsv"), load_features(dir / "text_features.tsv"),
                      load_labels(dir / "labels.tsv")};
  validate_dataset(data);
  return data;
}

SplitSpec load_dataset_split(const std::filesystem::path& dir) { return load_split(dir / "split.txt"); }

}  // namespace chn
