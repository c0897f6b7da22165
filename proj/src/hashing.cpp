#include "chn/hashing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <string>

#include "chn/losses.hpp"

namespace chn {

HashCodeMatrix::HashCodeMatrix(std::size_t items, std::size_t bits)
    : items_(items), bits_(bits), words_per_item_((bits + 63) / 64), words_(items * words_per_item_, 0) {
  if (items == 0 || bits == 0) throw ShapeError("hash codes need at least one item and one bit");
}

void HashCodeMatrix::set_bit(std::size_t i, std::size_t j, bool value) {
  if (j >= bits_) throw IndexError("bit index past code length");
  auto& word = row(i)[j / 64];
  const std::uint64_t mask = std::uint64_t{1} << (j % 64);
  word = value ? (word | mask) : (word & ~mask);
}

HashCodeMatrix binarize(const Matrix& embeddings) {
  HashCodeMatrix codes(embeddings.rows(), embeddings.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(embeddings.rows()); ++i) {
    auto u = embeddings.row(i);
    auto words = codes.row(i);
    for (std::size_t j = 0; j < u.size(); ++j)
      if (u[j] > 0.0) words[j / 64] |= std::uint64_t{1} << (j % 64);
  }
  return codes;
}

std::size_t hamming(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b, std::size_t bits) {
  if (a.size() != b.size() || a.size() != (bits + 63) / 64) throw ShapeError("hamming: code length mismatch");
  std::size_t distance = 0;
  for (std::size_t w = 0; w < a.size(); ++w) {
    std::uint64_t diff = a[w] ^ b[w];
    const std::size_t tail = bits - 64 * w;
    if (tail < 64) diff &= (std::uint64_t{1} << tail) - 1;
    distance += static_cast<std::size_t>(std::popcount(diff));
  }
  return distance;
}

namespace {

void check_query(const HashCodeMatrix& db, std::span<const std::uint64_t> query) {
  if (query.size() != db.words_per_item()) throw ShapeError("search: query code length does not match database");
}

}  // namespace

RankedResult search(const HashCodeMatrix& db, std::span<const std::uint64_t> query, std::size_t R) {
  check_query(db, query);
  if (R == 0) throw ConfigError("search: R must be positive");
  const std::size_t n = db.size();
  const std::size_t bits = db.bits();
  std::vector<std::uint32_t> dist(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    dist[i] = static_cast<std::uint32_t>(hamming(db.row(i), query, bits));

  // Stable counting sort over the b+1 possible distances.
  std::vector<std::size_t> start(bits + 2, 0);
  for (auto d : dist) ++start[d + 1];
  for (std::size_t d = 0; d <= bits; ++d) start[d + 1] += start[d];
  const std::size_t keep = std::min(R, n);
  RankedResult out(keep);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t slot = start[dist[i]]++;
    if (slot < keep) out[slot] = Neighbor{i, dist[i]};
  }
  return out;
}

RankedResult search_serial(const HashCodeMatrix& db, std::span<const std::uint64_t> query, std::size_t R) {
  check_query(db, query);
  if (R == 0) throw ConfigError("search: R must be positive");
  RankedResult all;
  all.reserve(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) all.push_back({i, hamming(db.row(i), query, db.bits())});
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
  });
  all.resize(std::min(R, all.size()));
  return all;
}

std::vector<RankedResult> search_all(const HashCodeMatrix& db, const HashCodeMatrix& queries, std::size_t R) {
  if (queries.bits() != db.bits()) throw ShapeError("search_all: code lengths differ");
  const std::size_t keep = R == 0 ? db.size() : R;
  std::vector<RankedResult> out(queries.size());
  // Queries run serially; each scan is itself parallel.
  for (std::size_t q = 0; q < queries.size(); ++q) out[q] = search(db, queries.row(q), keep);
  return out;
}

namespace {

void check_pair(const HashCodeMatrix& codes, std::size_t a, std::size_t b, IdentityReport& report) {
  const std::size_t bits = codes.bits();
  const std::size_t dist = hamming(codes.row(a), codes.row(b), bits);
  std::vector<double> ha(bits), hb(bits);
  long inner = 0;
  for (std::size_t k = 0; k < bits; ++k) {
    ha[k] = codes.sign(a, k);
    hb[k] = codes.sign(b, k);
    inner += codes.sign(a, k) * codes.sign(b, k);
  }
  const long lhs = 2 * static_cast<long>(dist);
  if (lhs != static_cast<long>(bits) - inner) ++report.inner_product_failures;
  const double via_cos = 0.5 * static_cast<double>(bits) * (1.0 - cosine(ha, hb));
  const double dev = std::abs(static_cast<double>(dist) - via_cos);
  report.max_cosine_deviation = std::max(report.max_cosine_deviation, dev);
  if (dev > 1e-9) ++report.cosine_failures;
  ++report.pairs_checked;
}

}  // namespace

IdentityReport verify_identities(const HashCodeMatrix& codes, std::size_t sample_pairs, std::uint64_t seed) {
  if (codes.size() < 2) throw ConfigError("verify_identities needs at least two codes");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, codes.size() - 1);
  IdentityReport report;
  for (std::size_t s = 0; s < sample_pairs; ++s) {
    const std::size_t a = pick(rng);
    const std::size_t b = pick(rng);
    check_pair(codes, a, b, report);
  }
  return report;
}

IdentityReport verify_identities_exhaustive(std::size_t bits) {
  if (bits == 0 || bits > 12) throw ConfigError("exhaustive identity check supports 1..12 bits");
  const std::size_t count = std::size_t{1} << bits;
  HashCodeMatrix codes(count, bits);
  for (std::size_t c = 0; c < count; ++c) codes.row(c)[0] = c;
  IdentityReport report;
  for (std::size_t a = 0; a < count; ++a)
    for (std::size_t b = 0; b < count; ++b) check_pair(codes, a, b, report);
  return report;
}

BoundReport quantization_bound_report(const Matrix& embeddings) {
  BoundReport report;
  report.rows.resize(embeddings.rows());
  const double b = static_cast<double>(embeddings.cols());
  const double root_b = std::sqrt(b);
  for (std::size_t r = 0; r < embeddings.rows(); ++r) {
    auto u = embeddings.row(r);
    BoundRow row;
    double sq_norm = 0.0;
    for (double x : u) {
      const double code = x > 0.0 ? 1.0 : -1.0;
      row.itq_error += (x - code) * (x - code);
      row.identity_lhs += (std::abs(x) - 1.0) * (std::abs(x) - 1.0);
      sq_norm += x * x;
    }
    const double quant = abs_cosine_to_ones(u);
    row.bound_rhs = 2.0 * b - 2.0 * b * quant;
    row.exact_rhs = sq_norm + b - 2.0 * root_b * std::sqrt(sq_norm) * quant;
    row.violated = row.itq_error > row.bound_rhs + 1e-9;
    const double dev = std::max(std::abs(row.itq_error - row.identity_lhs), std::abs(row.identity_lhs - row.exact_rhs));
    row.identities_hold = dev <= 1e-9;
    report.max_identity_deviation = std::max(report.max_identity_deviation, dev);
    if (row.violated) ++report.violations;
    if (!row.identities_hold) ++report.identity_failures;
    report.rows[r] = row;
  }
  return report;
}

namespace {

constexpr char kCodeMagic[4] = {'C', 'H', 'N', 'B'};

template <typename T>
void put_le(std::ostream& out, T value) {
  char bytes[sizeof(T)];
  for (std::size_t k = 0; k < sizeof(T); ++k) bytes[k] = static_cast<char>((value >> (8 * k)) & 0xFF);
  out.write(bytes, sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T)))
    throw ParseError(std::string("code file truncated while reading ") + what);
  T value = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) value |= static_cast<T>(bytes[k]) << (8 * k);
  return value;
}

}  // namespace

void write_codes(std::ostream& out, const HashCodeMatrix& codes) {
  out.write(kCodeMagic, 4);
  put_le<std::uint32_t>(out, 1);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(codes.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(codes.bits()));
  for (std::uint64_t w : codes.words()) put_le<std::uint64_t>(out, w);
}

HashCodeMatrix read_codes(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kCodeMagic)) throw ParseError("not a CHNB code file");
  if (get_le<std::uint32_t>(in, "version") != 1) throw ParseError("unsupported code file version");
  const auto n = get_le<std::uint32_t>(in, "item count");
  const auto b = get_le<std::uint32_t>(in, "bit count");
  if (n == 0 || b == 0) throw ParseError("code file declares zero items or bits");
  HashCodeMatrix codes(n, b);
  const std::size_t tail = b % 64;
  for (std::size_t i = 0; i < n; ++i) {
    auto row = codes.row(i);
    for (std::size_t w = 0; w < row.size(); ++w) {
      row[w] = get_le<std::uint64_t>(in, "code words");
      if (w + 1 == row.size() && tail != 0 && (row[w] >> tail) != 0)
        throw ParseError("code file has nonzero padding bits in item " + std::to_string(i));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("trailing bytes after code words");
  return codes;
}

void save_codes(const std::filesystem::path& path, const HashCodeMatrix& codes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_codes(out, codes);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

HashCodeMatrix load_codes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open code file '" + path.string() + "'");
  return read_codes(in);
}

}  // namespace chn
