#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "chn/matrix.hpp"

namespace chn {

// Bit-packed {-1,+1} codes. Bit j of item i lives in word j/64 at position
// j%64; a set bit encodes +1. Padding bits past `bits` are always zero.
class HashCodeMatrix {
 public:
  HashCodeMatrix() = default;
  HashCodeMatrix(std::size_t items, std::size_t bits);

  std::size_t size() const noexcept { return items_; }
  std::size_t bits() const noexcept { return bits_; }
  std::size_t words_per_item() const noexcept { return words_per_item_; }

  std::span<const std::uint64_t> row(std::size_t i) const {
    return {words_.data() + i * words_per_item_, words_per_item_};
  }
  std::span<std::uint64_t> row(std::size_t i) { return {words_.data() + i * words_per_item_, words_per_item_}; }

  bool bit(std::size_t i, std::size_t j) const { return (row(i)[j / 64] >> (j % 64)) & 1U; }
  void set_bit(std::size_t i, std::size_t j, bool value);
  // Code entry as +1 / -1.
  int sign(std::size_t i, std::size_t j) const { return bit(i, j) ? 1 : -1; }

  std::span<const std::uint64_t> words() const noexcept { return words_; }

  bool operator==(const HashCodeMatrix&) const = default;

 private:
  std::size_t items_ = 0;
  std::size_t bits_ = 0;
  std::size_t words_per_item_ = 0;
  std::vector<std::uint64_t> words_;
};

// h = sgn(u) with sgn(0) = -1.
HashCodeMatrix binarize(const Matrix& embeddings);

// Popcount of XOR, masked to `bits`.
std::size_t hamming(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b, std::size_t bits);

struct Neighbor {
  std::size_t index = 0;
  std::size_t distance = 0;

  bool operator==(const Neighbor&) const = default;
};

// Nondecreasing distance, ties by ascending database index.
using RankedResult = std::vector<Neighbor>;

// Top-R linear scan. R > db.size() returns every item. The parallel version
// computes distances concurrently and ranks with a stable counting sort; the
// serial version is a plain sort kept as a reference.
RankedResult search(const HashCodeMatrix& db, std::span<const std::uint64_t> query, std::size_t R);
RankedResult search_serial(const HashCodeMatrix& db, std::span<const std::uint64_t> query, std::size_t R);

// One ranking per row of `queries`, each over the whole database when R == 0.
std::vector<RankedResult> search_all(const HashCodeMatrix& db, const HashCodeMatrix& queries, std::size_t R = 0);

struct IdentityReport {
  std::size_t pairs_checked = 0;
  std::size_t inner_product_failures = 0;  // dist != (b - <h,h'>)/2 exactly
  std::size_t cosine_failures = 0;         // |dist - b/2 (1 - cos)| > 1e-9
  double max_cosine_deviation = 0.0;

  bool ok() const { return inner_product_failures == 0 && cosine_failures == 0; }
};

// Checks both Hamming identities on `sample_pairs` random pairs (i != j not
// required; self pairs are valid checks).
IdentityReport verify_identities(const HashCodeMatrix& codes, std::size_t sample_pairs, std::uint64_t seed);
// Every ordered pair of the 2^bits codes. bits must be <= 12.
IdentityReport verify_identities_exhaustive(std::size_t bits);

struct BoundRow {
  double itq_error = 0.0;       // |u - sgn(u)|^2
  double bound_rhs = 0.0;       // 2b - 2b cos(|u|, 1)
  double identity_lhs = 0.0;    // ||u| - 1|^2
  double exact_rhs = 0.0;       // |u|^2 + b - 2 sqrt(b) |u| cos(|u|, 1)
  bool violated = false;        // itq_error > bound_rhs + 1e-9
  bool identities_hold = true;  // both exact identities within 1e-9
};

struct BoundReport {
  std::vector<BoundRow> rows;
  std::size_t violations = 0;
  std::size_t identity_failures = 0;
  double max_identity_deviation = 0.0;

  double violation_rate() const { return rows.empty() ? 0.0 : double(violations) / double(rows.size()); }
};

BoundReport quantization_bound_report(const Matrix& embeddings);

// Code file: "CHNB", u32 version = 1, u32 n, u32 b, then n * ceil(b/64)
// u64 words, all little-endian.
void write_codes(std::ostream& out, const HashCodeMatrix& codes);
HashCodeMatrix read_codes(std::istream& in);
void save_codes(const std::filesystem::path& path, const HashCodeMatrix& codes);
HashCodeMatrix load_codes(const std::filesystem::path& path);

}  // namespace chn
