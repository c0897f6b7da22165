#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <sstream>

#include "chn/errors.hpp"
#include "chn/hashing.hpp"

using namespace chn;

namespace {

HashCodeMatrix codes_from_signs(const std::vector<std::vector<int>>& rows) {
  HashCodeMatrix c(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) c.set_bit(i, j, rows[i][j] > 0);
  return c;
}

HashCodeMatrix random_codes(std::size_t n, std::size_t bits, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  HashCodeMatrix c(n, bits);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < bits; ++j) c.set_bit(i, j, rng() & 1);
  return c;
}

// Distance by walking the sign entries one at a time.
std::size_t naive_distance(const HashCodeMatrix& a, std::size_t i, const HashCodeMatrix& b, std::size_t j) {
  std::size_t d = 0;
  for (std::size_t k = 0; k < a.bits(); ++k) d += a.sign(i, k) != b.sign(j, k);
  return d;
}

}  // namespace

TEST(Binarize, SignConvention) {
  Matrix u(2, 3);
  u(0, 0) = 0.3, u(0, 1) = -0.2, u(0, 2) = 0.0;
  u(1, 0) = 0.1, u(1, 1) = 0.9, u(1, 2) = 1e-300;
  const HashCodeMatrix h = binarize(u);
  EXPECT_TRUE(h.bit(0, 0));
  EXPECT_FALSE(h.bit(0, 1));
  EXPECT_FALSE(h.bit(0, 2));
  EXPECT_EQ(h.sign(0, 2), -1);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_TRUE(h.bit(1, j));
}

TEST(Binarize, PaddingStaysZeroAcrossWords) {
  Matrix u(3, 70, 1.0);
  const HashCodeMatrix h = binarize(u);
  EXPECT_EQ(h.words_per_item(), 2u);
  EXPECT_EQ(h.row(1)[1], (std::uint64_t{1} << 6) - 1);
}

TEST(Hamming, HandCases) {
  const HashCodeMatrix c = codes_from_signs({{1, -1, 1}, {1, 1, 1}});
  EXPECT_EQ(hamming(c.row(0), c.row(1), 3), 1u);
  EXPECT_EQ(hamming(c.row(0), c.row(0), 3), 0u);
  HashCodeMatrix full(2, 64);
  for (std::size_t j = 0; j < 64; ++j) full.set_bit(0, j, true);
  EXPECT_EQ(hamming(full.row(0), full.row(1), 64), 64u);
  const HashCodeMatrix other(1, 128);
  EXPECT_THROW(hamming(c.row(0), other.row(0), 3), ShapeError);
}

TEST(Hamming, MetricAxiomsExhaustive) {
  for (std::size_t bits = 1; bits <= 8; ++bits) {
    const std::size_t n = std::size_t{1} << bits;
    HashCodeMatrix all(n, bits);
    for (std::size_t i = 0; i < n; ++i) all.row(i)[0] = i;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t d = hamming(all.row(i), all.row(j), bits);
        ASSERT_EQ(d, static_cast<std::size_t>(std::popcount(i ^ j)));
        ASSERT_EQ(d == 0, i == j);
        ASSERT_EQ(d, hamming(all.row(j), all.row(i), bits));
      }
    if (bits <= 5)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t k = 0; k < n; ++k)
            ASSERT_LE(hamming(all.row(i), all.row(k), bits),
                      hamming(all.row(i), all.row(j), bits) + hamming(all.row(j), all.row(k), bits));
  }
}

TEST(Search, HandCasesAndTies) {
  const HashCodeMatrix db = codes_from_signs({{1, 1, -1, 1}, {-1, -1, 1, -1}, {1, 1, -1, 1}});
  const RankedResult r = search(db, db.row(0), 10);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0], (Neighbor{0, 0}));
  EXPECT_EQ(r[1], (Neighbor{2, 0}));
  EXPECT_EQ(r[2], (Neighbor{1, 4}));
  EXPECT_THROW(search(db, db.row(0), 0), ConfigError);
}

TEST(Search, MatchesBruteForceOracle) {
  const HashCodeMatrix db = random_codes(200, 16, 1);
  const HashCodeMatrix q = random_codes(20, 16, 2);
  for (std::size_t R : {1u, 7u, 50u, 200u, 500u}) {
    for (std::size_t i = 0; i < q.size(); ++i) {
      std::vector<std::pair<std::size_t, std::size_t>> all;
      for (std::size_t d = 0; d < db.size(); ++d) all.emplace_back(naive_distance(q, i, db, d), d);
      std::sort(all.begin(), all.end());
      const RankedResult par = search(db, q.row(i), R);
      const RankedResult ser = search_serial(db, q.row(i), R);
      ASSERT_EQ(par, ser);
      ASSERT_EQ(par.size(), std::min<std::size_t>(R, 200));
      for (std::size_t k = 0; k < par.size(); ++k) {
        ASSERT_EQ(par[k].distance, all[k].first);
        ASSERT_EQ(par[k].index, all[k].second);
      }
    }
  }
}

TEST(Search, SearchAllFullRankings) {
  const HashCodeMatrix db = random_codes(50, 70, 3);
  const HashCodeMatrix q = random_codes(5, 70, 4);
  const auto all = search_all(db, q);
  ASSERT_EQ(all.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(all[i], search_serial(db, q.row(i), 50));
}

TEST(Identities, FigureCodes) {
  const HashCodeMatrix c = codes_from_signs({{1, -1, 1}, {1, 1, 1}});
  int inner = 0;
  for (std::size_t k = 0; k < 3; ++k) inner += c.sign(0, k) * c.sign(1, k);
  EXPECT_EQ(inner, 1);
  EXPECT_EQ((3 - inner) / 2, static_cast<int>(hamming(c.row(0), c.row(1), 3)));
}

TEST(Identities, ExhaustiveSmallCodes) {
  for (std::size_t bits = 1; bits <= 8; ++bits) {
    const IdentityReport r = verify_identities_exhaustive(bits);
    EXPECT_EQ(r.pairs_checked, (std::size_t{1} << bits) * (std::size_t{1} << bits));
    EXPECT_TRUE(r.ok()) << bits;
  }
  EXPECT_THROW(verify_identities_exhaustive(13), ConfigError);
}

TEST(Identities, RandomWideCodes) {
  const IdentityReport r = verify_identities(random_codes(1000, 64, 5), 20000, 6);
  EXPECT_EQ(r.pairs_checked, 20000u);
  EXPECT_TRUE(r.ok());
  EXPECT_LE(r.max_cosine_deviation, 1e-9);
}

TEST(Bound, CounterexampleIsFlagged) {
  Matrix u(1, 2, 0.5);
  const BoundReport r = quantization_bound_report(u);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_NEAR(r.rows[0].itq_error, 0.5, 1e-15);
  EXPECT_NEAR(r.rows[0].bound_rhs, 0.0, 1e-15);
  EXPECT_TRUE(r.rows[0].violated);
  EXPECT_EQ(r.violations, 1u);
  EXPECT_TRUE(r.rows[0].identities_hold);
}

TEST(Bound, VerticesMeetWithEquality) {
  for (std::size_t b : {2u, 4u, 8u}) {
    const std::size_t n = std::size_t{1} << b;
    Matrix u(n, b);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < b; ++k) u(i, k) = ((i >> k) & 1) ? 1.0 : -1.0;
    const BoundReport r = quantization_bound_report(u);
    EXPECT_EQ(r.violations, 0u);
    for (const auto& row : r.rows) {
      EXPECT_NEAR(row.itq_error, row.bound_rhs, 1e-9);
      EXPECT_NEAR(row.itq_error, 0.0, 1e-12);
    }
  }
}

TEST(Bound, ExactIdentityOnRandomPoints) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Matrix u(1000, 12);
  for (double& x : u.flat()) x = unit(rng);
  const BoundReport r = quantization_bound_report(u);
  EXPECT_EQ(r.identity_failures, 0u);
  EXPECT_LE(r.max_identity_deviation, 1e-9);
  EXPECT_GT(r.violation_rate(), 0.0);
  for (std::size_t i = 0; i < 20; ++i) {
    double itq = 0;
    for (double x : u.row(i)) itq += (x - (x > 0 ? 1.0 : -1.0)) * (x - (x > 0 ? 1.0 : -1.0));
    EXPECT_NEAR(r.rows[i].itq_error, itq, 1e-12);
  }
}

TEST(CodeFile, RoundTripAndLayout) {
  HashCodeMatrix c = codes_from_signs({{1, -1, -1}, {-1, 1, 1}});
  std::stringstream ss;
  write_codes(ss, c);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 4u + 12 + 16);
  EXPECT_EQ(bytes.substr(0, 4), "CHNB");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 3u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[24]), 6u);
  EXPECT_EQ(read_codes(ss), c);

  const HashCodeMatrix wide = random_codes(17, 130, 9);
  std::stringstream w;
  write_codes(w, wide);
  EXPECT_EQ(read_codes(w), wide);
}

TEST(CodeFile, RejectsMalformedInput) {
  const HashCodeMatrix c = random_codes(3, 10, 1);
  std::stringstream ss;
  write_codes(ss, c);
  const std::string good = ss.str();

  std::string padded = good;
  padded[16 + 3] = static_cast<char>(0x80);
  std::stringstream p(padded);
  EXPECT_THROW(read_codes(p), ParseError);

  std::stringstream truncated(good.substr(0, good.size() - 1));
  EXPECT_THROW(read_codes(truncated), ParseError);

  std::stringstream trailing(good + "x");
  EXPECT_THROW(read_codes(trailing), ParseError);

  std::string magic = good;
  magic[0] = 'X';
  std::stringstream m(magic);
  EXPECT_THROW(read_codes(m), ParseError);
}
