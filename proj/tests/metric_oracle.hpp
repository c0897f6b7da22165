#pragma once

// Brute-force metric oracles. Everything is recomputed from sign vectors and
// label vectors directly; nothing here calls into the library's search or
// metric code.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "chn/eval.hpp"
#include "chn/hashing.hpp"

namespace oracle {

struct Instance {
  std::size_t bits = 0;
  std::vector<std::vector<int>> query_codes, db_codes;   // +-1 entries
  std::vector<std::vector<int>> query_labels, db_labels;  // 0/1 entries
};

inline bool shares_label(const std::vector<int>& a, const std::vector<int>& b) {
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k] == 1 && b[k] == 1) return true;
  return false;
}

inline std::size_t dist(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t d = 0;
  for (std::size_t k = 0; k < a.size(); ++k) d += a[k] != b[k];
  return d;
}

// (distance, index) ascending.
inline std::vector<std::pair<std::size_t, std::size_t>> ranking(const Instance& in, std::size_t q) {
  std::vector<std::pair<std::size_t, std::size_t>> r;
  for (std::size_t d = 0; d < in.db_codes.size(); ++d) r.emplace_back(dist(in.query_codes[q], in.db_codes[d]), d);
  std::sort(r.begin(), r.end());
  return r;
}

inline std::size_t total_relevant(const Instance& in, std::size_t q) {
  std::size_t t = 0;
  for (const auto& l : in.db_labels) t += shares_label(in.query_labels[q], l);
  return t;
}

// AP from the textbook sum of precision@k at relevant ranks.
inline double ap(const std::vector<int>& rel, std::size_t R, std::size_t total) {
  if (total == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 1; k <= std::min(R, rel.size()); ++k) {
    if (!rel[k - 1]) continue;
    std::size_t hits = 0;
    for (std::size_t m = 0; m < k; ++m) hits += rel[m];
    sum += double(hits) / double(k);
  }
  return sum / double(std::min(R, total));
}

// Returns -1 when no query is eligible.
inline double map_at_r(const Instance& in, std::size_t R) {
  double sum = 0.0;
  std::size_t eligible = 0;
  for (std::size_t q = 0; q < in.query_codes.size(); ++q) {
    const std::size_t total = total_relevant(in, q);
    if (total == 0) continue;
    std::vector<int> rel;
    for (const auto& [d, idx] : ranking(in, q)) rel.push_back(shares_label(in.query_labels[q], in.db_labels[idx]));
    sum += ap(rel, R, total);
    ++eligible;
  }
  return eligible ? sum / double(eligible) : -1.0;
}

// Per radius: mean recall and precision over eligible queries.
inline std::vector<std::pair<double, double>> pr_by_radius(const Instance& in) {
  std::vector<std::pair<double, double>> out(in.bits + 1, {0.0, 0.0});
  std::size_t used = 0;
  for (std::size_t q = 0; q < in.query_codes.size(); ++q) {
    const std::size_t total = total_relevant(in, q);
    if (total == 0) continue;
    ++used;
    for (std::size_t t = 0; t <= in.bits; ++t) {
      std::size_t retrieved = 0, hits = 0;
      for (std::size_t d = 0; d < in.db_codes.size(); ++d) {
        if (dist(in.query_codes[q], in.db_codes[d]) > t) continue;
        ++retrieved;
        hits += shares_label(in.query_labels[q], in.db_labels[d]);
      }
      out[t].first += double(hits) / double(total);
      out[t].second += retrieved ? double(hits) / double(retrieved) : 1.0;
    }
  }
  for (auto& p : out) p.first /= double(used), p.second /= double(used);
  return out;
}

inline double precision_at(const Instance& in, std::size_t R) {
  double sum = 0.0;
  for (std::size_t q = 0; q < in.query_codes.size(); ++q) {
    const auto r = ranking(in, q);
    const std::size_t depth = std::min(R, r.size());
    std::size_t hits = 0;
    for (std::size_t k = 0; k < depth; ++k) hits += shares_label(in.query_labels[q], in.db_labels[r[k].second]);
    sum += double(hits) / double(depth);
  }
  return sum / double(in.query_codes.size());
}

inline Instance random_instance(std::mt19937_64& rng, std::size_t n_db, std::size_t n_query, std::size_t bits,
                                std::size_t classes) {
  Instance in;
  in.bits = bits;
  auto code = [&] {
    std::vector<int> c(bits);
    for (auto& x : c) x = (rng() & 1) ? 1 : -1;
    return c;
  };
  auto labels = [&] {
    std::vector<int> l(classes);
    for (auto& x : l) x = (rng() % 3 == 0) ? 1 : 0;
    return l;
  };
  for (std::size_t i = 0; i < n_db; ++i) in.db_codes.push_back(code()), in.db_labels.push_back(labels());
  for (std::size_t i = 0; i < n_query; ++i) in.query_codes.push_back(code()), in.query_labels.push_back(labels());
  return in;
}

// Library-side view of an instance.
struct Packed {
  chn::HashCodeMatrix db, queries;
  chn::LabelMatrix db_labels, query_labels;
};

inline Packed pack(const Instance& in) {
  auto codes = [&](const std::vector<std::vector<int>>& rows) {
    chn::HashCodeMatrix h(rows.size(), in.bits);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < in.bits; ++k) h.set_bit(i, k, rows[i][k] > 0);
    return h;
  };
  auto labels = [](const std::vector<std::vector<int>>& rows) {
    chn::LabelMatrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, k) = static_cast<std::uint8_t>(rows[i][k]);
    return m;
  };
  return {codes(in.db_codes), codes(in.query_codes), labels(in.db_labels), labels(in.query_labels)};
}

struct Comparison {
  std::size_t instances = 0;
  std::size_t mismatches = 0;
  double max_deviation = 0.0;
};

// Compares map_at_r (R = 1..n), the PR sweep, and precision@top-R (every R)
// between the library and the oracle on one instance.
inline void compare(const Instance& in, Comparison& c, double tol = 1e-12) {
  ++c.instances;
  const Packed p = pack(in);
  const auto rankings = chn::search_all(p.db, p.queries);
  const chn::RelevanceJudge judge(p.query_labels, p.db_labels);
  auto check = [&](double a, double b) {
    const double d = std::abs(a - b);
    c.max_deviation = std::max(c.max_deviation, d);
    if (d > tol) ++c.mismatches;
  };
  const std::size_t n = in.db_codes.size();
  for (std::size_t R = 1; R <= n; ++R) {
    const double expected = map_at_r(in, R);
    if (expected < 0) {
      try {
        chn::map_at_r(rankings, judge, R);
        ++c.mismatches;
      } catch (const chn::MetricError&) {
      }
      continue;
    }
    check(chn::map_at_r(rankings, judge, R).map, expected);
  }
  if (map_at_r(in, 1) >= 0) {
    const auto pr = chn::precision_recall_by_radius(rankings, judge, in.bits);
    const auto ref = pr_by_radius(in);
    for (std::size_t t = 0; t <= in.bits; ++t) {
      check(pr[t].recall, ref[t].first);
      check(pr[t].precision, ref[t].second);
    }
  }
  std::vector<std::size_t> grid(n);
  for (std::size_t R = 1; R <= n; ++R) grid[R - 1] = R;
  const auto top = chn::precision_at_top_r(rankings, judge, grid);
  for (std::size_t R = 1; R <= n; ++R) check(top[R - 1].y, precision_at(in, R));
}

// Every instance size with n <= 10 database items and b <= 4 bits, several
// random draws each, plus every code assignment of a 3-item, 2-bit database
// against every 2-bit query.
inline Comparison sweep_small_instances(std::uint64_t seed, std::size_t draws_per_size) {
  std::mt19937_64 rng(seed);
  Comparison c;
  for (std::size_t bits = 1; bits <= 4; ++bits)
    for (std::size_t n = 1; n <= 10; ++n)
      for (std::size_t d = 0; d < draws_per_size; ++d) compare(random_instance(rng, n, 3, bits, 3), c);
  for (std::size_t assign = 0; assign < 64; ++assign)
    for (std::size_t qcode = 0; qcode < 4; ++qcode) {
      Instance in;
      in.bits = 2;
      for (std::size_t i = 0; i < 3; ++i) {
        const std::size_t v = (assign >> (2 * i)) & 3;
        in.db_codes.push_back({(v & 1) ? 1 : -1, (v & 2) ? 1 : -1});
        in.db_labels.push_back({i == 1 ? 0 : 1, i == 1 ? 1 : 0});
      }
      in.query_codes.push_back({(qcode & 1) ? 1 : -1, (qcode & 2) ? 1 : -1});
      in.query_labels.push_back({1, 0});
      compare(in, c);
    }
  return c;
}

// AP against the oracle for every relevance pattern of length <= 10, every R
// and every consistent total.
inline Comparison sweep_ap_patterns() {
  Comparison c;
  for (std::size_t len = 1; len <= 10; ++len)
    for (std::size_t mask = 0; mask < (std::size_t{1} << len); ++mask) {
      std::vector<int> rel(len);
      std::vector<std::uint8_t> rel8(len);
      std::size_t hits = 0;
      for (std::size_t k = 0; k < len; ++k) rel[k] = rel8[k] = (mask >> k) & 1, hits += rel[k];
      for (std::size_t R = 1; R <= len; ++R)
        for (std::size_t total = hits; total <= hits + 2; ++total) {
          ++c.instances;
          const double d = std::abs(chn::average_precision(rel8, R, total) - ap(rel, R, total));
          c.max_deviation = std::max(c.max_deviation, d);
          if (d > 1e-12) ++c.mismatches;
        }
    }
  return c;
}

}  // namespace oracle
