#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "chn/hashing.hpp"
#include "chn/matrix.hpp"

namespace chn {

// Two items are relevant to each other iff their multi-hot label vectors
// share at least one label.
bool relevant(std::span<const std::uint8_t> query_labels, std::span<const std::uint8_t> db_labels);

class RelevanceJudge {
 public:
  RelevanceJudge(const LabelMatrix& query_labels, const LabelMatrix& db_labels);

  bool operator()(std::size_t query, std::size_t item) const;
  std::size_t total_relevant(std::size_t query) const { return totals_[query]; }
  std::size_t query_count() const { return queries_->rows(); }
  std::size_t db_count() const { return db_->rows(); }

 private:
  const LabelMatrix* queries_;
  const LabelMatrix* db_;
  std::vector<std::size_t> totals_;
};

// AP@R normalised by min(R, total_relevant); 0 when total_relevant == 0.
double average_precision(std::span<const std::uint8_t> ranked_relevance, std::size_t R, std::size_t total_relevant);

struct MapResult {
  double map = 0.0;
  std::size_t eligible_queries = 0;
  std::size_t excluded_queries = 0;  // no relevant database item
};

// Mean AP@R over queries that have at least one relevant item. Throws
// MetricError when no query is eligible.
MapResult map_at_r(const std::vector<RankedResult>& rankings, const RelevanceJudge& judge, std::size_t R);

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const CurvePoint&) const = default;
};

using CurvePoints = std::vector<CurvePoint>;

struct RadiusPoint {
  std::size_t radius = 0;
  double recall = 0.0;
  double precision = 0.0;
};

// Query-averaged recall and precision of the Hamming ball of each radius
// 0..bits. An empty ball scores precision 1. Queries with no relevant item
// are skipped.
std::vector<RadiusPoint> precision_recall_by_radius(const std::vector<RankedResult>& rankings,
                                                    const RelevanceJudge& judge, std::size_t bits);

// The same sweep as (recall, precision) points; a radius whose mean recall
// does not exceed the previous point's is dropped so x is strictly increasing.
CurvePoints precision_recall_curve(const std::vector<RankedResult>& rankings, const RelevanceJudge& judge,
                                   std::size_t bits);

// Mean over all queries of (#relevant in top R) / min(R, ranking length).
CurvePoints precision_at_top_r(const std::vector<RankedResult>& rankings, const RelevanceJudge& judge,
                               std::span<const std::size_t> grid);

void save_curve_csv(const std::filesystem::path& path, const CurvePoints& points);

}  // namespace chn
