#include "chn/eval.hpp"

#include <algorithm>
#include <fstream>

#include "chn/net.hpp"

namespace chn {

bool relevant(std::span<const std::uint8_t> query_labels, std::span<const std::uint8_t> db_labels) {
  if (query_labels.size() != db_labels.size()) throw ShapeError("relevant: label dimensions differ");
  for (std::size_t k = 0; k < query_labels.size(); ++k)
    if (query_labels[k] && db_labels[k]) return true;
  return false;
}

RelevanceJudge::RelevanceJudge(const LabelMatrix& query_labels, const LabelMatrix& db_labels)
    : queries_(&query_labels), db_(&db_labels), totals_(query_labels.rows(), 0) {
  if (query_labels.cols() != db_labels.cols()) throw ShapeError("RelevanceJudge: label dimensions differ");
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(query_labels.rows()); ++q) {
    std::size_t count = 0;
    for (std::size_t d = 0; d < db_labels.rows(); ++d) count += relevant(query_labels.row(q), db_labels.row(d));
    totals_[q] = count;
  }
}

bool RelevanceJudge::operator()(std::size_t query, std::size_t item) const {
  return relevant(queries_->row(query), db_->row(item));
}

double average_precision(std::span<const std::uint8_t> ranked_relevance, std::size_t R, std::size_t total_relevant) {
  if (R == 0) throw ConfigError("average_precision: R must be positive");
  if (total_relevant == 0) return 0.0;
  const std::size_t depth = std::min(R, ranked_relevance.size());
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < depth; ++r) {
    if (!ranked_relevance[r]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return sum / static_cast<double>(std::min(R, total_relevant));
}

MapResult map_at_r(const std::vector<RankedResult>& rankings, const RelevanceJudge& judge, std::size_t R) {
  if (R == 0) throw ConfigError("map_at_r: R must be positive");
  if (rankings.size() != judge.query_count()) throw ShapeError("map_at_r: one ranking per query required");
  std::vector<double> ap(rankings.size(), 0.0);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(rankings.size()); ++q) {
    const auto& ranking = rankings[q];
    const std::size_t depth = std::min(R, ranking.size());
    std::vector<std::uint8_t> rel(depth);
    for (std::size_t r = 0; r < depth; ++r) rel[r] = judge(q, ranking[r].index);
    ap[q] = average_precision(rel, R, judge.total_relevant(q));
  }
  MapResult result;
  double sum = 0.0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    if (judge.total_relevant(q) == 0) {
      ++result.excluded_queries;
      continue;
    }
    sum += ap[q];
    ++result.eligible_queries;
  }
  if (result.eligible_queries == 0) throw MetricError("MAP undefined: no query has a relevant database item");
  result.map = sum / static_cast<double>(result.eligible_queries);
  return result;
}

std::vector<RadiusPoint> precision_recall_by_radius(const std::vector<RankedResult>& rankings,
                                                    const RelevanceJudge& judge, std::size_t bits) {
  if (rankings.size() != judge.query_count()) throw ShapeError("precision_recall: one ranking per query required");
  std::vector<RadiusPoint> out(bits + 1);
  for (std::size_t t = 0; t <= bits; ++t) out[t].radius = t;
  std::size_t used = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    const std::size_t total = judge.total_relevant(q);
    if (total == 0) continue;
    if (rankings[q].size() != judge.db_count())
      throw ShapeError("precision_recall: rankings must cover the whole database");
    // Counts of retrieved / relevant items at each exact distance.
    std::vector<std::size_t> at(bits + 1, 0), rel_at(bits + 1, 0);
    for (const auto& nb : rankings[q]) {
      if (nb.distance > bits) throw ShapeError("precision_recall: distance exceeds code length");
      ++at[nb.distance];
      rel_at[nb.distance] += judge(q, nb.index);
    }
    std::size_t retrieved = 0, hits = 0;
    for (std::size_t t = 0; t <= bits; ++t) {
      retrieved += at[t];
      hits += rel_at[t];
      out[t].recall += static_cast<double>(hits) / static_cast<double>(total);
      out[t].precision += retrieved == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(retrieved);
    }
    ++used;
  }
  if (used == 0) throw MetricError("precision-recall undefined: no query has a relevant database item");
  for (auto& p : out) {
    p.recall /= static_cast<double>(used);
    p.precision /= static_cast<double>(used);
  }
  return out;
}

CurvePoints precision_recall_curve(const std::vector<RankedResult>& rankings, const RelevanceJudge& judge,
                                   std::size_t bits) {
  CurvePoints curve;
  for (const auto& p : precision_recall_by_radius(rankings, judge, bits)) {
    if (!curve.empty() && p.recall <= curve.back().x) continue;
    curve.push_back({p.recall, p.precision});
  }
  return curve;
}

CurvePoints precision_at_top_r(const std::vector<RankedResult>& rankings, const RelevanceJudge& judge,
                               std::span<const std::size_t> grid) {
  if (rankings.size() != judge.query_count()) throw ShapeError("precision_at_top_r: one ranking per query required");
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (grid[g] == 0) throw ConfigError("precision_at_top_r: grid values must be positive");
    if (g > 0 && grid[g] <= grid[g - 1]) throw ConfigError("precision_at_top_r: grid must be strictly ascending");
  }
  CurvePoints curve;
  if (rankings.empty()) return curve;
  for (std::size_t R : grid) {
    double sum = 0.0;
    for (std::size_t q = 0; q < rankings.size(); ++q) {
      const std::size_t depth = std::min(R, rankings[q].size());
      if (depth == 0) continue;
      std::size_t hits = 0;
      for (std::size_t r = 0; r < depth; ++r) hits += judge(q, rankings[q][r].index);
      sum += static_cast<double>(hits) / static_cast<double>(depth);
    }
    curve.push_back({static_cast<double>(R), sum / static_cast<double>(rankings.size())});
  }
  return curve;
}

void save_curve_csv(const std::filesystem::path& path, const CurvePoints& points) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "x,y\n";
  for (const auto& p : points) out << format_exact(p.x) << ',' << format_exact(p.y) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace chn
