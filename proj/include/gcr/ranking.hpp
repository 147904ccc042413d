#pragma once

#include "gcr/feature_store.hpp"

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace gcr {

// Gallery rows of one query, nearest first (squared Euclidean distance, then
// row index). Rows removed by the evaluation protocol are listed separately.
struct RankedList {
  Eigen::Index query_index = 0;
  std::vector<Eigen::Index> gallery_order;
  std::vector<double> sq_dists;  // aligned with gallery_order
  std::vector<Eigen::Index> excluded;
};

// Protocol: a gallery row is excluded for a query when it is a distractor
// (person_id -1) or shares both person_id and camera_id with the query.
bool excluded_for(const RowMeta& query, const RowMeta& gallery);

std::vector<RankedList> rank(const FeatureSet& fs, unsigned threads = 1);

// Average precision of one ranked list given its relevance flags (excluded
// rows already removed): mean over hits of (hits so far) / rank. 0 when there
// are no hits.
double average_precision(std::span<const bool> relevant);

struct EvalOptions {
  std::size_t cmc_length = 50;
  unsigned threads = 1;
};

struct EvalReport {
  std::vector<Eigen::Index> evaluated_queries;  // row indices
  std::vector<double> per_query_ap;             // aligned with evaluated_queries
  std::vector<double> cmc;
  double rank1 = 0.0;
  double map = 0.0;
  std::vector<Eigen::Index> skipped_queries;  // no valid positives
  std::map<std::string, double> timings_ms;
};

EvalReport evaluate(const FeatureSet& fs, const EvalOptions& opts = {});

// Builds cmc / rank1 / map from per-query results. first_hit[q] is the
// 0-based position of the first relevant row, or -1 if there is none.
void summarize(EvalReport& report, std::span<const Eigen::Index> first_hit,
               std::size_t cmc_length);

nlohmann::json to_json(const EvalReport& report, bool include_timings = true);
std::string to_table(const EvalReport& report);

// CSV `query_index,rank,gallery_index,distance` with true Euclidean distances
// and 1-based ranks, the first `top` entries per query.
void write_ranked_lists_csv(const std::vector<RankedList>& lists, std::size_t top,
                            const std::filesystem::path& path);

}  // namespace gcr
