#include "gcr/ranking.hpp"

#include "gcr/error.hpp"
#include "gcr/graph.hpp"
#include "gcr/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace gcr {

namespace {

// Large enough that the query x gallery GEMM runs near peak.
constexpr Index kQueriesPerTask = 256;

struct Split2 {
  std::vector<Index> queries;
  std::vector<Index> gallery;
};

Split2 split_rows(const FeatureSet& fs) {
  Split2 s;
  for (Index i = 0; i < fs.rows(); ++i) {
    (fs.meta(i).split == Split::kQuery ? s.queries : s.gallery).push_back(i);
  }
  if (s.queries.empty()) throw Error(ErrorCode::kNoQueries, "no query rows in feature set");
  if (s.gallery.empty()) throw Error(ErrorCode::kNoGallery, "no gallery rows in feature set");
  return s;
}

Matrix gather(const Matrix& x, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = x.row(rows[r]);
  return out;
}

// Ranks queries [q0, q1) of `s` and hands each list to sink.
template <typename Sink>
void rank_block(const FeatureSet& fs, const Split2& s, const Matrix& gallery, std::size_t q0,
                std::size_t q1, Sink&& sink) {
  const Matrix queries = gather(fs.data(), std::span(s.queries).subspan(q0, q1 - q0));
  const Matrix dist = cross_sq_dist(queries, gallery);
  std::vector<Index> order(s.gallery.size());
  for (std::size_t q = q0; q < q1; ++q) {
    const Index qi = static_cast<Index>(q - q0);
    const auto drow = dist.row(qi);
    std::iota(order.begin(), order.end(), Index{0});
    // gallery positions are in row order, so position order == index order
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
      return drow[a] < drow[b] || (drow[a] == drow[b] && a < b);
    });
    RankedList list;
    list.query_index = s.queries[q];
    const RowMeta& qm = fs.meta(list.query_index);
    list.gallery_order.reserve(order.size());
    list.sq_dists.reserve(order.size());
    for (Index pos : order) {
      const Index g = s.gallery[static_cast<std::size_t>(pos)];
      if (excluded_for(qm, fs.meta(g))) {
        list.excluded.push_back(g);
      } else {
        list.gallery_order.push_back(g);
        list.sq_dists.push_back(drow[pos]);
      }
    }
    std::sort(list.excluded.begin(), list.excluded.end());
    sink(q, std::move(list));
  }
}

}  // namespace

bool excluded_for(const RowMeta& query, const RowMeta& gallery) {
  if (gallery.person_id == -1) return true;
  return gallery.person_id == query.person_id && gallery.camera_id == query.camera_id;
}

std::vector<RankedList> rank(const FeatureSet& fs, unsigned threads) {
  const Split2 s = split_rows(fs);
  const Matrix gallery = gather(fs.data(), s.gallery);
  std::vector<RankedList> out(s.queries.size());
  const std::size_t tasks = (s.queries.size() + kQueriesPerTask - 1) / kQueriesPerTask;
  parallel_for(tasks, threads, [&](std::size_t t) {
    const std::size_t q0 = t * kQueriesPerTask;
    const std::size_t q1 = std::min(s.queries.size(), q0 + kQueriesPerTask);
    rank_block(fs, s, gallery, q0, q1,
               [&](std::size_t q, RankedList&& list) { out[q] = std::move(list); });
  });
  return out;
}

double average_precision(std::span<const bool> relevant) {
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < relevant.size(); ++r) {
    if (!relevant[r]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

void summarize(EvalReport& report, std::span<const Index> first_hit, std::size_t cmc_length) {
  const std::size_t evaluated = report.per_query_ap.size();
  report.cmc.assign(cmc_length, 0.0);
  std::vector<std::size_t> hits_at(cmc_length, 0);
  for (Index h : first_hit) {
    if (h >= 0 && static_cast<std::size_t>(h) < cmc_length) ++hits_at[static_cast<std::size_t>(h)];
  }
  std::size_t running = 0;
  for (std::size_t m = 0; m < cmc_length; ++m) {
    running += hits_at[m];
    report.cmc[m] = evaluated == 0 ? 0.0 : static_cast<double>(running) / static_cast<double>(evaluated);
  }
  report.rank1 = report.cmc.empty() ? 0.0 : report.cmc.front();
  double sum = 0.0;
  for (double ap : report.per_query_ap) sum += ap;
  report.map = evaluated == 0 ? 0.0 : sum / static_cast<double>(evaluated);
}

EvalReport evaluate(const FeatureSet& fs, const EvalOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  const Split2 s = split_rows(fs);
  const Matrix gallery = gather(fs.data(), s.gallery);

  const std::size_t nq = s.queries.size();
  std::vector<double> ap(nq, 0.0);
  std::vector<Index> first(nq, -1);
  std::vector<char> has_positive(nq, 0);

  // Only the ranks of the positives matter, so instead of sorting the whole
  // gallery each negative is binned against the sorted positives.
  const std::size_t tasks = (nq + kQueriesPerTask - 1) / kQueriesPerTask;
  parallel_for(tasks, opts.threads, [&](std::size_t t) {
    const std::size_t q0 = t * kQueriesPerTask;
    const std::size_t q1 = std::min(nq, q0 + kQueriesPerTask);
    const Matrix queries = gather(fs.data(), std::span(s.queries).subspan(q0, q1 - q0));
    const Matrix dist = cross_sq_dist(queries, gallery);
    std::vector<Neighbor> positives;
    std::vector<Index> negatives_before;
    for (std::size_t q = q0; q < q1; ++q) {
      const auto drow = dist.row(static_cast<Index>(q - q0));
      const RowMeta& qm = fs.meta(s.queries[q]);
      positives.clear();
      for (std::size_t g = 0; g < s.gallery.size(); ++g) {
        const RowMeta& gm = fs.meta(s.gallery[g]);
        if (gm.person_id == qm.person_id && !excluded_for(qm, gm)) {
          positives.push_back({static_cast<Index>(g), drow[static_cast<Index>(g)]});
        }
      }
      if (positives.empty()) continue;
      std::sort(positives.begin(), positives.end(), closer);
      negatives_before.assign(positives.size() + 1, 0);
      for (std::size_t g = 0; g < s.gallery.size(); ++g) {
        const RowMeta& gm = fs.meta(s.gallery[g]);
        if (gm.person_id == qm.person_id || excluded_for(qm, gm)) continue;
        const Neighbor item{static_cast<Index>(g), drow[static_cast<Index>(g)]};
        const auto it = std::upper_bound(positives.begin(), positives.end(), item, closer);
        ++negatives_before[static_cast<std::size_t>(it - positives.begin())];
      }
      double sum = 0.0;
      Index negatives = 0;
      for (std::size_t m = 0; m < positives.size(); ++m) {
        negatives += negatives_before[m];
        const Index position = static_cast<Index>(m) + negatives;
        if (m == 0) first[q] = position;
        sum += static_cast<double>(m + 1) / static_cast<double>(position + 1);
      }
      ap[q] = sum / static_cast<double>(positives.size());
      has_positive[q] = 1;
    }
  });

  EvalReport report;
  std::vector<Index> first_hits;
  for (std::size_t q = 0; q < nq; ++q) {
    if (!has_positive[q]) {
      report.skipped_queries.push_back(s.queries[q]);
      continue;
    }
    report.evaluated_queries.push_back(s.queries[q]);
    report.per_query_ap.push_back(ap[q]);
    first_hits.push_back(first[q]);
  }
  summarize(report, first_hits, std::min(opts.cmc_length, s.gallery.size()));
  report.timings_ms["evaluate"] =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

nlohmann::json to_json(const EvalReport& report, bool include_timings) {
  nlohmann::json j;
  j["rank1"] = report.rank1;
  j["mAP"] = report.map;
  j["cmc"] = report.cmc;
  j["num_queries"] = report.evaluated_queries.size();
  j["skipped_queries"] = report.skipped_queries.size();
  if (include_timings) j["timings_ms"] = report.timings_ms;
  return j;
}

std::string to_table(const EvalReport& report) {
  std::ostringstream out;
  char buf[128];
  auto line = [&](const char* key, const std::string& value) {
    std::snprintf(buf, sizeof buf, "%-18s %s\n", key, value.c_str());
    out << buf;
  };
  auto pct = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f%%", 100.0 * v);
    return std::string(b);
  };
  line("queries", std::to_string(report.evaluated_queries.size()));
  line("skipped_queries", std::to_string(report.skipped_queries.size()));
  line("Rank-1", pct(report.rank1));
  for (std::size_t m : {4u, 9u, 19u}) {
    if (m < report.cmc.size()) line(("Rank-" + std::to_string(m + 1)).c_str(), pct(report.cmc[m]));
  }
  line("mAP", pct(report.map));
  for (const auto& [stage, ms] : report.timings_ms) {
    std::snprintf(buf, sizeof buf, "%.1f ms", ms);
    line(("time:" + stage).c_str(), buf);
  }
  return out.str();
}

void write_ranked_lists_csv(const std::vector<RankedList>& lists, std::size_t top,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  out << "query_index,rank,gallery_index,distance\n";
  char buf[64];
  for (const auto& list : lists) {
    const std::size_t n = std::min(top, list.gallery_order.size());
    for (std::size_t r = 0; r < n; ++r) {
      std::snprintf(buf, sizeof buf, "%.17g", std::sqrt(list.sq_dists[r]));
      out << list.query_index << ',' << (r + 1) << ',' << list.gallery_order[r] << ',' << buf
          << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

}  // namespace gcr
