#include "gcr/graph.hpp"

#include "gcr/error.hpp"
#include "gcr/parallel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace gcr {

namespace {

// Below this ratio of |x-y|^2 to |x|^2 + |y|^2 the Gram expansion loses too
// many digits; recompute those pairs directly.
constexpr double kCancellationGuard = 1e-4;

// Row block height for the all-pairs sweeps. Fixed so that every pair is
// evaluated by the same GEMM shape no matter how many threads run.
constexpr Index kPanelRows = 512;

inline double refine(double gram_value, double sq_a, double sq_b, const double* a,
                     const double* b, Index dim) {
  const double sum = sq_a + sq_b;
  const double d = sum - 2.0 * gram_value;
  if (d < kCancellationGuard * sum) return sq_dist_direct(a, b, dim);
  return d;
}

Vector row_sq_norms(const Matrix& x) { return x.rowwise().squaredNorm(); }

// The same storage seen as a column-major d x n matrix. Eigen's GEMM runs
// noticeably faster on A^T B with column-major operands than on the
// equivalent row-major product.
Eigen::Map<const Eigen::MatrixXd> columns_view(const Matrix& x) {
  return {x.data(), x.cols(), x.rows()};
}

// Fixed-capacity max-heaps (one per row) ordered by `closer`, stored flat.
class TopKBank {
 public:
  TopKBank(Index rows, int capacity)
      : capacity_(static_cast<std::size_t>(std::max(capacity, 0))),
        slots_(static_cast<std::size_t>(rows) * capacity_),
        sizes_(static_cast<std::size_t>(rows), 0),
        worst_(static_cast<std::size_t>(rows), std::numeric_limits<double>::infinity()) {}

  void offer(Index row, double d, Index candidate) {
    const auto r = static_cast<std::size_t>(row);
    if (capacity_ == 0 || d > worst_[r]) return;
    Neighbor* heap = slots_.data() + r * capacity_;
    std::size_t& size = sizes_[r];
    const Neighbor item{candidate, d};
    if (size < capacity_) {
      heap[size++] = item;
      std::push_heap(heap, heap + size, closer);
      if (size == capacity_) worst_[r] = heap[0].sq_dist;
      return;
    }
    if (!closer(item, heap[0])) return;
    std::pop_heap(heap, heap + size, closer);
    heap[size - 1] = item;
    std::push_heap(heap, heap + size, closer);
    worst_[r] = heap[0].sq_dist;
  }

  std::span<const Neighbor> items(Index row) const {
    const auto r = static_cast<std::size_t>(row);
    return {slots_.data() + r * capacity_, sizes_[r]};
  }

 private:
  std::size_t capacity_;
  std::vector<Neighbor> slots_;
  std::vector<std::size_t> sizes_;
  std::vector<double> worst_;
};

NeighborLists merge_banks(const std::vector<TopKBank>& banks, Index rows, int k) {
  NeighborLists out(static_cast<std::size_t>(rows));
  for (Index i = 0; i < rows; ++i) {
    auto& list = out[static_cast<std::size_t>(i)];
    for (const auto& bank : banks) {
      const auto items = bank.items(i);
      list.insert(list.end(), items.begin(), items.end());
    }
    std::sort(list.begin(), list.end(), closer);
    if (list.size() > static_cast<std::size_t>(k)) list.resize(static_cast<std::size_t>(k));
  }
  return out;
}

int clamp_k(int k, Index rows, const char* what) {
  if (k < 0) throw Error(ErrorCode::kInvalidArgument, std::string(what) + " must be >= 0");
  const Index pool = rows - 1;
  if (k > pool) {
    spdlog::warn("{}={} exceeds the {} available candidates; clamping", what, k, pool);
    return static_cast<int>(pool);
  }
  return k;
}

}  // namespace

double sq_dist_direct(const double* a, const double* b, Index dim) {
  double s = 0.0;
  for (Index m = 0; m < dim; ++m) {
    const double t = a[m] - b[m];
    s += t * t;
  }
  return s;
}

Matrix cross_sq_dist(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "cross_sq_dist: column counts differ");
  }
  const Vector sa = row_sq_norms(a);
  const Vector sb = row_sq_norms(b);
  Eigen::MatrixXd gram(a.rows(), b.rows());
  gram.noalias() = columns_view(a).transpose() * columns_view(b);
  Matrix out(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.rows(); ++j) {
      out(i, j) = refine(gram(i, j), sa[i], sb[j], a.row(i).data(), b.row(j).data(), a.cols());
    }
  }
  return out;
}

void pairwise_sq_dist(const Matrix& x, Index block,
                      const std::function<void(Index, const Matrix&)>& sink) {
  if (block < 1) throw Error(ErrorCode::kInvalidArgument, "block must be >= 1");
  const Index n = x.rows();
  for (Index r0 = 0; r0 < n; r0 += block) {
    const Index len = std::min(block, n - r0);
    Matrix values = cross_sq_dist(x.middleRows(r0, len), x);
    for (Index i = 0; i < len; ++i) values(i, r0 + i) = 0.0;
    sink(r0, values);
  }
}

std::vector<std::int64_t> camera_ids(const FeatureSet& fs) {
  std::vector<std::int64_t> cams;
  cams.reserve(fs.meta().size());
  for (const auto& m : fs.meta()) cams.push_back(m.camera_id);
  return cams;
}

KnnLists knn_search(const Matrix& x, std::span<const std::int64_t> cameras, int k_global,
                    int k_cross, unsigned threads) {
  const Index n = x.rows();
  if (static_cast<Index>(cameras.size()) != n) {
    throw Error(ErrorCode::kRowCountMismatch, "knn_search: camera list size differs from rows");
  }
  k_global = clamp_k(k_global, n, "k_g");
  k_cross = clamp_k(k_cross, n, "k_c");

  const Vector sq = row_sq_norms(x);
  const auto xt = columns_view(x);
  const Index dim = x.cols();
  const Index panels = (n + kPanelRows - 1) / kPanelRows;
  const unsigned workers =
      static_cast<unsigned>(std::min<Index>(std::max(1u, threads), std::max<Index>(panels, 1)));

  std::vector<TopKBank> global_banks;
  std::vector<TopKBank> cross_banks;
  for (unsigned w = 0; w < workers; ++w) {
    global_banks.emplace_back(n, k_global);
    cross_banks.emplace_back(n, k_cross);
  }
  const bool want_global = k_global > 0;
  const bool want_cross = k_cross > 0;

  // Panel p covers rows [r0, r1) against columns [r0, n); each unordered
  // pair is evaluated exactly once and offered to both endpoints.
  parallel_for_worker(
      static_cast<std::size_t>(panels), workers, [&](std::size_t p, unsigned w) {
        if (!want_global && !want_cross) return;
        const Index r0 = static_cast<Index>(p) * kPanelRows;
        const Index len = std::min(kPanelRows, n - r0);
        // Column-major output is markedly faster for this GEMM shape; walk
        // it column by column.
        Eigen::MatrixXd gram(len, n - r0);
        gram.noalias() = xt.middleCols(r0, len).transpose() * xt.middleCols(r0, n - r0);
        TopKBank& gbank = global_banks[w];
        TopKBank& cbank = cross_banks[w];
        for (Index lj = 1; lj < n - r0; ++lj) {
          const Index j = r0 + lj;
          const double* xj = x.row(j).data();
          const double* gcol = gram.col(lj).data();
          const std::int64_t cam_j = cameras[static_cast<std::size_t>(j)];
          const Index rows_before_j = std::min(len, lj);
          for (Index li = 0; li < rows_before_j; ++li) {
            const Index i = r0 + li;
            const double d = refine(gcol[li], sq[i], sq[j], x.row(i).data(), xj, dim);
            if (want_global) {
              gbank.offer(i, d, j);
              gbank.offer(j, d, i);
            }
            if (want_cross && cameras[static_cast<std::size_t>(i)] != cam_j) {
              cbank.offer(i, d, j);
              cbank.offer(j, d, i);
            }
          }
        }
      });

  KnnLists out;
  if (want_global) out.global = merge_banks(global_banks, n, k_global);
  else if (k_global == 0) out.global.assign(static_cast<std::size_t>(n), {});
  if (want_cross) out.cross = merge_banks(cross_banks, n, k_cross);
  else if (k_cross == 0) out.cross.assign(static_cast<std::size_t>(n), {});
  return out;
}

NeighborLists knn_global(const FeatureSet& fs, int k, unsigned threads) {
  const auto cams = camera_ids(fs);
  return knn_search(fs.data(), cams, k, 0, threads).global;
}

NeighborLists knn_cross_camera(const FeatureSet& fs, int k, unsigned threads) {
  const auto cams = camera_ids(fs);
  return knn_search(fs.data(), cams, 0, k, threads).cross;
}

SimilarityGraph SimilarityGraph::from_rows(std::vector<std::vector<GraphEntry>> rows) {
  SimilarityGraph g;
  const auto n = static_cast<Index>(rows.size());
  g.offsets_.assign(1, 0);
  g.offsets_.reserve(rows.size() + 1);
  g.row_degree_ = Vector::Zero(n);
  g.col_degree_ = Vector::Zero(n);
  std::size_t total = 0;
  for (const auto& r : rows) total += r.size();
  g.entries_.reserve(total);
  for (Index i = 0; i < n; ++i) {
    auto& r = rows[static_cast<std::size_t>(i)];
    std::sort(r.begin(), r.end(),
              [](const GraphEntry& a, const GraphEntry& b) { return a.col < b.col; });
    double deg = 0.0;
    for (const auto& e : r) {
      if (e.col < 0 || e.col >= n) {
        throw Error(ErrorCode::kInvalidArgument, "graph entry column out of range");
      }
      deg += e.weight;
      g.col_degree_[e.col] += e.weight;
      g.entries_.push_back(e);
    }
    g.row_degree_[i] = deg;
    g.offsets_.push_back(g.entries_.size());
  }
  return g;
}

double SimilarityGraph::weight(Index i, Index j) const {
  const auto r = row(i);
  const auto it = std::lower_bound(r.begin(), r.end(), j,
                                   [](const GraphEntry& e, Index col) { return e.col < col; });
  return (it != r.end() && it->col == j) ? it->weight : 0.0;
}

SimilarityGraph build_similarity(const Matrix& x, const NeighborLists& neighbors, double gamma) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::kInvalidArgument, "gamma must be positive");
  const Index n = x.rows();
  if (static_cast<Index>(neighbors.size()) != n) {
    throw Error(ErrorCode::kRowCountMismatch, "neighbor lists do not match row count");
  }
  std::vector<std::vector<GraphEntry>> rows(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    auto& r = rows[static_cast<std::size_t>(i)];
    const auto& nb = neighbors[static_cast<std::size_t>(i)];
    r.reserve(nb.size() + 1);
    r.push_back({i, 1.0});
    for (const auto& e : nb) {
      if (e.index < 0 || e.index >= n || e.index == i) {
        throw Error(ErrorCode::kInvalidArgument,
                    "invalid neighbor index " + std::to_string(e.index) + " for row " +
                        std::to_string(i));
      }
      const double d = sq_dist_direct(x.row(i).data(), x.row(e.index).data(), x.cols());
      r.push_back({e.index, std::exp(-d / gamma)});
    }
  }
  return SimilarityGraph::from_rows(std::move(rows));
}

SimilarityGraph build_similarity(const FeatureSet& fs, const NeighborLists& neighbors,
                                 double gamma) {
  return build_similarity(fs.data(), neighbors, gamma);
}

SimilarityGraph symmetrize(const SimilarityGraph& g) {
  const Index n = g.size();
  std::vector<std::vector<GraphEntry>> transposed(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (const auto& e : g.row(i)) transposed[static_cast<std::size_t>(e.col)].push_back({i, e.weight});
  }
  std::vector<std::vector<GraphEntry>> rows(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    // Both inputs are sorted by column; merge them.
    const auto a = g.row(i);
    const auto& b = transposed[static_cast<std::size_t>(i)];
    auto& out = rows[static_cast<std::size_t>(i)];
    std::size_t ia = 0, ib = 0;
    while (ia < a.size() || ib < b.size()) {
      if (ib == b.size() || (ia < a.size() && a[ia].col < b[ib].col)) {
        out.push_back({a[ia].col, a[ia].weight / 2.0});
        ++ia;
      } else if (ia == a.size() || b[ib].col < a[ia].col) {
        out.push_back({b[ib].col, b[ib].weight / 2.0});
        ++ib;
      } else {
        out.push_back({a[ia].col, (a[ia].weight + b[ib].weight) / 2.0});
        ++ia;
        ++ib;
      }
    }
  }
  return SimilarityGraph::from_rows(std::move(rows));
}

void write_graph_csv(const SimilarityGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  out << "i,j,weight\n";
  char buf[64];
  for (Index i = 0; i < g.size(); ++i) {
    for (const auto& e : g.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", e.weight);
      out << i << ',' << e.col << ',' << buf << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

LocalGraph make_local_graph(const Matrix& x, Index center, std::span<const Neighbor> neighbors,
                            double gamma) {
  LocalGraph lg;
  lg.center = center;
  lg.members.reserve(neighbors.size() + 1);
  lg.members.push_back(center);
  for (const auto& nb : neighbors) lg.members.push_back(nb.index);
  const auto m = static_cast<Index>(lg.members.size());
  lg.weights.resize(m, m);
  for (Index u = 0; u < m; ++u) {
    lg.weights(u, u) = 1.0;
    const double* xu = x.row(lg.members[static_cast<std::size_t>(u)]).data();
    for (Index v = u + 1; v < m; ++v) {
      const double d = sq_dist_direct(xu, x.row(lg.members[static_cast<std::size_t>(v)]).data(),
                                      x.cols());
      const double w = std::exp(-d / gamma);
      lg.weights(u, v) = w;
      lg.weights(v, u) = w;
    }
  }
  return lg;
}

std::vector<LocalGraph> local_graphs(const FeatureSet& fs, int k, double gamma,
                                     bool camera_filter, unsigned threads) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::kInvalidArgument, "gamma must be positive");
  const NeighborLists nb =
      camera_filter ? knn_cross_camera(fs, k, threads) : knn_global(fs, k, threads);
  std::vector<LocalGraph> out(nb.size());
  parallel_for(nb.size(), threads, [&](std::size_t i) {
    out[i] = make_local_graph(fs.data(), static_cast<Index>(i), nb[i], gamma);
  });
  return out;
}

}  // namespace gcr
