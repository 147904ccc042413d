#pragma once

#include "gcr/feature_store.hpp"

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace gcr {

using Index = Eigen::Index;

struct Neighbor {
  Index index = 0;
  double sq_dist = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// Ordering used by every neighbor search: distance first, then row index.
inline bool closer(const Neighbor& a, const Neighbor& b) {
  return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
}

// neighbors[i] is sorted by `closer` and never contains i itself.
using NeighborLists = std::vector<std::vector<Neighbor>>;

// ---------------------------------------------------------------------------
// Squared Euclidean distances
// ---------------------------------------------------------------------------

// Straight sum of squared coordinate differences.
double sq_dist_direct(const double* a, const double* b, Index dim);

// All squared distances between rows of `a` and rows of `b`, as an
// a.rows() x b.rows() row-major block. Uses the Gram expansion
// |x|^2 + |y|^2 - 2<x,y> and falls back to the direct sum for pairs where
// cancellation would cost accuracy, so every value is within ~1e-10
// relative of the direct sum.
Matrix cross_sq_dist(const Matrix& a, const Matrix& b);

// Streams the n x n squared distance matrix of `x` in row blocks of at most
// `block` rows: sink(first_row, block_values). The diagonal is exactly zero.
// The full matrix is never held in memory.
void pairwise_sq_dist(const Matrix& x, Index block,
                      const std::function<void(Index first_row, const Matrix& values)>& sink);

// ---------------------------------------------------------------------------
// k-nearest-neighbor search (exact, blocked, self excluded)
// ---------------------------------------------------------------------------

struct KnnLists {
  NeighborLists global;  // n empty lists if k_global == 0
  NeighborLists cross;   // n empty lists if k_cross == 0
};

// One pass over all pairs producing both the global list (k_global nearest
// rows) and the cross-camera list (k_cross nearest rows whose camera differs)
// for every row. k values above n - 1 are clamped with a warning; a cross
// list is shorter than k_cross when the row has fewer candidates. Results do
// not depend on `threads`.
KnnLists knn_search(const Matrix& x, std::span<const std::int64_t> cameras,
                    int k_global, int k_cross, unsigned threads = 1);

NeighborLists knn_global(const FeatureSet& fs, int k, unsigned threads = 1);
NeighborLists knn_cross_camera(const FeatureSet& fs, int k, unsigned threads = 1);

std::vector<std::int64_t> camera_ids(const FeatureSet& fs);

// ---------------------------------------------------------------------------
// Sparse similarity graphs
// ---------------------------------------------------------------------------

struct GraphEntry {
  Index col = 0;
  double weight = 0.0;
};

// Sparse n x n nonnegative matrix in compressed-row form, columns sorted
// within each row, with cached row and column sums.
class SimilarityGraph {
 public:
  SimilarityGraph() = default;

  // Takes per-row entry lists (any column order, no duplicates).
  static SimilarityGraph from_rows(std::vector<std::vector<GraphEntry>> rows);

  Index size() const noexcept { return static_cast<Index>(offsets_.size()) - 1; }
  std::span<const GraphEntry> row(Index i) const {
    return {entries_.data() + offsets_[static_cast<std::size_t>(i)],
            entries_.data() + offsets_[static_cast<std::size_t>(i) + 1]};
  }
  std::size_t nnz() const noexcept { return entries_.size(); }

  // 0 when (i, j) is not stored.
  double weight(Index i, Index j) const;

  const Vector& row_degree() const noexcept { return row_degree_; }
  const Vector& col_degree() const noexcept { return col_degree_; }

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<GraphEntry> entries_;
  Vector row_degree_;
  Vector col_degree_;
};

// Gaussian-kernel graph: weight exp(-|x_i - x_j|^2 / gamma) for every j in
// neighbors[i], 1 on the diagonal, nothing else.
SimilarityGraph build_similarity(const Matrix& x, const NeighborLists& neighbors,
                                 double gamma);
SimilarityGraph build_similarity(const FeatureSet& fs, const NeighborLists& neighbors,
                                 double gamma);

// (A + A^T) / 2 over the union sparsity pattern. Exactly symmetric.
SimilarityGraph symmetrize(const SimilarityGraph& g);

// CSV `i,j,weight`, sorted by (i, j), 17 significant digits.
void write_graph_csv(const SimilarityGraph& g, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Local graphs
// ---------------------------------------------------------------------------

// Dense kernel matrix over a row and its neighbors. members[0] is the center,
// followed by its neighbors nearest first.
struct LocalGraph {
  Index center = 0;
  std::vector<Index> members;
  Eigen::MatrixXd weights;
};

LocalGraph make_local_graph(const Matrix& x, Index center,
                            std::span<const Neighbor> neighbors, double gamma);

// One LocalGraph per row, over its k nearest rows (or its k nearest rows from
// other cameras when camera_filter is set).
std::vector<LocalGraph> local_graphs(const FeatureSet& fs, int k, double gamma,
                                     bool camera_filter, unsigned threads = 1);

}  // namespace gcr
