#include "gcr/propagation.hpp"

#include "gcr/error.hpp"
#include "gcr/parallel.hpp"

#include <cassert>
#include <cmath>
#include <string>

namespace gcr {

namespace {

constexpr Index kRowsPerTask = 64;

// Per-row coefficients r_i^{-1/2} and c_j^{-1/2} of the degree normalization.
struct DegreeScales {
  Vector row;
  Vector col;
};

DegreeScales degree_scales(const SimilarityGraph& g) {
  return {g.row_degree().cwiseSqrt().cwiseInverse(), g.col_degree().cwiseSqrt().cwiseInverse()};
}

void check_sizes(const Matrix& x, const SimilarityGraph& g) {
  if (g.size() != x.rows()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "graph has " + std::to_string(g.size()) + " nodes but features have " +
                    std::to_string(x.rows()) + " rows");
  }
}

// out = sum_j A_ij * r_i^{-1/2} * c_j^{-1/2} * x_j, in column order.
template <typename Out>
void propagate_row(const Matrix& x, const SimilarityGraph& g, const DegreeScales& s, Index i,
                   Out&& out) {
  out.setZero();
  const double ri = s.row[i];
  for (const auto& e : g.row(i)) {
    out.noalias() += (e.weight * ri * s.col[e.col]) * x.row(e.col);
  }
}

template <typename Fn>
void for_row_blocks(Index n, unsigned threads, Fn&& fn) {
  const auto tasks = static_cast<std::size_t>((n + kRowsPerTask - 1) / kRowsPerTask);
  parallel_for(tasks, threads, [&](std::size_t t) {
    const Index r0 = static_cast<Index>(t) * kRowsPerTask;
    const Index r1 = std::min(n, r0 + kRowsPerTask);
    for (Index i = r0; i < r1; ++i) fn(i);
  });
}

void renormalize_or_throw(Matrix& x, int iteration) {
  for (Index i = 0; i < x.rows(); ++i) {
    const double norm = x.row(i).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw Error(ErrorCode::kZeroRow, "iteration " + std::to_string(iteration) +
                                           " produced a zero or non-finite row " +
                                           std::to_string(i));
    }
    x.row(i) /= norm;
  }
}

void check_finite(const Matrix& x, int iteration) {
  for (Index i = 0; i < x.rows(); ++i) {
    if (!x.row(i).allFinite()) {
      throw Error(ErrorCode::kZeroRow, "iteration " + std::to_string(iteration) +
                                           " produced a non-finite row " + std::to_string(i));
    }
  }
}

enum class GraphShape { kNonSym, kSym };

// Shared driver for the two sparse variants.
FeatureSet run_sparse(const FeatureSet& fs, const GcrConfig& cfg, GraphShape shape,
                      unsigned threads, const IterationObserver& observer) {
  cfg.validate();
  const auto cams = camera_ids(fs);
  const bool use_global = cfg.alpha > 0.0;
  const bool use_cross = cfg.alpha < 1.0;

  Matrix x = fs.data();
  for (int t = 1; t <= cfg.iterations; ++t) {
    const KnnLists knn = knn_search(x, cams, use_global ? cfg.k_global : 0,
                                    use_cross ? cfg.k_cross : 0, threads);
    SimilarityGraph global = build_similarity(x, knn.global, cfg.gamma);
    SimilarityGraph cross = build_similarity(x, knn.cross, cfg.gamma);
    if (shape == GraphShape::kSym) {
      global = symmetrize(global);
      cross = symmetrize(cross);
      assert(global.row_degree() == global.col_degree());
      assert(cross.row_degree() == cross.col_degree());
    }
    Matrix next = fused_step(x, global, cross, cfg.alpha, threads);
    if (cfg.renormalize) renormalize_or_throw(next, t);
    else check_finite(next, t);
    x = std::move(next);
    if (observer) observer(t, x);
  }
  return fs.with_data(std::move(x));
}

// Center row of D^{-1/2} W D^{-1/2} X_members for a symmetric local kernel W.
void local_center_row(const Matrix& x, const LocalGraph& lg, Eigen::Ref<Eigen::RowVectorXd> out) {
  const Vector degree = lg.weights.rowwise().sum();
  const double r0 = 1.0 / std::sqrt(degree[0]);
  out.setZero();
  for (Index v = 0; v < static_cast<Index>(lg.members.size()); ++v) {
    const double c = lg.weights(0, v) * r0 / std::sqrt(degree[v]);
    out.noalias() += c * x.row(lg.members[static_cast<std::size_t>(v)]);
  }
}

}  // namespace

Matrix propagate_once(const Matrix& x, const SimilarityGraph& g, unsigned threads) {
  check_sizes(x, g);
  const DegreeScales s = degree_scales(g);
  Matrix out(x.rows(), x.cols());
  for_row_blocks(x.rows(), threads, [&](Index i) { propagate_row(x, g, s, i, out.row(i)); });
  return out;
}

Matrix fused_step(const Matrix& x, const SimilarityGraph& global, const SimilarityGraph& cross,
                  double alpha, unsigned threads) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must lie in [0, 1]");
  }
  if (alpha == 1.0) return propagate_once(x, global, threads);
  if (alpha == 0.0) return propagate_once(x, cross, threads);
  check_sizes(x, global);
  check_sizes(x, cross);

  const DegreeScales sg = degree_scales(global);
  const DegreeScales sc = degree_scales(cross);
  Matrix out(x.rows(), x.cols());
  for_row_blocks(x.rows(), threads, [&](Index i) {
    Eigen::RowVectorXd a(x.cols());
    Eigen::RowVectorXd b(x.cols());
    propagate_row(x, global, sg, i, a);
    propagate_row(x, cross, sc, i, b);
    out.row(i) = alpha * a + (1.0 - alpha) * b;
  });
  return out;
}

FeatureSet gcr(const FeatureSet& fs, const GcrConfig& cfg, unsigned threads,
               const IterationObserver& observer) {
  return run_sparse(fs, cfg, GraphShape::kNonSym, threads, observer);
}

FeatureSet gcr_sym(const FeatureSet& fs, const GcrConfig& cfg, unsigned threads,
                   const IterationObserver& observer) {
  return run_sparse(fs, cfg, GraphShape::kSym, threads, observer);
}

FeatureSet gcr_local(const FeatureSet& fs, const GcrConfig& cfg, unsigned threads,
                     const IterationObserver& observer) {
  cfg.validate();
  const auto cams = camera_ids(fs);
  const bool use_global = cfg.alpha > 0.0;
  const bool use_cross = cfg.alpha < 1.0;
  const double alpha = cfg.alpha;

  Matrix x = fs.data();
  for (int t = 1; t <= cfg.iterations; ++t) {
    const KnnLists knn = knn_search(x, cams, use_global ? cfg.k_global : 0,
                                    use_cross ? cfg.k_cross : 0, threads);
    Matrix next(x.rows(), x.cols());
    // Every row reads the snapshot x and writes only its own output row.
    for_row_blocks(x.rows(), threads, [&](Index i) {
      const auto idx = static_cast<std::size_t>(i);
      Eigen::RowVectorXd a(x.cols());
      Eigen::RowVectorXd b(x.cols());
      if (use_global) {
        local_center_row(x, make_local_graph(x, i, knn.global[idx], cfg.gamma), a);
      }
      if (use_cross) {
        local_center_row(x, make_local_graph(x, i, knn.cross[idx], cfg.gamma), b);
      }
      if (!use_cross) next.row(i) = a;
      else if (!use_global) next.row(i) = b;
      else next.row(i) = alpha * a + (1.0 - alpha) * b;
    });
    if (cfg.renormalize) renormalize_or_throw(next, t);
    else check_finite(next, t);
    x = std::move(next);
    if (observer) observer(t, x);
  }
  return fs.with_data(std::move(x));
}

FeatureSet rerank(const FeatureSet& fs, const GcrConfig& cfg, unsigned threads,
                  const IterationObserver& observer) {
  switch (cfg.variant) {
    case GraphVariant::kNonSym:
      return gcr(fs, cfg, threads, observer);
    case GraphVariant::kSym:
      return gcr_sym(fs, cfg, threads, observer);
    case GraphVariant::kLocal:
      return gcr_local(fs, cfg, threads, observer);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown graph variant");
}

}  // namespace gcr
