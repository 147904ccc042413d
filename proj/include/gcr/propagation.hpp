#pragma once

#include "gcr/config.hpp"
#include "gcr/feature_store.hpp"
#include "gcr/graph.hpp"

#include <functional>

namespace gcr {

// One graph-convolution step with identity weights:
//   out = D_row^{-1/2} A D_col^{-1/2} X
// evaluated row by row over the sparse entries of A.
Matrix propagate_once(const Matrix& x, const SimilarityGraph& g, unsigned threads = 1);

// alpha * propagate_once(x, global) + (1 - alpha) * propagate_once(x, cross).
// A graph whose coefficient is exactly zero is not touched.
Matrix fused_step(const Matrix& x, const SimilarityGraph& global, const SimilarityGraph& cross,
                  double alpha, unsigned threads = 1);

// Called after each iteration with the 1-based iteration index and the
// features it produced (after renormalization, when enabled).
using IterationObserver = std::function<void(int iteration, const Matrix& features)>;

// Iterated re-ranking. Every iteration rebuilds both neighbor structures and
// both graphs from the current features, applies the fused update, then
// optionally rescales rows to unit length. Metadata is carried through.
//
// gcr uses the non-symmetric graphs, gcr_sym symmetrizes both graphs before
// taking degrees, and gcr_local replaces the global sparse graphs with one
// dense kernel matrix per row over that row's neighborhood. All three ignore
// cfg.variant; rerank dispatches on it.
FeatureSet gcr(const FeatureSet& fs, const GcrConfig& cfg, unsigned threads = 1,
               const IterationObserver& observer = {});
FeatureSet gcr_sym(const FeatureSet& fs, const GcrConfig& cfg, unsigned threads = 1,
                   const IterationObserver& observer = {});
FeatureSet gcr_local(const FeatureSet& fs, const GcrConfig& cfg, unsigned threads = 1,
                     const IterationObserver& observer = {});

FeatureSet rerank(const FeatureSet& fs, const GcrConfig& cfg, unsigned threads = 1,
                  const IterationObserver& observer = {});

}  // namespace gcr
