#pragma once

// Hand-computed average precision of short ranked relevance lists.

#include "gcr/feature_store.hpp"
#include "support/fraction.hpp"

#include <vector>

namespace gcr::testing {

struct ApFixture {
  std::vector<bool> relevant;
  Fraction ap;
};

inline const std::vector<ApFixture>& ap_fixtures() {
  static const std::vector<ApFixture> f = {
      {{true, false, true}, {5, 6}},                                   // (1 + 2/3) / 2
      {{true}, {1, 1}},
      {{false, true}, {1, 2}},
      {{false, false, false, true}, {1, 4}},
      {{true, true, false, false}, {1, 1}},
      {{false, true, false, true, false, true}, {1, 2}},               // (1/2 + 2/4 + 3/6) / 3
      {{true, false, false, true, false, false, false, true}, {5, 8}}, // (1 + 2/4 + 3/8) / 3
      {{false, false, true, true, false, false, false, false}, {5, 12}},
      {{false, false, false, false, false, false, false, false}, {0, 1}},
      {{false, true, true, false, true, true, false, true}, {367, 600}},
  };
  return f;
}

// hits-so-far / rank, summed and averaged in exact arithmetic.
inline Fraction exact_ap(const std::vector<bool>& relevant) {
  Fraction sum;
  std::int64_t hits = 0;
  for (std::size_t r = 0; r < relevant.size(); ++r) {
    if (!relevant[r]) continue;
    ++hits;
    sum = sum + Fraction(hits, static_cast<std::int64_t>(r + 1));
  }
  return hits == 0 ? Fraction(0) : sum / Fraction(hits);
}

// One query per fixture on a line, each fixture far from the others. Gallery
// row r of fixture q sits at distance r + 1 from its query; positives share
// the query's person id from another camera. Each query also gets a
// same-camera copy of itself and a distractor, both nearer than any gallery
// row and both excluded by the protocol.
inline FeatureSet ap_fixture_set(const std::vector<ApFixture>& fixtures, std::int64_t pid_offset = 0) {
  std::vector<double> xs;
  std::vector<RowMeta> meta;
  std::int64_t tracklet = 0;
  for (std::size_t q = 0; q < fixtures.size(); ++q) {
    const double base = 1000.0 * static_cast<double>(q);
    const std::int64_t pid = pid_offset + static_cast<std::int64_t>(q) * 100;
    xs.push_back(base);
    meta.push_back({pid, 0, tracklet++, Split::kQuery});
    xs.push_back(base + 0.25);
    meta.push_back({pid, 0, tracklet++, Split::kGallery});
    xs.push_back(base + 0.5);
    meta.push_back({-1, 1, tracklet++, Split::kGallery});
    const auto& rel = fixtures[q].relevant;
    for (std::size_t r = 0; r < rel.size(); ++r) {
      xs.push_back(base + static_cast<double>(r + 1));
      meta.push_back({rel[r] ? pid : pid + 1 + static_cast<std::int64_t>(r), 1, tracklet++, Split::kGallery});
    }
  }
  Matrix x(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = xs[i];
  return FeatureSet(x, meta);
}

}  // namespace gcr::testing
