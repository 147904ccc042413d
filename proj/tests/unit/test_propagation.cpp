#include <doctest.h>

#include "gcr/error.hpp"
#include "gcr/graph.hpp"
#include "gcr/propagation.hpp"
#include "support/dense_reference.hpp"
#include "support/generators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace gcr;

namespace {

SimilarityGraph identity_graph(Index n) {
  std::vector<std::vector<GraphEntry>> rows(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = {{i, 1.0}};
  return SimilarityGraph::from_rows(rows);
}

SimilarityGraph random_graph(std::mt19937_64& rng, Index n, int per_row) {
  std::uniform_real_distribution<double> w(0.01, 1.0);
  std::vector<std::vector<GraphEntry>> rows(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    std::set<Index> cols{i};
    for (int e = 0; e < per_row; ++e) cols.insert(static_cast<Index>(rng() % static_cast<std::uint64_t>(n)));
    for (Index c : cols) rows[static_cast<std::size_t>(i)].push_back({c, c == i ? 1.0 : w(rng)});
  }
  return SimilarityGraph::from_rows(rows);
}

Eigen::MatrixXd to_dense(const SimilarityGraph& g) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(g.size(), g.size());
  for (Index i = 0; i < g.size(); ++i)
    for (const auto& e : g.row(i)) a(i, e.col) = e.weight;
  return a;
}

GcrConfig config(int kg, int kc, double alpha, int t, GraphVariant v = GraphVariant::kNonSym) {
  GcrConfig c;
  c.k_global = kg;
  c.k_cross = kc;
  c.alpha = alpha;
  c.iterations = t;
  c.variant = v;
  return c;
}

FeatureSet duplicate_pair() {
  Matrix x(2, 3);
  x << 0.6, 0.8, 0.0, 0.6, 0.8, 0.0;
  return FeatureSet(x, gcr::testing::simple_meta(2, 2));
}

double mean_intra_distance(const Matrix& x, const std::vector<int>& label) {
  double sum = 0.0;
  int count = 0;
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = i + 1; j < x.rows(); ++j)
      if (label[static_cast<std::size_t>(i)] == label[static_cast<std::size_t>(j)]) {
        sum += (x.row(i) - x.row(j)).norm();
        ++count;
      }
  return sum / count;
}

}  // namespace

TEST_SUITE("propagation") {

TEST_CASE("identity graph leaves X unchanged") {
  std::mt19937_64 rng(41);
  const Matrix x = gcr::testing::random_matrix(rng, 9, 4);
  CHECK(propagate_once(x, identity_graph(9)) == x);
  CHECK(fused_step(x, identity_graph(9), identity_graph(9), 0.7) == x);
}

TEST_CASE("two identical rows fully connected average to the shared row") {
  Matrix x(2, 2);
  x << 0.3, -1.2, 0.3, -1.2;
  const auto g = SimilarityGraph::from_rows({{{0, 1.0}, {1, 1.0}}, {{0, 1.0}, {1, 1.0}}});
  const Matrix out = propagate_once(x, g);
  CHECK((out - x).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("random 100x8 matches the dense product") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix x = gcr::testing::random_matrix(rng, 100, 8);
    const auto g = random_graph(rng, 100, 6);
    const Eigen::MatrixXd want = oracle::normalized_product(to_dense(g), x);
    CHECK(gcr::testing::relative_frobenius(propagate_once(x, g, 3), want) <= 1e-10);
  }
}

TEST_CASE("fused step endpoints and mixture") {
  std::mt19937_64 rng(47);
  const Matrix x = gcr::testing::random_matrix(rng, 30, 5);
  const auto g = random_graph(rng, 30, 4);
  const auto c = random_graph(rng, 30, 2);
  CHECK(fused_step(x, g, c, 1.0) == propagate_once(x, g));
  CHECK(fused_step(x, g, c, 0.0) == propagate_once(x, c));
  const Matrix mix = 0.7 * propagate_once(x, g) + 0.3 * propagate_once(x, c);
  CHECK((fused_step(x, g, c, 0.7) - mix).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK_THROWS_AS(fused_step(x, g, c, 1.5), Error);
  CHECK_THROWS_AS(propagate_once(x, identity_graph(3)), Error);
}

TEST_CASE("output norm bound before renormalization") {
  std::mt19937_64 rng(53);
  const Matrix x = gcr::testing::random_matrix(rng, 60, 6);
  const int k = 5;
  const auto g = random_graph(rng, 60, k);
  const Matrix out = propagate_once(x, g);
  double max_norm = 0.0;
  for (Index i = 0; i < x.rows(); ++i) max_norm = std::max(max_norm, x.row(i).norm());
  const Vector& r = g.row_degree();
  const Vector& c = g.col_degree();
  for (Index i = 0; i < out.rows(); ++i) {
    CHECK(out.row(i).allFinite());
    CHECK(out.row(i).norm() <= std::sqrt(k + 1.0) * max_norm * (1 + 1e-12));
    double bound = 0.0, local_max = 0.0;
    for (const auto& e : g.row(i)) {
      bound += e.weight / std::sqrt(c[e.col]);
      local_max = std::max(local_max, x.row(e.col).norm());
    }
    CHECK(out.row(i).norm() <= local_max * bound / std::sqrt(r[i]) * (1 + 1e-12));
  }
}

TEST_CASE("single-row input is returned unchanged by every variant") {
  Matrix x(1, 3);
  x << 0.0, 0.6, 0.8;
  const FeatureSet fs(x, gcr::testing::simple_meta(1));
  for (auto v : {GraphVariant::kNonSym, GraphVariant::kSym, GraphVariant::kLocal}) {
    const FeatureSet out = rerank(fs, config(15, 3, 0.7, 1, v));
    CHECK((out.data() - x).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(out.meta() == fs.meta());
  }
}

TEST_CASE("duplicate pair stays put under every variant") {
  const FeatureSet fs = duplicate_pair();
  for (auto v : {GraphVariant::kNonSym, GraphVariant::kSym, GraphVariant::kLocal}) {
    const FeatureSet out = rerank(fs, config(1, 1, 0.7, 2, v));
    CHECK((out.data() - fs.data()).cwiseAbs().maxCoeff() <= 1e-15);
  }
  CHECK(gcr_sym(fs, config(1, 1, 0.7, 2)).data() == gcr::gcr(fs, config(1, 1, 0.7, 2)).data());
}

TEST_CASE("three separated clusters contract") {
  std::mt19937_64 rng(59);
  std::normal_distribution<double> noise(0.0, 0.05);
  Matrix x(30, 3);
  std::vector<int> label;
  for (Index i = 0; i < 30; ++i) {
    const int c = static_cast<int>(i % 3);
    label.push_back(c);
    for (Index m = 0; m < 3; ++m) x(i, m) = (m == c ? 1.0 : 0.0) + noise(rng);
  }
  l2_normalize_rows(x);
  const FeatureSet fs(x, gcr::testing::simple_meta(30, 2));
  const double before = mean_intra_distance(x, label);
  for (auto v : {GraphVariant::kNonSym, GraphVariant::kSym, GraphVariant::kLocal}) {
    const FeatureSet out = rerank(fs, config(9, 3, 0.7, 3, v));
    CHECK(mean_intra_distance(out.data(), label) < before);
  }
}

TEST_CASE("alpha = 1, T = 2 equals two manual global-only steps with a rebuild") {
  std::mt19937_64 rng(61);
  const FeatureSet fs = gcr::testing::random_feature_set(rng, {.rows = 40, .dim = 6, .cameras = 3});
  Matrix x = fs.data();
  for (int t = 0; t < 2; ++t) {
    const FeatureSet cur = fs.with_data(x);
    x = propagate_once(x, build_similarity(cur, knn_global(cur, 5), 0.2));
    l2_normalize_rows(x);
  }
  CHECK(gcr::gcr(fs, config(5, 2, 1.0, 2)).data() == x);
}

TEST_CASE("observer sees every iteration") {
  std::mt19937_64 rng(67);
  const FeatureSet fs = gcr::testing::random_feature_set(rng, {.rows = 25, .dim = 4});
  std::vector<int> seen;
  Matrix last;
  const FeatureSet out = gcr::gcr(fs, config(4, 2, 0.7, 3), 1, [&](int t, const Matrix& m) {
    seen.push_back(t);
    last = m;
  });
  CHECK(seen == std::vector<int>{1, 2, 3});
  CHECK(last == out.data());
}

TEST_CASE("symmetric variant on a 3-point line 0, 1, 2.1") {
  Matrix x(3, 1);
  x << 0.0, 1.0, 2.1;
  const FeatureSet fs(x, gcr::testing::simple_meta(3));
  auto cfg = config(1, 1, 1.0, 1);
  cfg.renormalize = false;
  cfg.gamma = 1.0;
  // 0 -> 1, 1 -> 0, 2 -> 1: row 1 is chosen by 2 but does not choose it back.
  const auto nb = knn_global(fs, 1);
  CHECK(nb[1][0].index == 0);
  CHECK(nb[2][0].index == 1);
  const auto g = build_similarity(fs, nb, 1.0);
  CHECK(g.row_degree() != g.col_degree());
  const auto s = symmetrize(g);
  CHECK(s.row_degree() == s.col_degree());

  const Matrix a = gcr::gcr(fs, cfg).data();
  const Matrix b = gcr_sym(fs, cfg).data();
  CHECK((a - b).cwiseAbs().maxCoeff() > 1e-3);
  const Eigen::MatrixXd dense = to_dense(g);
  const Eigen::MatrixXd want = oracle::normalized_product((dense + dense.transpose()) / 2.0, x);
  CHECK(gcr::testing::relative_frobenius(b, want) <= 1e-14);
}

TEST_CASE("dense oracle: every variant, each iteration, random sets") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 6; ++trial) {
    const Index n = 2 + static_cast<Index>(rng() % 60);
    const FeatureSet fs = gcr::testing::random_feature_set(
        rng, {.rows = n, .dim = 2 + static_cast<Index>(rng() % 10), .cameras = 2 + static_cast<int>(rng() % 3)});
    for (auto v : {GraphVariant::kNonSym, GraphVariant::kSym, GraphVariant::kLocal}) {
      for (bool renorm : {true, false}) {
        auto cfg = config(1 + static_cast<int>(rng() % 15), 1 + static_cast<int>(rng() % 4),
                          (rng() % 11) / 10.0, 3, v);
        cfg.gamma = 0.5;
        cfg.renormalize = renorm;
        const auto want = oracle::run(fs, cfg);
        std::vector<Matrix> got;
        rerank(fs, cfg, 2, [&](int, const Matrix& m) { got.push_back(m); });
        REQUIRE(got.size() == want.size());
        for (std::size_t t = 0; t < got.size(); ++t)
          CHECK(gcr::testing::relative_frobenius(got[t], want[t]) <= 1e-10);
      }
    }
  }
}

TEST_CASE("50-row symmetric variant against (A + A^T) / 2 oracle") {
  std::mt19937_64 rng(73);
  const FeatureSet fs = gcr::testing::random_feature_set(rng, {.rows = 50, .dim = 8, .cameras = 3});
  const auto cfg = config(15, 3, 0.7, 3, GraphVariant::kSym);
  const auto want = oracle::run(fs, cfg);
  CHECK(gcr::testing::relative_frobenius(gcr_sym(fs, cfg).data(), want.back()) <= 1e-10);
}

TEST_CASE("local window covering the whole set equals the dense symmetric graph") {
  std::mt19937_64 rng(79);
  const FeatureSet fs = gcr::testing::random_feature_set(rng, {.rows = 30, .dim = 6, .cameras = 3});
  const auto cfg = config(29, 3, 1.0, 3);
  const Matrix local = gcr_local(fs, cfg).data();
  const Matrix sym = gcr_sym(fs, cfg).data();
  CHECK((local - sym).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("permutation equivariance") {
  std::mt19937_64 rng(83);
  // Continuous random data: no distance ties, so neighbor sets are permutation-stable.
  const FeatureSet fs = gcr::testing::random_feature_set(rng, {.rows = 45, .dim = 5, .cameras = 3});
  std::vector<Index> perm(45);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix px(45, 5);
  std::vector<RowMeta> pm;
  for (Index i = 0; i < 45; ++i) {
    px.row(i) = fs.data().row(perm[static_cast<std::size_t>(i)]);
    pm.push_back(fs.meta(perm[static_cast<std::size_t>(i)]));
  }
  const FeatureSet pfs(px, pm);
  for (auto v : {GraphVariant::kNonSym, GraphVariant::kSym, GraphVariant::kLocal}) {
    const auto cfg = config(6, 2, 0.7, 3, v);
    const Matrix out = rerank(fs, cfg).data();
    const FeatureSet pout = rerank(pfs, cfg);
    for (Index i = 0; i < 45; ++i)
      CHECK((pout.data().row(i) - out.row(perm[static_cast<std::size_t>(i)])).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(pout.meta() == pm);
  }
}

TEST_CASE("alpha = 1 ignores camera ids") {
  std::mt19937_64 rng(89);
  const FeatureSet fs = gcr::testing::random_feature_set(rng, {.rows = 40, .dim = 5, .cameras = 3});
  auto meta = fs.meta();
  for (auto& m : meta) m.camera_id = static_cast<std::int64_t>(rng() % 7);
  const FeatureSet shuffled(fs.data(), meta);
  for (auto v : {GraphVariant::kNonSym, GraphVariant::kSym, GraphVariant::kLocal}) {
    const auto cfg = config(7, 3, 1.0, 3, v);
    CHECK(rerank(fs, cfg).data() == rerank(shuffled, cfg).data());
  }
}

TEST_CASE("thread count does not change results") {
  std::mt19937_64 rng(97);
  const FeatureSet fs = gcr::testing::random_feature_set(rng, {.rows = 700, .dim = 12, .cameras = 4});
  for (auto v : {GraphVariant::kNonSym, GraphVariant::kSym, GraphVariant::kLocal}) {
    const auto cfg = config(15, 3, 0.7, 2, v);
    const Matrix one = rerank(fs, cfg, 1).data();
    CHECK(rerank(fs, cfg, 1).data() == one);
    for (unsigned t : {2u, 4u, 8u}) CHECK((rerank(fs, cfg, t).data() - one).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("empty cross lists reduce the cross term to the identity") {
  std::mt19937_64 rng(101);
  const FeatureSet fs = gcr::testing::random_feature_set(rng, {.rows = 12, .dim = 3, .cameras = 1});
  auto cfg = config(4, 3, 0.0, 1);
  cfg.renormalize = false;
  CHECK(gcr::gcr(fs, cfg).data() == fs.data());
}

TEST_CASE("zero row after propagation is reported with iteration and row") {
  Matrix x(2, 2);
  x << 1, 0, -1, 0;
  const FeatureSet fs(x, gcr::testing::simple_meta(2));
  auto cfg = config(1, 1, 1.0, 1);
  cfg.gamma = 1e20;  // kernel weight rounds to 1, antipodal rows cancel
  try {
    gcr::gcr(fs, cfg);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kZeroRow);
    CHECK(std::string(e.what()).find("iteration 1") != std::string::npos);
  }
}

TEST_CASE("config validation") {
  GcrConfig c;
  CHECK_NOTHROW(c.validate());
  c.iterations = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.gamma = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.alpha = -0.1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.k_global = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(parse_graph_variant("sym") == GraphVariant::kSym);
  CHECK(parse_graph_variant("local") == GraphVariant::kLocal);
  CHECK(parse_graph_variant("nonsym") == GraphVariant::kNonSym);
  CHECK_FALSE(parse_graph_variant("dense").has_value());
}

}  // TEST_SUITE
