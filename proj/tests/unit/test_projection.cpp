#include <doctest.h>

#include "gcr/projection.hpp"
#include "support/generators.hpp"
#include "support/temp_dir.hpp"

#include <cmath>
#include <sstream>

using namespace gcr;
using Eigen::Index;

TEST_SUITE("projection") {

TEST_CASE("rank-1 data puts all variance on the first axis") {
  Eigen::RowVectorXd v(4);
  v << 0.5, -1.0, 2.0, 0.25;
  Matrix x(6, 4);
  for (Index i = 0; i < 6; ++i) x.row(i) = (static_cast<double>(i) - 2.0) * v;
  const auto coords = pca_2d(FeatureSet(x, gcr::testing::simple_meta(6)));
  CHECK(coords.rows() == 6);
  CHECK(coords.col(1).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(coords.col(0).cwiseAbs().maxCoeff() > 1.0);
}

TEST_CASE("two orthogonal clusters separate along x") {
  Matrix x(10, 3);
  for (Index i = 0; i < 10; ++i) {
    x.row(i) << (i < 5 ? 1.0 : 0.0), (i < 5 ? 0.0 : 1.0), 0.0;
  }
  const auto coords = pca_2d(FeatureSet(x, gcr::testing::simple_meta(10)));
  // The covariance has one nonzero eigenvalue along (1, -1, 0) / sqrt(2).
  for (Index i = 0; i < 10; ++i) {
    CHECK(std::abs(std::abs(coords(i, 0)) - std::sqrt(0.5)) <= 1e-12);
    CHECK(std::abs(coords(i, 1)) <= 1e-12);
  }
  CHECK(coords(0, 0) * coords(9, 0) < 0.0);
}

TEST_CASE("one output row per input row; CSV layout") {
  std::mt19937_64 rng(157);
  const FeatureSet fs = gcr::testing::random_feature_set(rng, {.rows = 33, .dim = 5});
  const auto coords = pca_2d(fs);
  CHECK(coords.rows() == 33);
  gcr::testing::TempDir dir;
  write_projection_csv(fs, coords, dir / "p.csv");
  std::istringstream in(gcr::testing::read_bytes(dir / "p.csv"));
  std::string line;
  int lines = 0;
  std::getline(in, line);
  CHECK(line == "index,x,y,person_id,camera_id");
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 33);
}

TEST_CASE("one-dimensional input has a zero second column") {
  Matrix x(3, 1);
  x << 1, 2, 4;
  const auto coords = pca_2d(FeatureSet(x, gcr::testing::simple_meta(3)));
  CHECK(coords.col(1).isZero(0.0));
}

}  // TEST_SUITE
