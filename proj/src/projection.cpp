#include "gcr/projection.hpp"

#include "gcr/error.hpp"

#include <Eigen/Eigenvalues>

#include <cstdio>
#include <fstream>

namespace gcr {

Eigen::MatrixX2d pca_2d(const FeatureSet& fs) {
  const Eigen::MatrixXd centered = fs.data().rowwise() - fs.data().colwise().mean();
  const double denom = fs.rows() > 1 ? static_cast<double>(fs.rows() - 1) : 1.0;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::kZeroRow, "eigen-decomposition of the covariance failed");
  }
  const Eigen::Index d = cov.rows();
  Eigen::MatrixX2d axes = Eigen::MatrixX2d::Zero(d, 2);
  // eigenvalues come back in increasing order
  for (Eigen::Index a = 0; a < std::min<Eigen::Index>(2, d); ++a) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - a);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    axes.col(a) = v;
  }
  return centered * axes;
}

void write_projection_csv(const FeatureSet& fs, const Eigen::MatrixX2d& coords,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  out << "index,x,y,person_id,camera_id\n";
  char buf[96];
  for (Eigen::Index i = 0; i < fs.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", coords(i, 0), coords(i, 1));
    out << i << ',' << buf << ',' << fs.meta(i).person_id << ',' << fs.meta(i).camera_id << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

}  // namespace gcr
