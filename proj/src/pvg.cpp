#include "gcr/pvg.hpp"

#include "gcr/error.hpp"
#include "gcr/parallel.hpp"

#include <Eigen/Cholesky>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <map>
#include <utility>

namespace gcr {

using Index = Eigen::Index;

std::string_view to_string(PvgMethod m) { return m == PvgMethod::kMean ? "mean" : "ridge"; }

std::optional<PvgMethod> parse_pvg_method(std::string_view s) {
  if (s == "mean") return PvgMethod::kMean;
  if (s == "ridge") return PvgMethod::kRidge;
  return std::nullopt;
}

void PvgConfig::validate() const {
  if (method == PvgMethod::kRidge && !(lambda_p > 0.0 && std::isfinite(lambda_p))) {
    throw Error(ErrorCode::kInvalidArgument, "lambda_p must be a positive finite number");
  }
}

namespace {

struct Grouping {
  // group id per row, groups numbered by first appearance
  std::vector<Index> group_of_row;
  std::vector<std::vector<Index>> members;
};

Grouping group_tracklets(const FeatureSet& fs) {
  Grouping g;
  std::map<std::pair<std::int64_t, std::int64_t>, Index> ids;
  g.group_of_row.reserve(fs.meta().size());
  for (Index i = 0; i < fs.rows(); ++i) {
    const RowMeta& m = fs.meta(i);
    const auto [it, inserted] =
        ids.try_emplace({m.camera_id, m.tracklet_id}, static_cast<Index>(g.members.size()));
    if (inserted) g.members.emplace_back();
    g.members[static_cast<std::size_t>(it->second)].push_back(i);
    g.group_of_row.push_back(it->second);
  }
  return g;
}

std::vector<RowMeta> group_meta(const FeatureSet& fs, const Grouping& g) {
  std::vector<RowMeta> meta;
  meta.reserve(g.members.size());
  for (const auto& rows : g.members) meta.push_back(fs.meta(rows.front()));
  return meta;
}

Eigen::RowVectorXd group_mean(const Matrix& x, const std::vector<Index>& rows) {
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(x.cols());
  for (Index r : rows) sum += x.row(r);
  return sum / static_cast<double>(rows.size());
}

}  // namespace

ProfileSet mean_profile(const FeatureSet& fs) {
  const Grouping g = group_tracklets(fs);
  Matrix out(static_cast<Index>(g.members.size()), fs.dim());
  for (std::size_t p = 0; p < g.members.size(); ++p) {
    out.row(static_cast<Index>(p)) = group_mean(fs.data(), g.members[p]);
  }
  return {FeatureSet(std::move(out), group_meta(fs, g)), g.members, {}};
}

std::vector<double> margin_labels(std::span<const Index> group_sizes, std::size_t target) {
  if (target >= group_sizes.size()) {
    throw Error(ErrorCode::kInvalidArgument, "margin_labels: target tracklet out of range");
  }
  Index n_z = 0;
  for (Index s : group_sizes) {
    if (s < 1) throw Error(ErrorCode::kInvalidArgument, "margin_labels: empty tracklet");
    n_z += s;
  }
  const double neg = -1.0 / static_cast<double>(n_z);
  const double pos = 1.0 / static_cast<double>(group_sizes[target]) + neg;
  std::vector<double> z;
  z.reserve(static_cast<std::size_t>(n_z));
  for (std::size_t c = 0; c < group_sizes.size(); ++c) {
    z.insert(z.end(), static_cast<std::size_t>(group_sizes[c]), c == target ? pos : neg);
  }
  return z;
}

CameraRidgeSolution solve_camera_ridge(const Matrix& camera_rows,
                                       std::span<const Index> tracklet_of_row,
                                       Index num_tracklets, double lambda_p) {
  const Index n_z = camera_rows.rows();
  const Index d = camera_rows.cols();
  if (static_cast<Index>(tracklet_of_row.size()) != n_z || n_z == 0 || num_tracklets < 1) {
    throw Error(ErrorCode::kInvalidArgument, "solve_camera_ridge: inconsistent tracklet map");
  }
  if (!(lambda_p > 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda_p must be positive");

  Matrix sums = Matrix::Zero(num_tracklets, d);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(num_tracklets);
  for (Index r = 0; r < n_z; ++r) {
    const Index c = tracklet_of_row[static_cast<std::size_t>(r)];
    if (c < 0 || c >= num_tracklets) {
      throw Error(ErrorCode::kInvalidArgument, "solve_camera_ridge: tracklet index out of range");
    }
    sums.row(c) += camera_rows.row(r);
    counts[c] += 1.0;
  }
  const Eigen::RowVectorXd camera_mean = camera_rows.colwise().sum() / static_cast<double>(n_z);

  CameraRidgeSolution sol;
  sol.targets.resize(num_tracklets, d);
  for (Index c = 0; c < num_tracklets; ++c) {
    if (counts[c] == 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "solve_camera_ridge: empty tracklet");
    }
    sol.targets.row(c) = sums.row(c) / counts[c] - camera_mean;
  }

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(camera_rows.transpose());
  gram.diagonal().array() += static_cast<double>(n_z) * lambda_p;
  const Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kZeroRow, "ridge Gram matrix is not positive definite");
  }
  const Eigen::MatrixXd rhs = sol.targets.transpose();
  sol.directions = llt.solve(rhs).transpose();
  return sol;
}

ProfileSet ridge_profile(const FeatureSet& fs, const PvgConfig& cfg, unsigned threads) {
  cfg.validate();
  const Grouping g = group_tracklets(fs);
  const Matrix& x = fs.data();

  // camera id -> profile (group) ids in that camera
  std::map<std::int64_t, std::vector<Index>> cameras;
  for (std::size_t p = 0; p < g.members.size(); ++p) {
    cameras[fs.meta(g.members[p].front()).camera_id].push_back(static_cast<Index>(p));
  }
  std::vector<std::pair<std::int64_t, std::vector<Index>>> work(cameras.begin(), cameras.end());

  Matrix out(static_cast<Index>(g.members.size()), fs.dim());
  std::vector<std::vector<std::string>> warnings(work.size());

  parallel_for(work.size(), threads, [&](std::size_t w) {
    const auto& [camera, groups] = work[w];
    Index n_z = 0;
    for (Index p : groups) n_z += static_cast<Index>(g.members[static_cast<std::size_t>(p)].size());

    Matrix rows(n_z, x.cols());
    std::vector<Index> tracklet_of_row;
    tracklet_of_row.reserve(static_cast<std::size_t>(n_z));
    Index r = 0;
    for (std::size_t c = 0; c < groups.size(); ++c) {
      for (Index src : g.members[static_cast<std::size_t>(groups[c])]) {
        rows.row(r++) = x.row(src);
        tracklet_of_row.push_back(static_cast<Index>(c));
      }
    }

    const CameraRidgeSolution sol = solve_camera_ridge(
        rows, tracklet_of_row, static_cast<Index>(groups.size()), cfg.lambda_p);

    for (std::size_t c = 0; c < groups.size(); ++c) {
      const Index p = groups[c];
      const auto& members = g.members[static_cast<std::size_t>(p)];
      const Eigen::RowVectorXd mean = group_mean(x, members);
      const double target_norm = sol.targets.row(static_cast<Index>(c)).norm();
      const double v_norm = sol.directions.row(static_cast<Index>(c)).norm();
      const bool degenerate = groups.size() == 1 || target_norm <= 1e-12 * mean.norm() ||
                              !(v_norm > 0.0);
      if (!degenerate) {
        out.row(p) = sol.directions.row(static_cast<Index>(c)) / v_norm;
        continue;
      }
      const RowMeta& m = fs.meta(members.front());
      warnings[w].push_back("camera " + std::to_string(camera) + " tracklet " +
                            std::to_string(m.tracklet_id) +
                            ": ridge target vanishes, using mean profile");
      const double mean_norm = mean.norm();
      out.row(p) = mean_norm > 0.0 ? Eigen::RowVectorXd(mean / mean_norm) : mean;
    }
  });

  ProfileSet ps{FeatureSet(std::move(out), group_meta(fs, g)), g.members, {}};
  for (auto& ws : warnings) {
    for (auto& msg : ws) {
      spdlog::warn("pvg: {}", msg);
      ps.warnings.push_back(std::move(msg));
    }
  }
  return ps;
}

ProfileSet pvg(const FeatureSet& fs, const PvgConfig& cfg, unsigned threads) {
  cfg.validate();
  return cfg.method == PvgMethod::kMean ? mean_profile(fs) : ridge_profile(fs, cfg, threads);
}

void save_profiles(const ProfileSet& ps, const std::filesystem::path& features,
                   const std::filesystem::path& meta, const std::filesystem::path& provenance) {
  save_features(ps.profiles, features, meta);
  nlohmann::json j;
  j["profiles"] = nlohmann::json::array();
  for (std::size_t p = 0; p < ps.provenance.size(); ++p) {
    j["profiles"].push_back({{"index", p}, {"sources", ps.provenance[p]}});
  }
  j["warnings"] = ps.warnings;
  std::ofstream out(provenance);
  if (!out) throw Error(ErrorCode::kIo, "cannot open for writing: " + provenance.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + provenance.string());
}

}  // namespace gcr
