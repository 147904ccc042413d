#pragma once

#include "gcr/feature_store.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gcr {

enum class PvgMethod { kMean, kRidge };

std::string_view to_string(PvgMethod m);
std::optional<PvgMethod> parse_pvg_method(std::string_view s);

struct PvgConfig {
  double lambda_p = 10.0;
  PvgMethod method = PvgMethod::kRidge;

  void validate() const;
};

// One row per (camera_id, tracklet_id) group, in order of first appearance.
// provenance[p] lists the source rows of profile p in input order.
struct ProfileSet {
  FeatureSet profiles;
  std::vector<std::vector<Eigen::Index>> provenance;
  std::vector<std::string> warnings;
};

// Per-tracklet arithmetic mean of the member rows.
ProfileSet mean_profile(const FeatureSet& fs);

// Regression targets for one tracklet within its camera. group_sizes holds
// the image count of every tracklet in the camera; the returned vector has
// one entry per image, laid out tracklet after tracklet in group order:
// 1/n_c - 1/n_z for the target tracklet's images and -1/n_z elsewhere.
std::vector<double> margin_labels(std::span<const Eigen::Index> group_sizes, std::size_t target);

// The ridge system of one camera. Rows of `camera_rows` are that camera's
// images; tracklet_of_row[r] in [0, num_tracklets) assigns each image to a
// tracklet. Solves (X^T X + n_z * lambda * I) v_c = m_c for every tracklet
// with one Cholesky factorization, where m_c is the tracklet mean minus the
// camera mean.
struct CameraRidgeSolution {
  Matrix targets;     // num_tracklets x d, row c = m_c
  Matrix directions;  // num_tracklets x d, row c = v_c (not normalized)
};

CameraRidgeSolution solve_camera_ridge(const Matrix& camera_rows,
                                       std::span<const Eigen::Index> tracklet_of_row,
                                       Eigen::Index num_tracklets, double lambda_p);

// Unit-norm ridge profiles. A tracklet whose m_c vanishes (the only
// tracklet in its camera) falls back to its normalized mean and adds a
// warning.
ProfileSet ridge_profile(const FeatureSet& fs, const PvgConfig& cfg, unsigned threads = 1);

ProfileSet pvg(const FeatureSet& fs, const PvgConfig& cfg, unsigned threads = 1);

// Feature + metadata files plus a JSON sidecar {"profiles":[{"index":p,
// "sources":[...]}], "warnings":[...]}.
void save_profiles(const ProfileSet& ps, const std::filesystem::path& features,
                   const std::filesystem::path& meta, const std::filesystem::path& provenance);

}  // namespace gcr
