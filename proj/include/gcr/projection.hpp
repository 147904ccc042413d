#pragma once

#include "gcr/feature_store.hpp"

#include <filesystem>

namespace gcr {

// Projects rows onto the top two principal axes of the sample covariance.
// Returns n x 2. Each axis is signed so that its largest-magnitude component
// is positive; with d == 1 the second column is zero.
Eigen::MatrixX2d pca_2d(const FeatureSet& fs);

// CSV `index,x,y,person_id,camera_id`.
void write_projection_csv(const FeatureSet& fs, const Eigen::MatrixX2d& coords,
                          const std::filesystem::path& path);

}  // namespace gcr
