#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

namespace gcr {

// Row-major so that a feature vector is a contiguous span.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Split : std::uint8_t { kQuery, kGallery };

std::string_view to_string(Split split);

// person_id -1 marks distractor / junk rows.
struct RowMeta {
  std::int64_t person_id = 0;
  std::int64_t camera_id = 0;
  std::int64_t tracklet_id = 0;
  Split split = Split::kGallery;

  friend bool operator==(const RowMeta&, const RowMeta&) = default;
};

// An n x d matrix of finite embeddings with one RowMeta per row. Immutable
// once built; the constructor rejects empty, mis-sized or non-finite input.
class FeatureSet {
 public:
  FeatureSet(Matrix data, std::vector<RowMeta> meta);

  Eigen::Index rows() const noexcept { return data_.rows(); }
  Eigen::Index dim() const noexcept { return data_.cols(); }

  const Matrix& data() const noexcept { return data_; }
  const std::vector<RowMeta>& meta() const noexcept { return meta_; }
  const RowMeta& meta(Eigen::Index i) const { return meta_[static_cast<std::size_t>(i)]; }

  // Same metadata, new coordinates.
  FeatureSet with_data(Matrix data) const;

 private:
  Matrix data_;
  std::vector<RowMeta> meta_;
};

inline constexpr char kFeatureMagic[4] = {'G', 'C', 'R', 'F'};
inline constexpr std::uint16_t kFeatureFormatVersion = 1;

// Binary feature file: "GCRF", u16 version, u32 n, u32 d (little-endian),
// then n*d float32 row-major. Metadata is a CSV with header
// `index,person_id,camera_id,tracklet_id,split`.
FeatureSet load_features(const std::filesystem::path& path,
                         const std::filesystem::path& meta_path);

void save_features(const FeatureSet& fs, const std::filesystem::path& path,
                   const std::filesystem::path& meta_path);

// Lower-level halves of the above, exposed for tools that only need one.
Matrix read_feature_matrix(const std::filesystem::path& path);
std::vector<RowMeta> read_meta_csv(const std::filesystem::path& path);
void write_feature_matrix(const Matrix& data, const std::filesystem::path& path);
void write_meta_csv(const std::vector<RowMeta>& meta, const std::filesystem::path& path);

// Scales every row to unit Euclidean norm. A zero row is an error.
FeatureSet l2_normalize(const FeatureSet& fs);
void l2_normalize_rows(Matrix& data);

}  // namespace gcr
