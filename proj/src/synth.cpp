#include "gcr/synth.hpp"

#include "gcr/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace gcr {

void SynthConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, msg); };
  if (num_ids < 1) fail("num_ids must be >= 1");
  if (cameras < 1) fail("cameras must be >= 1");
  if (images_per_id_per_camera < 1) fail("images_per_id_per_camera must be >= 1");
  if (dim < 1) fail("dim must be >= 1");
  if (!(id_spread > 0.0)) fail("id_spread must be positive");
  if (!(noise >= 0.0)) fail("noise must be nonnegative");
  if (!(camera_bias >= 0.0)) fail("camera_bias must be nonnegative");
  if (!(distractor_fraction >= 0.0 && distractor_fraction < 1.0)) {
    fail("distractor_fraction must lie in [0, 1)");
  }
}

double SynthRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SynthRng::uniform_open() {
  return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
}

double SynthRng::normal() {
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

Eigen::RowVectorXd random_direction(SynthRng& rng, int dim) {
  Eigen::RowVectorXd v(dim);
  do {
    for (int m = 0; m < dim; ++m) v[m] = rng.normal();
  } while (v.squaredNorm() == 0.0);
  return v / v.norm();
}

}  // namespace

FeatureSet generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthRng rng(cfg.seed);

  const int distractors =
      static_cast<int>(std::lround(cfg.distractor_fraction * cfg.num_ids));
  const int identities = cfg.num_ids + distractors;

  std::vector<Eigen::RowVectorXd> centers;
  centers.reserve(static_cast<std::size_t>(identities));
  for (int p = 0; p < identities; ++p) centers.push_back(cfg.id_spread * random_direction(rng, cfg.dim));

  std::vector<Eigen::RowVectorXd> bias;
  for (int c = 0; c < cfg.cameras; ++c) bias.push_back(cfg.camera_bias * random_direction(rng, cfg.dim));

  const Eigen::Index rows = static_cast<Eigen::Index>(identities) * cfg.cameras *
                            cfg.images_per_id_per_camera;
  Matrix data(rows, cfg.dim);
  std::vector<RowMeta> meta;
  meta.reserve(static_cast<std::size_t>(rows));

  Eigen::Index r = 0;
  for (int p = 0; p < identities; ++p) {
    const bool distractor = p >= cfg.num_ids;
    for (int c = 0; c < cfg.cameras; ++c) {
      for (int k = 0; k < cfg.images_per_id_per_camera; ++k, ++r) {
        for (int m = 0; m < cfg.dim; ++m) {
          data(r, m) = centers[static_cast<std::size_t>(p)][m] +
                       bias[static_cast<std::size_t>(c)][m] + cfg.noise * rng.normal();
        }
        RowMeta row;
        row.person_id = distractor ? -1 : p;
        row.camera_id = c;
        row.tracklet_id = static_cast<std::int64_t>(p) * cfg.cameras + c;
        row.split = (!distractor && c == p % cfg.cameras) ? Split::kQuery : Split::kGallery;
        meta.push_back(row);
      }
    }
  }
  l2_normalize_rows(data);
  return FeatureSet(std::move(data), std::move(meta));
}

}  // namespace gcr
