#pragma once

#include "gcr/feature_store.hpp"

#include <cstdint>
#include <random>

namespace gcr {

// Synthetic re-identification data: one random center per identity, an
// additive offset per camera, Gaussian noise per image, rows normalized.
//
// Layout: identities in order, each with `cameras` tracklets of
// `images_per_id_per_camera` images. Identity p's tracklet in camera
// p % cameras is the query; everything else is gallery. tracklet_id is
// p * cameras + camera. round(distractor_fraction * num_ids) extra
// identities follow, gallery-only, with person_id -1.
struct SynthConfig {
  int num_ids = 200;
  int cameras = 4;
  int images_per_id_per_camera = 2;
  int dim = 64;
  double id_spread = 1.0;
  double noise = 0.1;        // per-coordinate standard deviation
  double camera_bias = 0.5;  // norm of each camera's offset vector
  double distractor_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Random source with a fixed, platform-independent definition: the standard
// mt19937_64 engine; uniforms take the top 53 bits of a draw; normals use one
// Box-Muller pair per sample (cosine branch).
class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : engine_(seed) {}

  double uniform();       // [0, 1)
  double uniform_open();  // (0, 1]
  double normal();

 private:
  std::mt19937_64 engine_;
};

FeatureSet generate(const SynthConfig& cfg);

}  // namespace gcr
