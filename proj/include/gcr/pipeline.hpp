#pragma once

#include "gcr/config.hpp"
#include "gcr/feature_store.hpp"
#include "gcr/pvg.hpp"
#include "gcr/ranking.hpp"
#include "gcr/synth.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace gcr {

// Profile generation, then iterated graph propagation, evaluated before and
// after propagation.
struct PipelineConfig {
  GcrConfig gcr;
  PvgConfig pvg;
  std::optional<SynthConfig> synth;
  std::filesystem::path features;
  std::filesystem::path meta;
  unsigned threads = 1;
  bool baseline_mean = false;  // also evaluate plain mean profiles
  std::size_t cmc_length = 50;

  // Exactly one input source; every sub-config valid.
  void validate() const;
};

struct PipelineResult {
  EvalReport before;  // profiles from the configured method, no propagation
  EvalReport after;
  std::optional<EvalReport> baseline_mean;
  ProfileSet profiles;
  FeatureSet reranked;
  std::map<std::string, double> timings_ms;
};

// Loads or synthesizes the input named by cfg.
FeatureSet load_pipeline_input(const PipelineConfig& cfg);

PipelineResult run_pipeline(const FeatureSet& input, const PipelineConfig& cfg);

nlohmann::json to_json(const GcrConfig& cfg);
nlohmann::json to_json(const PvgConfig& cfg);
nlohmann::json to_json(const SynthConfig& cfg);
nlohmann::json to_json(const PipelineConfig& cfg);

// {"config":..., "before":..., "after":..., ["baseline_mean":...],
//  ["timings_ms":...]}
nlohmann::json pipeline_report(const PipelineResult& result, const PipelineConfig& cfg,
                               bool include_timings);

}  // namespace gcr
