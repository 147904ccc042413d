#include "gcr/pipeline.hpp"

#include "gcr/error.hpp"
#include "gcr/propagation.hpp"

#include <chrono>

namespace gcr {

namespace {

class StageTimer {
 public:
  explicit StageTimer(std::map<std::string, double>& sink) : sink_(sink) {}

  template <typename Fn>
  auto operator()(const std::string& stage, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    try {
      auto result = fn();
      sink_[stage] = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start)
                         .count();
      return result;
    } catch (const Error& e) {
      throw Error(e.code(), stage + ": " + e.what());
    }
  }

 private:
  std::map<std::string, double>& sink_;
};

}  // namespace

void PipelineConfig::validate() const {
  gcr.validate();
  pvg.validate();
  const bool has_files = !features.empty() || !meta.empty();
  if (synth.has_value() == has_files) {
    throw Error(ErrorCode::kInvalidArgument,
                "exactly one input source required: feature files or synthetic data");
  }
  if (has_files && (features.empty() || meta.empty())) {
    throw Error(ErrorCode::kInvalidArgument, "both --features and --meta are required");
  }
  if (synth) synth->validate();
  if (threads < 1) throw Error(ErrorCode::kInvalidArgument, "threads must be >= 1");
}

FeatureSet load_pipeline_input(const PipelineConfig& cfg) {
  if (cfg.synth) return generate(*cfg.synth);
  return load_features(cfg.features, cfg.meta);
}

PipelineResult run_pipeline(const FeatureSet& input, const PipelineConfig& cfg) {
  cfg.validate();
  std::map<std::string, double> timings;
  StageTimer timed(timings);
  const EvalOptions eval_opts{cfg.cmc_length, cfg.threads};

  const FeatureSet prepared =
      cfg.gcr.pre_normalize ? timed("normalize", [&] { return l2_normalize(input); }) : input;
  ProfileSet profiles = timed("pvg", [&] { return pvg(prepared, cfg.pvg, cfg.threads); });
  EvalReport before =
      timed("eval_before", [&] { return evaluate(profiles.profiles, eval_opts); });
  FeatureSet reranked =
      timed("rerank", [&] { return rerank(profiles.profiles, cfg.gcr, cfg.threads); });
  EvalReport after = timed("eval_after", [&] { return evaluate(reranked, eval_opts); });

  std::optional<EvalReport> baseline;
  if (cfg.baseline_mean) {
    baseline = timed("eval_baseline_mean",
                     [&] { return evaluate(mean_profile(prepared).profiles, eval_opts); });
  }
  return PipelineResult{std::move(before), std::move(after), std::move(baseline),
                        std::move(profiles), std::move(reranked), std::move(timings)};
}

nlohmann::json to_json(const GcrConfig& cfg) {
  return {{"k_g", cfg.k_global},
          {"k_c", cfg.k_cross},
          {"gamma", cfg.gamma},
          {"alpha", cfg.alpha},
          {"iterations", cfg.iterations},
          {"variant", std::string(to_string(cfg.variant))},
          {"renormalize", cfg.renormalize},
          {"pre_normalize", cfg.pre_normalize}};
}

nlohmann::json to_json(const PvgConfig& cfg) {
  return {{"method", std::string(to_string(cfg.method))}, {"lambda_p", cfg.lambda_p}};
}

nlohmann::json to_json(const SynthConfig& cfg) {
  return {{"ids", cfg.num_ids},
          {"cameras", cfg.cameras},
          {"images_per_id", cfg.images_per_id_per_camera},
          {"dim", cfg.dim},
          {"id_spread", cfg.id_spread},
          {"noise", cfg.noise},
          {"camera_bias", cfg.camera_bias},
          {"distractor_fraction", cfg.distractor_fraction},
          {"seed", cfg.seed}};
}

nlohmann::json to_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  j["gcr"] = to_json(cfg.gcr);
  j["pvg"] = to_json(cfg.pvg);
  if (cfg.synth) {
    j["input"] = {{"synth", to_json(*cfg.synth)}};
  } else {
    j["input"] = {{"features", cfg.features.string()}, {"meta", cfg.meta.string()}};
  }
  j["threads"] = cfg.threads;
  j["baseline_mean"] = cfg.baseline_mean;
  j["cmc_length"] = cfg.cmc_length;
  return j;
}

nlohmann::json pipeline_report(const PipelineResult& result, const PipelineConfig& cfg,
                               bool include_timings) {
  nlohmann::json j;
  j["config"] = to_json(cfg);
  // thread count does not change results; keep it out of the comparable part
  j["config"].erase("threads");
  j["before"] = to_json(result.before, include_timings);
  j["after"] = to_json(result.after, include_timings);
  if (result.baseline_mean) j["baseline_mean"] = to_json(*result.baseline_mean, include_timings);
  j["pvg_warnings"] = result.profiles.warnings.size();
  if (include_timings) j["timings_ms"] = result.timings_ms;
  return j;
}

}  // namespace gcr
