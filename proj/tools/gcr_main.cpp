// gcr: command-line frontend for graph-convolution re-ranking.
//
//   gcr gen       synthesize a feature set
//   gcr pvg       collapse tracklets to profile vectors
//   gcr rerank    iterated graph propagation
//   gcr eval      Rank-1 / mAP / CMC of a feature set
//   gcr pipeline  pvg -> rerank, evaluated before and after
//   gcr project   2-D PCA coordinates for plotting

#include "gcr/config.hpp"
#include "gcr/error.hpp"
#include "gcr/feature_store.hpp"
#include "gcr/graph.hpp"
#include "gcr/parallel.hpp"
#include "gcr/pipeline.hpp"
#include "gcr/projection.hpp"
#include "gcr/propagation.hpp"
#include "gcr/pvg.hpp"
#include "gcr/ranking.hpp"
#include "gcr/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 3;

struct Outputs {
  fs::path features;
  fs::path meta;
  fs::path provenance;
  fs::path report;
};

Outputs outputs_for(const std::string& prefix) {
  return {prefix + ".gcrf", prefix + ".meta.csv", prefix + ".provenance.json",
          prefix + ".report.json"};
}

void require_parent_dir(const std::string& prefix) {
  fs::path parent = fs::path(prefix).parent_path();
  if (parent.empty()) parent = ".";
  if (!fs::is_directory(parent)) {
    throw gcr::Error(gcr::ErrorCode::kIo, "output directory does not exist: " + parent.string());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw gcr::Error(gcr::ErrorCode::kIo, "cannot open for writing: " + path.string());
  out << text;
  if (!out) throw gcr::Error(gcr::ErrorCode::kIo, "write failed: " + path.string());
}

void log_config(const std::string& command, const json& cfg) {
  spdlog::info("{} config {}", command, cfg.dump());
}

struct InputFlags {
  std::string features;
  std::string meta;

  void add(CLI::App* app, bool required = true) {
    auto* f = app->add_option("--features", features, "Binary feature file (GCRF)");
    auto* m = app->add_option("--meta", meta, "Metadata CSV");
    if (required) {
      f->required();
      m->required();
    }
  }
};

void add_gcr_flags(CLI::App* app, gcr::GcrConfig& cfg, std::string& variant) {
  app->add_option("--k-g", cfg.k_global, "Global neighbor count")->capture_default_str();
  app->add_option("--k-c", cfg.k_cross, "Cross-camera neighbor count")->capture_default_str();
  app->add_option("--gamma", cfg.gamma, "Kernel temperature")->capture_default_str();
  app->add_option("--alpha", cfg.alpha, "Weight of the global graph")->capture_default_str();
  app->add_option("--iterations", cfg.iterations, "Number of propagation rounds")
      ->capture_default_str();
  app->add_option("--variant", variant, "Graph variant")
      ->check(CLI::IsMember({"nonsym", "sym", "local"}))
      ->capture_default_str();
  app->add_flag("--renormalize,!--no-renormalize", cfg.renormalize,
                "Rescale rows to unit length after each round (default on)");
  app->add_flag("--pre-normalize,!--no-pre-normalize", cfg.pre_normalize,
                "Rescale input rows to unit length (default on)");
}

void add_pvg_flags(CLI::App* app, gcr::PvgConfig& cfg, std::string& method) {
  app->add_option("--pvg-method", method, "Profile method")
      ->check(CLI::IsMember({"mean", "ridge"}))
      ->capture_default_str();
  app->add_option("--lambda-p", cfg.lambda_p, "Ridge weight")->capture_default_str();
}

void add_synth_flags(CLI::App* app, gcr::SynthConfig& cfg) {
  app->add_option("--ids", cfg.num_ids, "Number of identities")->capture_default_str();
  app->add_option("--cameras", cfg.cameras, "Number of cameras")->capture_default_str();
  app->add_option("--images-per-id", cfg.images_per_id_per_camera,
                  "Images per identity per camera")
      ->capture_default_str();
  app->add_option("--dim", cfg.dim, "Feature dimension")->capture_default_str();
  app->add_option("--id-spread", cfg.id_spread, "Norm of identity centers")
      ->capture_default_str();
  app->add_option("--noise", cfg.noise, "Per-coordinate noise std")->capture_default_str();
  app->add_option("--camera-bias", cfg.camera_bias, "Norm of per-camera offsets")
      ->capture_default_str();
  app->add_option("--distractor-fraction", cfg.distractor_fraction,
                  "Extra distractor identities, as a fraction of --ids")
      ->capture_default_str();
  app->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
}

void print_report(const gcr::EvalReport& r, const std::string& format, const std::string& title) {
  if (format == "json") return;
  if (!title.empty()) std::cout << "== " << title << '\n';
  std::cout << gcr::to_table(r);
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("gcr"));

  CLI::App app{"Graph-convolution re-ranking for retrieval features"};
  app.require_subcommand(1);

  unsigned threads = gcr::default_thread_count();
  std::string report_format = "json";
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--threads", threads, "Worker threads (overrides GCR_THREADS)")
        ->check(CLI::PositiveNumber);
  };
  auto add_report = [&](CLI::App* sub) {
    sub->add_option("--report", report_format, "Report format")
        ->check(CLI::IsMember({"json", "table"}))
        ->capture_default_str();
  };

  // gen
  gcr::SynthConfig synth;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Write a synthetic feature set");
  add_synth_flags(gen, synth);
  gen->add_option("--out", gen_out, "Output prefix (writes PREFIX.gcrf, PREFIX.meta.csv)")
      ->required();

  // pvg
  InputFlags pvg_in;
  gcr::PvgConfig pvg_cfg;
  std::string pvg_method = "ridge";
  bool pvg_pre_normalize = true;
  std::string pvg_out;
  auto* pvg_cmd = app.add_subcommand("pvg", "Collapse tracklets to profile vectors");
  pvg_in.add(pvg_cmd);
  add_pvg_flags(pvg_cmd, pvg_cfg, pvg_method);
  pvg_cmd->add_flag("--pre-normalize,!--no-pre-normalize", pvg_pre_normalize,
                    "Rescale input rows to unit length (default on)");
  pvg_cmd->add_option("--out", pvg_out, "Output prefix")->required();
  add_common(pvg_cmd);

  // rerank
  InputFlags rerank_in;
  gcr::GcrConfig gcr_cfg;
  std::string variant = "nonsym";
  std::string rerank_out;
  std::string dump_graph;
  auto* rerank_cmd = app.add_subcommand("rerank", "Propagate features over k-NN graphs");
  rerank_in.add(rerank_cmd);
  add_gcr_flags(rerank_cmd, gcr_cfg, variant);
  rerank_cmd->add_option("--out", rerank_out, "Output prefix")->required();
  rerank_cmd->add_option("--dump-graph", dump_graph,
                         "Write the first-round global graph as CSV i,j,weight");
  add_common(rerank_cmd);

  // eval
  InputFlags eval_in;
  std::size_t cmc_length = 50;
  std::string ranked_list;
  std::size_t ranked_top = 100;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate retrieval accuracy");
  eval_in.add(eval_cmd);
  add_report(eval_cmd);
  eval_cmd->add_option("--cmc-length", cmc_length, "Number of CMC ranks")->capture_default_str();
  eval_cmd->add_option("--ranked-list", ranked_list,
                       "Write per-query ranked lists as CSV");
  eval_cmd->add_option("--ranked-list-top", ranked_top, "Entries per query in --ranked-list")
      ->capture_default_str();
  add_common(eval_cmd);

  // pipeline
  InputFlags pipe_in;
  gcr::SynthConfig pipe_synth;
  bool use_synth = false;
  gcr::GcrConfig pipe_gcr;
  std::string pipe_variant = "nonsym";
  gcr::PvgConfig pipe_pvg;
  std::string pipe_method = "ridge";
  std::string baseline;
  std::string pipe_out;
  bool omit_timings = false;
  std::size_t pipe_cmc = 50;
  auto* pipe_cmd = app.add_subcommand("pipeline", "Profile, re-rank and evaluate");
  pipe_in.add(pipe_cmd, false);
  pipe_cmd->add_flag("--synth", use_synth, "Use synthetic input instead of files");
  add_synth_flags(pipe_cmd, pipe_synth);
  add_gcr_flags(pipe_cmd, pipe_gcr, pipe_variant);
  add_pvg_flags(pipe_cmd, pipe_pvg, pipe_method);
  pipe_cmd->add_option("--baseline", baseline, "Also evaluate this baseline")
      ->check(CLI::IsMember({"mean"}));
  pipe_cmd->add_option("--out", pipe_out,
                       "Output prefix for re-ranked features and PREFIX.report.json");
  pipe_cmd->add_flag("--omit-timings", omit_timings, "Leave wall-clock timings out of reports");
  pipe_cmd->add_option("--cmc-length", pipe_cmc, "Number of CMC ranks")->capture_default_str();
  add_report(pipe_cmd);
  add_common(pipe_cmd);

  // project
  InputFlags proj_in;
  std::string proj_out;
  auto* proj_cmd = app.add_subcommand("project", "2-D PCA projection for plotting");
  proj_in.add(proj_cmd);
  proj_cmd->add_option("--out", proj_out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*gen) {
      log_config("gen", gcr::to_json(synth));
      require_parent_dir(gen_out);
      const auto out = outputs_for(gen_out);
      gcr::save_features(gcr::generate(synth), out.features, out.meta);
      spdlog::info("wrote {} and {}", out.features.string(), out.meta.string());

    } else if (*pvg_cmd) {
      pvg_cfg.method = *gcr::parse_pvg_method(pvg_method);
      log_config("pvg", {{"pvg", gcr::to_json(pvg_cfg)},
                         {"pre_normalize", pvg_pre_normalize},
                         {"threads", threads}});
      require_parent_dir(pvg_out);
      gcr::FeatureSet input = gcr::load_features(pvg_in.features, pvg_in.meta);
      if (pvg_pre_normalize) input = gcr::l2_normalize(input);
      const auto out = outputs_for(pvg_out);
      gcr::save_profiles(gcr::pvg(input, pvg_cfg, threads), out.features, out.meta,
                         out.provenance);

    } else if (*rerank_cmd) {
      gcr_cfg.variant = *gcr::parse_graph_variant(variant);
      gcr_cfg.validate();
      log_config("rerank", {{"gcr", gcr::to_json(gcr_cfg)}, {"threads", threads}});
      require_parent_dir(rerank_out);
      gcr::FeatureSet input = gcr::load_features(rerank_in.features, rerank_in.meta);
      if (gcr_cfg.pre_normalize) input = gcr::l2_normalize(input);
      if (!dump_graph.empty()) {
        const auto knn = gcr::knn_global(input, gcr_cfg.k_global, threads);
        auto g = gcr::build_similarity(input, knn, gcr_cfg.gamma);
        if (gcr_cfg.variant == gcr::GraphVariant::kSym) g = gcr::symmetrize(g);
        gcr::write_graph_csv(g, dump_graph);
      }
      const auto out = outputs_for(rerank_out);
      gcr::save_features(gcr::rerank(input, gcr_cfg, threads), out.features, out.meta);

    } else if (*eval_cmd) {
      log_config("eval", {{"cmc_length", cmc_length}, {"threads", threads}});
      const gcr::FeatureSet input = gcr::load_features(eval_in.features, eval_in.meta);
      const gcr::EvalReport report = gcr::evaluate(input, {cmc_length, threads});
      if (report_format == "json") std::cout << gcr::to_json(report).dump(2) << '\n';
      else print_report(report, report_format, "");
      if (!ranked_list.empty()) {
        gcr::write_ranked_lists_csv(gcr::rank(input, threads), ranked_top, ranked_list);
      }

    } else if (*pipe_cmd) {
      gcr::PipelineConfig cfg;
      pipe_gcr.variant = *gcr::parse_graph_variant(pipe_variant);
      pipe_pvg.method = *gcr::parse_pvg_method(pipe_method);
      cfg.gcr = pipe_gcr;
      cfg.pvg = pipe_pvg;
      if (use_synth) cfg.synth = pipe_synth;
      cfg.features = pipe_in.features;
      cfg.meta = pipe_in.meta;
      cfg.threads = threads;
      cfg.baseline_mean = baseline == "mean";
      cfg.cmc_length = pipe_cmc;
      cfg.validate();
      log_config("pipeline", gcr::to_json(cfg));
      if (!pipe_out.empty()) require_parent_dir(pipe_out);

      const gcr::FeatureSet input = gcr::load_pipeline_input(cfg);
      const gcr::PipelineResult result = gcr::run_pipeline(input, cfg);
      const json report = gcr::pipeline_report(result, cfg, !omit_timings);
      if (report_format == "json") {
        std::cout << report.dump(2) << '\n';
      } else {
        print_report(result.before, report_format, "before");
        print_report(result.after, report_format, "after");
        if (result.baseline_mean) print_report(*result.baseline_mean, report_format, "baseline mean");
      }
      if (!pipe_out.empty()) {
        const auto out = outputs_for(pipe_out);
        gcr::save_features(result.reranked, out.features, out.meta);
        write_text(out.report, report.dump(2) + "\n");
      }

    } else if (*proj_cmd) {
      require_parent_dir(proj_out);
      const gcr::FeatureSet input = gcr::load_features(proj_in.features, proj_in.meta);
      gcr::write_projection_csv(input, gcr::pca_2d(input), proj_out);
    }
  } catch (const gcr::Error& e) {
    spdlog::error("{}", e.what());
    return e.exit_code();
  } catch (const std::bad_alloc&) {
    spdlog::error("out of memory");
    return static_cast<int>(gcr::ErrorKind::kNumeric);
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  }
  return 0;
}
