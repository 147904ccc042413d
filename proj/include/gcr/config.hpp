#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace gcr {

enum class GraphVariant { kNonSym, kSym, kLocal };

std::string_view to_string(GraphVariant v);
std::optional<GraphVariant> parse_graph_variant(std::string_view s);

// Propagation hyperparameters. Defaults are the published operating point.
struct GcrConfig {
  int k_global = 15;
  int k_cross = 3;
  double gamma = 0.2;
  double alpha = 0.7;
  int iterations = 3;
  GraphVariant variant = GraphVariant::kNonSym;
  bool renormalize = true;
  bool pre_normalize = true;

  // Throws gcr::Error(kInvalidArgument) naming the offending field.
  void validate() const;
};

}  // namespace gcr
