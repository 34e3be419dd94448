#pragma once

#include <string>

#include "ndt/dataset.hpp"
#include "ndt/forest.hpp"
#include "ndt/training.hpp"

namespace ndt {

// Versioned JSON documents. Serialization is fully deterministic (sorted
// keys, shortest round-trip number formatting), so equal models produce
// byte-identical files.

inline constexpr int kSchemaVersion = 1;

std::string tree_model_to_json(const TreeModel& model);
TreeModel tree_model_from_json(const std::string& text);

/// When given, the training configuration is embedded alongside the member
/// documents (loaders ignore it).
std::string forest_model_to_json(const ForestModel& model,
                                 const ForestConfig* config = nullptr);
ForestModel forest_model_from_json(const std::string& text);

/// Either document kind; `is_forest` reports which one was found.
struct LoadedModel {
  bool is_forest = false;
  TreeModel tree;
  ForestModel forest;
};
LoadedModel model_from_json(const std::string& text);

std::string run_report_to_json(const RunReport& report);
std::string run_reports_to_json(const std::vector<RunReport>& reports);

std::string preprocess_stats_to_json(const PreprocessStats& stats);

/// Graphviz DOT rendering of the routed structure: internal nodes show their
/// strongest-weight feature indices, frontier leaves the argmax class.
std::string tree_to_dot(const TreeModel& model);
std::string forest_to_dot(const ForestModel& model);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace ndt
