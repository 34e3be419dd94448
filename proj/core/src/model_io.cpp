#include "ndt/model_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ndt/errors.hpp"

namespace ndt {

using nlohmann::json;

namespace {

json tree_to_json_obj(const TreeModel& model) {
  json nodes = json::array();
  for (NodeId n = 0; n < static_cast<NodeId>(model.super.node_count()); ++n) {
    nodes.push_back(json{{"w", model.super.split(n).weights},
                         {"b", model.super.split(n).bias},
                         {"logits", model.super.leaf(n).logits}});
  }
  std::vector<NodeId> frontier(model.frontier.leaves().begin(), model.frontier.leaves().end());
  return json{{"schema_version", kSchemaVersion},
              {"kind", "tree"},
              {"depth", model.super.allocated_depth()},
              {"depth_cap", model.super.depth_cap()},
              {"feature_dim", model.super.feature_dim()},
              {"class_count", model.super.class_count()},
              {"nodes", nodes},
              {"frontier", frontier}};
}

TreeModel tree_from_json_obj(const json& doc) {
  if (doc.value("schema_version", -1) != kSchemaVersion)
    throw FormatError("unsupported schema_version");
  if (doc.value("kind", "") != "tree") throw FormatError("expected a tree document");
  const int depth = doc.at("depth").get<int>();
  const int depth_cap = doc.at("depth_cap").get<int>();
  const int p = doc.at("feature_dim").get<int>();
  const int c = doc.at("class_count").get<int>();

  std::vector<SplitParams> splits;
  std::vector<LeafLogits> leaves;
  for (const json& node : doc.at("nodes")) {
    SplitParams s;
    s.weights = node.at("w").get<std::vector<double>>();
    s.bias = node.at("b").get<double>();
    LeafLogits l;
    l.logits = node.at("logits").get<std::vector<double>>();
    for (double v : s.weights)
      if (!std::isfinite(v)) throw FormatError("non-finite split weight");
    if (!std::isfinite(s.bias)) throw FormatError("non-finite split bias");
    for (double v : l.logits)
      if (!std::isfinite(v)) throw FormatError("non-finite leaf logit");
    splits.push_back(std::move(s));
    leaves.push_back(std::move(l));
  }

  std::vector<NodeId> frontier = doc.at("frontier").get<std::vector<NodeId>>();
  for (NodeId n : frontier)
    if (n < 0 || static_cast<std::size_t>(n) >= splits.size())
      throw FormatError("frontier node out of range");
  try {
    return TreeModel{
        TreeSuperstructure::from_parts(depth, p, c, depth_cap, std::move(splits), std::move(leaves)),
        Frontier(std::move(frontier))};
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
}

json iteration_to_json(const IterationRecord& rec) {
  json chosen{{"kind", to_string(rec.chosen_kind)},
              {"degenerate", rec.chosen_degenerate},
              {"probability", rec.chosen_probability}};
  chosen["target"] = rec.chosen_target ? json(*rec.chosen_target) : json(nullptr);
  return json{{"iteration", rec.iteration},
              {"tau_start", rec.tau_start},
              {"tau_end", rec.tau_end},
              {"posterior", rec.posterior},
              {"chosen", chosen},
              {"train_loss", rec.train_loss},
              {"test_loss", rec.test_loss}};
}

json report_to_json_obj(const RunReport& report) {
  json iterations = json::array();
  for (const auto& rec : report.iterations) iterations.push_back(iteration_to_json(rec));
  return json{{"schema_version", kSchemaVersion},
              {"kind", "run_report"},
              {"iterations", iterations},
              {"final_frontier", report.final_frontier},
              {"losses",
               {{"search_train", report.search_train_loss},
                {"search_test", report.search_test_loss},
                {"finetune_train", report.finetune_train_loss},
                {"finetune_test", report.finetune_test_loss}}},
              {"work", {{"epochs", report.total_epochs}, {"batches", report.total_batches}}}};
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

}  // namespace

std::string tree_model_to_json(const TreeModel& model) { return dump(tree_to_json_obj(model)); }

TreeModel tree_model_from_json(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw FormatError("malformed model JSON");
  return tree_from_json_obj(doc);
}

std::string forest_model_to_json(const ForestModel& model, const ForestConfig* config) {
  json members = json::array();
  for (const TreeModel& tree : model.members) members.push_back(tree_to_json_obj(tree));
  json doc{{"schema_version", kSchemaVersion}, {"kind", "forest"}, {"members", members}};
  if (config) {
    const OptimizerConfig& opt = config->optimizer;
    doc["config"] = json{{"n_trees", config->n_trees},
                         {"seed", opt.seed},
                         {"step_size", opt.step_size},
                         {"batch_size", opt.batch_size},
                         {"epochs_per_iteration", opt.epochs_per_iteration},
                         {"iterations", opt.iterations},
                         {"finetune_epochs", opt.finetune_epochs},
                         {"start_depth", opt.start_depth},
                         {"depth_cap", opt.depth_cap},
                         {"tau0", opt.tau0},
                         {"discount", opt.discount}};
  }
  return dump(doc);
}

ForestModel forest_model_from_json(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw FormatError("malformed model JSON");
  if (doc.value("kind", "") != "forest") throw FormatError("expected a forest document");
  if (doc.value("schema_version", -1) != kSchemaVersion)
    throw FormatError("unsupported schema_version");
  ForestModel model;
  for (const json& member : doc.at("members")) model.members.push_back(tree_from_json_obj(member));
  if (model.members.empty()) throw FormatError("forest has no members");
  for (const TreeModel& member : model.members) {
    if (member.super.feature_dim() != model.members[0].super.feature_dim() ||
        member.super.class_count() != model.members[0].super.class_count())
      throw FormatError("forest members disagree on feature or class dimensions");
  }
  return model;
}

LoadedModel model_from_json(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw FormatError("malformed model JSON");
  LoadedModel out;
  const std::string kind = doc.value("kind", "");
  if (kind == "tree") {
    out.tree = tree_from_json_obj(doc);
  } else if (kind == "forest") {
    out.is_forest = true;
    out.forest = forest_model_from_json(text);
  } else {
    throw FormatError("unknown model kind '" + kind + "'");
  }
  return out;
}

std::string run_report_to_json(const RunReport& report) { return dump(report_to_json_obj(report)); }

std::string run_reports_to_json(const std::vector<RunReport>& reports) {
  json members = json::array();
  for (const auto& r : reports) members.push_back(report_to_json_obj(r));
  return dump(json{{"schema_version", kSchemaVersion}, {"kind", "run_reports"}, {"members", members}});
}

std::string preprocess_stats_to_json(const PreprocessStats& stats) {
  json removed = json::array();
  for (const auto& rc : stats.removed_columns)
    removed.push_back(json{{"name", rc.name}, {"reason", rc.reason}});
  json columns = json::array();
  for (std::size_t j = 0; j < stats.retained_columns.size(); ++j) {
    json col{{"name", stats.retained_columns[j]}};
    if (j < stats.mean.size()) {
      col["mean"] = stats.mean[j];
      col["stddev"] = stats.stddev[j];
    }
    columns.push_back(col);
  }
  return dump(json{{"schema_version", kSchemaVersion},
                   {"kind", "preprocess_stats"},
                   {"removed_columns", removed},
                   {"retained_columns", columns},
                   {"dropped_rows", stats.dropped_rows}});
}

namespace {

std::string internal_label(const SplitParams& split) {
  std::vector<std::size_t> idx(split.weights.size());
  for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = j;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(split.weights[a]) > std::abs(split.weights[b]);
  });
  std::string label;
  const std::size_t top = std::min<std::size_t>(2, idx.size());
  for (std::size_t k = 0; k < top; ++k) {
    if (k) label += ", ";
    label += "x" + std::to_string(idx[k]);
  }
  return label;
}

int argmax_class(const LeafLogits& leaf) {
  return static_cast<int>(std::max_element(leaf.logits.begin(), leaf.logits.end()) -
                          leaf.logits.begin());
}

void dot_subtree(const TreeModel& model, NodeId node, const std::string& prefix,
                 std::ostringstream& out) {
  if (model.frontier.contains(node)) {
    out << "  " << prefix << "n" << node << " [label=\"class "
        << argmax_class(model.super.leaf(node)) << "\", shape=box];\n";
    return;
  }
  out << "  " << prefix << "n" << node << " [label=\"" << internal_label(model.super.split(node))
      << "\"];\n";
  dot_subtree(model, left_child(node), prefix, out);
  dot_subtree(model, right_child(node), prefix, out);
  out << "  " << prefix << "n" << node << " -> " << prefix << "n" << left_child(node)
      << " [label=\"L\"];\n";
  out << "  " << prefix << "n" << node << " -> " << prefix << "n" << right_child(node)
      << " [label=\"R\"];\n";
}

}  // namespace

std::string tree_to_dot(const TreeModel& model) {
  std::ostringstream out;
  out << "digraph ndtree {\n";
  dot_subtree(model, kRootId, "", out);
  out << "}\n";
  return out.str();
}

std::string forest_to_dot(const ForestModel& model) {
  std::ostringstream out;
  out << "digraph ndforest {\n";
  for (std::size_t i = 0; i < model.members.size(); ++i) {
    out << "subgraph cluster_" << i << " {\n  label=\"member " << i << "\";\n";
    dot_subtree(model.members[i], kRootId, "m" + std::to_string(i) + "_", out);
    out << "}\n";
  }
  out << "}\n";
  return out.str();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace ndt
