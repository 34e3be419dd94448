#include "ndt/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ndt/errors.hpp"

namespace ndt {

using nlohmann::json;

void BenchmarkSpec::validate() const {
  if (datasets.empty()) throw std::invalid_argument("benchmark spec lists no datasets");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must lie strictly between 0 and 1");
  if (n_trees < 1) throw std::invalid_argument("n_trees must be >= 1");
  if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
  optimizer.validate();
}

BenchmarkSpec benchmark_spec_from_json(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw FormatError("malformed benchmark spec JSON");

  BenchmarkSpec spec;
  for (const json& d : doc.at("datasets")) {
    BenchmarkDatasetSpec ds;
    ds.path = d.at("path").get<std::string>();
    ds.label_column = d.at("label_column").get<std::string>();
    ds.test_path = d.value("test_path", "");
    std::string delim = d.value("delimiter", ",");
    if (delim.size() != 1) throw FormatError("delimiter must be a single character");
    ds.delimiter = delim[0];
    ds.name = d.value("name", std::filesystem::path(ds.path).stem().string());
    spec.datasets.push_back(std::move(ds));
  }
  spec.run_tree = doc.value("run_tree", true);
  spec.run_forest = doc.value("run_forest", true);
  spec.train_fraction = doc.value("train_fraction", 0.7);
  spec.nzv.freq_ratio = doc.value("nzv_freq_ratio", spec.nzv.freq_ratio);
  spec.nzv.unique_pct = doc.value("nzv_unique_pct", spec.nzv.unique_pct);
  spec.n_trees = doc.value("n_trees", 5);
  spec.parallelism = doc.value("parallelism", 1);
  spec.output_dir = doc.value("output_dir", "");

  OptimizerConfig& opt = spec.optimizer;
  opt.seed = doc.value("seed", std::uint64_t{0});
  opt.step_size = doc.value("step_size", opt.step_size);
  opt.batch_size = doc.value("batch_size", opt.batch_size);
  opt.epochs_per_iteration = doc.value("epochs_per_iteration", opt.epochs_per_iteration);
  opt.iterations = doc.value("iterations", opt.iterations);
  opt.baseline_epochs = doc.value("baseline_epochs", opt.baseline_epochs);
  opt.finetune_epochs = doc.value("finetune_epochs", opt.finetune_epochs);
  opt.start_depth = doc.value("depth", opt.start_depth);
  opt.depth_cap = doc.value("depth_cap", opt.depth_cap);
  opt.tau0 = doc.value("tau0", opt.tau0);
  opt.discount = doc.value("discount", opt.discount);
  return spec;
}

double median(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty range");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

ImprovementAggregate aggregate_improvements(std::span<const double> train,
                                            std::span<const double> test) {
  ImprovementAggregate agg;
  double st = 0.0, se = 0.0;
  for (double v : train) st += v;
  for (double v : test) se += v;
  agg.avg_train = st / static_cast<double>(train.size());
  agg.avg_test = se / static_cast<double>(test.size());
  agg.median_train = median(train);
  agg.median_test = median(test);
  return agg;
}

namespace {

DatasetView load_dataset(const BenchmarkDatasetSpec& ds, const BenchmarkSpec& spec) {
  RawTable train = load_table(ds.path, ds.label_column, ds.delimiter);
  if (!ds.test_path.empty()) {
    RawTable test = load_table(ds.test_path, ds.label_column, ds.delimiter);
    return merge_predefined_test(train, test, spec.nzv);
  }
  auto [view, stats] = preprocess(train, spec.nzv);
  return split(view, spec.train_fraction, spec.optimizer.seed);
}

ModelScores score(const Losses& model, const Losses& baseline) {
  ModelScores s;
  s.losses = model;
  s.train_improvement = relative_improvement(baseline.train, model.train);
  s.test_improvement = relative_improvement(baseline.test, model.test);
  return s;
}

struct ImprovementColumns {
  std::vector<double> train, test;
};

ImprovementColumns collect(const BenchmarkReport& report,
                           ModelScores DatasetResult::*member) {
  ImprovementColumns cols;
  for (const DatasetResult& r : report.results) {
    if (r.failed) continue;
    cols.train.push_back((r.*member).train_improvement);
    cols.test.push_back((r.*member).test_improvement);
  }
  return cols;
}

ImprovementAggregate aggregate_member(const BenchmarkReport& report,
                                      ModelScores DatasetResult::*member) {
  ImprovementColumns cols = collect(report, member);
  if (cols.train.empty()) return {};
  return aggregate_improvements(cols.train, cols.test);
}

std::string pct(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3) << v << "%";
  return out.str();
}

void table_row(std::ostringstream& out, const std::string& model,
               const ImprovementAggregate& agg) {
  out << std::left << std::setw(8) << model << std::setw(20) << pct(agg.avg_train)
      << std::setw(19) << pct(agg.avg_test) << std::setw(23) << pct(agg.median_train)
      << pct(agg.median_test) << '\n';
}

json scores_to_json(const ModelScores& s) {
  return json{{"train_loss", s.losses.train},
              {"test_loss", s.losses.test},
              {"train_improvement", s.train_improvement},
              {"test_improvement", s.test_improvement}};
}

json aggregate_to_json(const ImprovementAggregate& agg) {
  return json{{"avg_train", agg.avg_train},
              {"avg_test", agg.avg_test},
              {"median_train", agg.median_train},
              {"median_test", agg.median_test}};
}

}  // namespace

void recompute_aggregates(BenchmarkReport& report) {
  report.tree_search_agg = aggregate_member(report, &DatasetResult::tree_search);
  report.tree_finetune_agg = aggregate_member(report, &DatasetResult::tree_finetune);
  report.forest_search_agg = aggregate_member(report, &DatasetResult::forest_search);
  report.forest_finetune_agg = aggregate_member(report, &DatasetResult::forest_finetune);
  report.any_failed = false;
  for (const auto& r : report.results) report.any_failed |= r.failed;
}

BenchmarkReport run_benchmark(const BenchmarkSpec& spec, std::ostream* log) {
  spec.validate();
  BenchmarkReport report;
  for (const BenchmarkDatasetSpec& ds : spec.datasets) {
    DatasetResult result;
    result.name = ds.name;
    try {
      DatasetView data = load_dataset(ds, spec);
      if (log)
        *log << "[benchmark] " << ds.name << ": n=" << data.n_rows()
             << " p=" << data.feature_dim() << " C=" << data.class_count << '\n';

      auto [baseline_model, baseline_losses] = train_baseline(data, spec.optimizer);
      result.baseline = baseline_losses;
      if (log)
        *log << "[benchmark] " << ds.name << ": baseline train=" << baseline_losses.train
             << " test=" << baseline_losses.test << '\n';

      if (spec.run_tree) {
        TrainedTree tree = train_tree(data, spec.optimizer);
        result.tree_search = score(tree.search_losses, baseline_losses);
        result.tree_finetune = score(tree.finetune_losses, baseline_losses);
      }
      if (spec.run_forest) {
        ForestConfig fc;
        fc.n_trees = spec.n_trees;
        fc.optimizer = spec.optimizer;
        fc.parallelism = spec.parallelism;
        TrainedForest forest = train_forest(data, fc);
        result.forest_search = score(forest.search_losses, baseline_losses);
        result.forest_finetune = score(forest.finetune_losses, baseline_losses);
      }
    } catch (const std::exception& e) {
      result.failed = true;
      result.error = e.what();
      if (log) *log << "[benchmark] " << ds.name << " FAILED: " << e.what() << '\n';
    }
    report.results.push_back(std::move(result));
  }
  recompute_aggregates(report);
  return report;
}

std::string format_improvement_tables(const BenchmarkReport& report, bool run_tree,
                                      bool run_forest) {
  std::ostringstream out;
  const char* header =
      "Model   Avg Impr. (Train)   Avg Impr. (Test)   Median Impr. (Train)   Median Impr. (Test)";

  out << "Average error improvement over baseline (without fine-tuning)\n" << header << '\n';
  if (run_tree) table_row(out, "Tree", report.tree_search_agg);
  if (run_forest) table_row(out, "Forest", report.forest_search_agg);

  out << "\nAverage error improvement over baseline (with fine-tuning)\n" << header << '\n';
  if (run_tree) table_row(out, "Tree", report.tree_finetune_agg);
  if (run_forest) table_row(out, "Forest", report.forest_finetune_agg);

  if (run_tree && run_forest) {
    const double forest_test = report.forest_finetune_agg.avg_test;
    const double tree_test = report.tree_finetune_agg.avg_test;
    out << "\nForest vs tree (fine-tuned, avg test improvement): " << pct(forest_test) << " vs "
        << pct(tree_test) << " -> "
        << (forest_test > tree_test ? "forest ahead" : forest_test < tree_test ? "tree ahead" : "tied")
        << '\n';
  }
  return out.str();
}

std::string benchmark_report_to_json(const BenchmarkReport& report) {
  json results = json::array();
  for (const DatasetResult& r : report.results) {
    json row{{"name", r.name}, {"failed", r.failed}};
    if (r.failed) {
      row["error"] = r.error;
    } else {
      row["baseline"] = json{{"train_loss", r.baseline.train}, {"test_loss", r.baseline.test}};
      row["tree_search"] = scores_to_json(r.tree_search);
      row["tree_finetune"] = scores_to_json(r.tree_finetune);
      row["forest_search"] = scores_to_json(r.forest_search);
      row["forest_finetune"] = scores_to_json(r.forest_finetune);
    }
    results.push_back(std::move(row));
  }
  json doc{{"schema_version", 1},
           {"kind", "benchmark_report"},
           {"results", results},
           {"aggregates",
            {{"tree_search", aggregate_to_json(report.tree_search_agg)},
             {"tree_finetune", aggregate_to_json(report.tree_finetune_agg)},
             {"forest_search", aggregate_to_json(report.forest_search_agg)},
             {"forest_finetune", aggregate_to_json(report.forest_finetune_agg)}}},
           {"any_failed", report.any_failed}};
  return doc.dump(2) + "\n";
}

}  // namespace ndt
