// Command-line front end: train soft decision trees / forests with automatic
// architecture induction, run the improvement benchmark, export DOT graphs.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ndt/benchmark.hpp"
#include "ndt/dataset.hpp"
#include "ndt/errors.hpp"
#include "ndt/forest.hpp"
#include "ndt/model_io.hpp"
#include "ndt/training.hpp"

namespace {

namespace fs = std::filesystem;

// Streams every line to both the terminal log (stderr) and train.log.
class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int c) override {
    if (c == EOF) return !EOF;
    int ra = a_->sputc(static_cast<char>(c));
    int rb = b_->sputc(static_cast<char>(c));
    return (ra == EOF || rb == EOF) ? EOF : c;
  }
  int sync() override {
    int ra = a_->pubsync();
    int rb = b_->pubsync();
    return (ra == 0 && rb == 0) ? 0 : -1;
  }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

struct TrainArgs {
  std::string data_path;
  std::string label_column;
  std::string test_path;
  std::string delimiter = ",";
  std::string out_dir = ".";
  double train_fraction = 0.7;
  ndt::NzvOptions nzv;
  ndt::OptimizerConfig optimizer;
  int forest_trees = 0;  // 0 = single tree
  int jobs = 1;
};

ndt::DatasetView load_view(const std::string& data_path, const std::string& test_path,
                           const std::string& label_column, char delimiter,
                           const ndt::NzvOptions& nzv, double train_fraction, std::uint64_t seed,
                           std::ostream& log) {
  ndt::RawTable raw = ndt::load_table(data_path, label_column, delimiter);
  if (raw.dropped_rows > 0)
    log << "[data] dropped " << raw.dropped_rows << " rows with missing values\n";

  ndt::DatasetView view;
  if (!test_path.empty()) {
    ndt::RawTable test_raw = ndt::load_table(test_path, label_column, delimiter);
    if (test_raw.dropped_rows > 0)
      log << "[data] dropped " << test_raw.dropped_rows << " test rows with missing values\n";
    view = ndt::merge_predefined_test(raw, test_raw, nzv);
  } else {
    auto [unsplit, stats] = ndt::preprocess(raw, nzv);
    view = ndt::split(unsplit, train_fraction, seed);
  }
  for (const auto& rc : view.stats.removed_columns)
    log << "[data] removed column '" << rc.name << "' (" << rc.reason << ")\n";
  log << "[data] n=" << view.n_rows() << " p=" << view.feature_dim()
      << " classes=" << view.class_count << " train="
      << view.partition_indices(ndt::Partition::kTrain).size() << " test="
      << view.partition_indices(ndt::Partition::kTest).size() << '\n';
  return view;
}

int run_train(const TrainArgs& args) {
  args.optimizer.validate();
  fs::create_directories(args.out_dir);

  std::ofstream log_file(fs::path(args.out_dir) / "train.log", std::ios::binary);
  if (!log_file) throw ndt::IoError("cannot write train.log under " + args.out_dir);
  TeeBuf tee(std::cerr.rdbuf(), log_file.rdbuf());
  std::ostream log(&tee);
  ndt::SearchHooks hooks;
  hooks.log = &log;

  ndt::DatasetView view =
      load_view(args.data_path, args.test_path, args.label_column, args.delimiter[0], args.nzv,
                args.train_fraction, args.optimizer.seed, log);

  const auto started = std::chrono::steady_clock::now();
  std::string model_json, report_json;
  if (args.forest_trees > 0) {
    ndt::ForestConfig config;
    config.n_trees = args.forest_trees;
    config.optimizer = args.optimizer;
    config.parallelism = args.jobs;
    ndt::TrainedForest forest = ndt::train_forest(view, config, hooks);
    log << "[forest] search train_loss=" << forest.search_losses.train
        << " test_loss=" << forest.search_losses.test << '\n';
    log << "[forest] finetuned train_loss=" << forest.finetune_losses.train
        << " test_loss=" << forest.finetune_losses.test << '\n';
    model_json = ndt::forest_model_to_json(forest.after_finetune, &config);
    report_json = ndt::run_reports_to_json(forest.reports);
  } else {
    ndt::TrainedTree tree = ndt::train_tree(view, args.optimizer, hooks);
    log << "[tree] search train_loss=" << tree.search_losses.train
        << " test_loss=" << tree.search_losses.test << '\n';
    log << "[tree] finetuned train_loss=" << tree.finetune_losses.train
        << " test_loss=" << tree.finetune_losses.test << '\n';
    model_json = ndt::tree_model_to_json(tree.after_finetune);
    report_json = ndt::run_report_to_json(tree.report);
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  log << "[done] wall_seconds=" << seconds << '\n';

  ndt::write_text_file((fs::path(args.out_dir) / "model.json").string(), model_json);
  ndt::write_text_file((fs::path(args.out_dir) / "report.json").string(), report_json);
  ndt::write_text_file((fs::path(args.out_dir) / "preprocess.json").string(),
                       ndt::preprocess_stats_to_json(view.stats));
  return 0;
}

int run_benchmark_cmd(const std::string& spec_path, const std::string& out_override,
                      bool seed_set, std::uint64_t seed_override, int jobs_override) {
  ndt::BenchmarkSpec spec = ndt::benchmark_spec_from_json(ndt::read_text_file(spec_path));
  if (!out_override.empty()) spec.output_dir = out_override;
  if (seed_set) spec.optimizer.seed = seed_override;
  if (jobs_override > 0) spec.parallelism = jobs_override;
  spec.validate();

  ndt::BenchmarkReport report = ndt::run_benchmark(spec, &std::cerr);
  std::cout << ndt::format_improvement_tables(report, spec.run_tree, spec.run_forest);
  if (!spec.output_dir.empty()) {
    fs::create_directories(spec.output_dir);
    ndt::write_text_file((fs::path(spec.output_dir) / "benchmark_report.json").string(),
                         ndt::benchmark_report_to_json(report));
  }
  return report.any_failed ? 1 : 0;
}

int run_export_dot(const std::string& model_path, const std::string& out_path) {
  ndt::LoadedModel model = ndt::model_from_json(ndt::read_text_file(model_path));
  std::string dot =
      model.is_forest ? ndt::forest_to_dot(model.forest) : ndt::tree_to_dot(model.tree);
  ndt::write_text_file(out_path, dot);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"non-greedy soft decision trees with automatic architecture induction"};
  app.require_subcommand(1);

  TrainArgs train;
  CLI::App* cmd_train = app.add_subcommand("train", "induce and fine-tune a tree or forest");
  cmd_train->add_option("--data", train.data_path, "training CSV path")->required();
  cmd_train->add_option("--label", train.label_column, "label column name")->required();
  cmd_train->add_option("--test", train.test_path, "predefined test CSV (skips the random split)");
  cmd_train->add_option("--delimiter", train.delimiter, "field delimiter")
      ->check(CLI::Validator(
          [](std::string& s) { return s.size() == 1 ? "" : "must be one character"; }, "CHAR"));
  cmd_train->add_option("--train-fraction", train.train_fraction, "train share of the random split")
      ->check(CLI::Range(1e-9, 1.0 - 1e-9));
  cmd_train->add_option("--depth", train.optimizer.start_depth, "starting tree depth")
      ->check(CLI::Range(1, 16));
  cmd_train->add_option("--depth-cap", train.optimizer.depth_cap, "maximum graftable depth")
      ->check(CLI::Range(1, 16));
  cmd_train->add_option("--iterations", train.optimizer.iterations, "search iterations")
      ->check(CLI::PositiveNumber);
  cmd_train
      ->add_option("--epochs-per-iter", train.optimizer.epochs_per_iteration,
                   "training epochs per search iteration")
      ->check(CLI::PositiveNumber);
  cmd_train->add_option("--batch-size", train.optimizer.batch_size, "mini-batch size")
      ->check(CLI::PositiveNumber);
  cmd_train->add_option("--step-size", train.optimizer.step_size, "gradient step size")
      ->check(CLI::PositiveNumber);
  cmd_train->add_option("--tau0", train.optimizer.tau0, "initial softmax temperature")
      ->check(CLI::PositiveNumber);
  cmd_train->add_option("--discount", train.optimizer.discount, "temperature discount per iteration")
      ->check(CLI::Range(1e-9, 1.0));
  cmd_train->add_option("--seed", train.optimizer.seed, "master RNG seed");
  cmd_train->add_option("--forest", train.forest_trees, "train a forest with N members")
      ->check(CLI::NonNegativeNumber);
  cmd_train
      ->add_option("--finetune-epochs", train.optimizer.finetune_epochs,
                   "epochs of final-architecture fine-tuning (0 disables)")
      ->check(CLI::NonNegativeNumber);
  cmd_train->add_option("--nzv-freq-ratio", train.nzv.freq_ratio,
                        "near-zero-variance frequency ratio threshold");
  cmd_train->add_option("--nzv-unique-pct", train.nzv.unique_pct,
                        "near-zero-variance percent-unique threshold");
  cmd_train->add_option("--jobs", train.jobs, "worker threads for forest members")
      ->check(CLI::PositiveNumber);
  cmd_train->add_option("--out", train.out_dir, "output directory");

  std::string bench_spec, bench_out;
  std::uint64_t bench_seed = 0;
  int bench_jobs = 0;
  CLI::App* cmd_bench = app.add_subcommand("benchmark", "run the improvement benchmark");
  cmd_bench->add_option("--spec", bench_spec, "benchmark spec JSON")->required();
  cmd_bench->add_option("--out", bench_out, "output directory override");
  CLI::Option* seed_opt = cmd_bench->add_option("--seed", bench_seed, "master seed override");
  cmd_bench->add_option("--jobs", bench_jobs, "worker threads override")
      ->check(CLI::PositiveNumber);

  std::string dot_model, dot_out;
  CLI::App* cmd_dot = app.add_subcommand("export-dot", "render a model file as a DOT graph");
  cmd_dot->add_option("--model", dot_model, "model JSON path")->required();
  cmd_dot->add_option("--out", dot_out, "output DOT path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit 0; bad flags exit 2
  }

  try {
    if (cmd_train->parsed()) return run_train(train);
    if (cmd_bench->parsed())
      return run_benchmark_cmd(bench_spec, bench_out, seed_opt->count() > 0, bench_seed,
                               bench_jobs);
    if (cmd_dot->parsed()) return run_export_dot(dot_model, dot_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
