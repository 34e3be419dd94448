#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ndt {

/// Parsed delimited table before any preprocessing. Feature columns are
/// numeric; labels are kept as raw strings until encoding.
struct RawTable {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> columns;  // column-major, equal lengths
  std::vector<std::string> labels;
  std::size_t dropped_rows = 0;  // rows discarded for missing values at load

  std::size_t n_rows() const { return labels.size(); }
  std::size_t n_features() const { return columns.size(); }
};

struct RemovedColumn {
  std::string name;
  std::string reason;
};

/// What preprocessing did: which columns were dropped and the centering /
/// scaling statistics. mean/stddev are per retained column, estimated on the
/// training partition only, and stay empty until split() (or a predefined
/// test merge) fixes that partition.
struct PreprocessStats {
  std::vector<RemovedColumn> removed_columns;
  std::vector<std::string> retained_columns;
  std::vector<double> mean;
  std::vector<double> stddev;
  std::size_t dropped_rows = 0;
};

enum class Partition : std::uint8_t { kTrain, kTest };

/// Standardized feature matrix plus encoded labels and the train/test tag.
struct DatasetView {
  std::vector<double> features;  // row-major, n_rows x feature_dim
  std::vector<int> labels;       // in [0, class_count)
  int class_count = 0;
  std::vector<std::string> class_names;       // index -> original label string
  std::vector<Partition> split_assignment;    // empty until split
  std::uint64_t seed = 0;
  PreprocessStats stats;
  bool standardized = false;

  std::size_t n_rows() const { return labels.size(); }
  std::size_t feature_dim() const {
    return labels.empty() ? stats.retained_columns.size() : features.size() / labels.size();
  }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * feature_dim(), feature_dim()};
  }
  bool has_split() const { return !split_assignment.empty(); }
  std::vector<std::size_t> partition_indices(Partition p) const;
};

struct NzvOptions {
  double freq_ratio = 19.0;  // most-frequent / second-most-frequent
  double unique_pct = 10.0;  // percent distinct values
};

/// Parse a delimited text file (first row is the header). Rows with missing
/// fields ("", "NA", "na", "?") are dropped and counted. Non-missing fields
/// that fail to parse as numbers raise NonNumericError; structural problems
/// (wrong field count, empty file) raise ParseError; an absent label column
/// raises MissingLabelError.
RawTable load_table(const std::string& path, const std::string& label_column,
                    char delimiter = ',');

/// Drop near-zero-variance columns and encode labels. A column is removed
/// when it is constant, or when freq-ratio >= opts.freq_ratio and its
/// percent-unique <= opts.unique_pct. The returned view is NOT yet
/// standardized; centering/scaling happens in split(), once the training
/// partition is known. Throws AllColumnsRemovedError if nothing survives.
std::pair<DatasetView, PreprocessStats> preprocess(const RawTable& raw,
                                                   const NzvOptions& opts = {});

/// Assign a deterministic 70/30-style split (uniform random permutation cut
/// at floor(n * train_fraction)), then center and scale every retained column
/// with training-partition statistics. Columns that turn out constant within
/// the training partition are removed at this point. Throws
/// DegenerateSplitError when either partition ends up with < 1 row (train
/// needs >= 2 for a standard deviation).
DatasetView split(const DatasetView& view, double train_fraction, std::uint64_t seed);

/// Variant used when the dataset ships its own test file: rows of `train`
/// become the train partition, rows of `test` the test partition. NZV
/// filtering and standardization statistics come from the training table
/// only.
DatasetView merge_predefined_test(const RawTable& train, const RawTable& test,
                                  const NzvOptions& opts = {});

}  // namespace ndt
