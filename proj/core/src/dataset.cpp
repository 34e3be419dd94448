#include "ndt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ndt/errors.hpp"
#include "ndt/rng.hpp"

namespace ndt {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& field) {
  return field.empty() || field == "?" || field == "NA" || field == "na" ||
         field == "Na" || field == "nan" || field == "NaN";
}

std::vector<std::string> split_fields(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delimiter) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

struct NzvVerdict {
  bool removed = false;
  std::string reason;
};

NzvVerdict check_nzv(const std::vector<double>& col, const NzvOptions& opts) {
  std::map<double, std::size_t> counts;
  for (double v : col) ++counts[v];
  if (counts.size() <= 1) return {true, "zero variance"};
  std::size_t first = 0, second = 0;
  for (const auto& [value, n] : counts) {
    (void)value;
    if (n >= first) {
      second = first;
      first = n;
    } else if (n > second) {
      second = n;
    }
  }
  double ratio = static_cast<double>(first) / static_cast<double>(second);
  double unique_pct = 100.0 * static_cast<double>(counts.size()) / static_cast<double>(col.size());
  if (ratio >= opts.freq_ratio && unique_pct <= opts.unique_pct)
    return {true, "near zero variance"};
  return {false, {}};
}

// Sorted distinct labels -> indices; the encoding is lexicographic in the
// original label strings, independent of row order.
std::pair<std::vector<int>, std::vector<std::string>> encode_labels(
    const std::vector<std::string>& raw_labels) {
  std::set<std::string> distinct(raw_labels.begin(), raw_labels.end());
  std::vector<std::string> names(distinct.begin(), distinct.end());
  if (names.size() < 2) throw ParseError("label column has fewer than 2 distinct classes");
  std::vector<int> encoded;
  encoded.reserve(raw_labels.size());
  for (const auto& s : raw_labels) {
    auto it = std::lower_bound(names.begin(), names.end(), s);
    encoded.push_back(static_cast<int>(it - names.begin()));
  }
  return {std::move(encoded), std::move(names)};
}

// Center/scale every column with training-partition statistics (sample
// stddev, n-1). Columns constant within the training partition are removed
// here so that every recorded stddev stays > 0.
void standardize_with_train_stats(DatasetView& view) {
  const std::size_t n = view.n_rows();
  const std::size_t p = view.stats.retained_columns.size();
  std::vector<std::size_t> train = view.partition_indices(Partition::kTrain);
  if (train.size() < 2)
    throw DegenerateSplitError("training partition needs at least 2 rows");

  std::vector<double> mean(p, 0.0), sd(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double m = 0.0;
    for (std::size_t i : train) m += view.features[i * p + j];
    m /= static_cast<double>(train.size());
    double ss = 0.0;
    for (std::size_t i : train) {
      double d = view.features[i * p + j] - m;
      ss += d * d;
    }
    mean[j] = m;
    sd[j] = std::sqrt(ss / static_cast<double>(train.size() - 1));
  }

  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < p; ++j) {
    if (sd[j] > 1e-12) {
      keep.push_back(j);
    } else {
      view.stats.removed_columns.push_back(
          {view.stats.retained_columns[j], "zero variance in training partition"});
    }
  }
  if (keep.empty()) throw AllColumnsRemovedError("no feature columns survive preprocessing");

  std::vector<double> out(n * keep.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < keep.size(); ++k) {
      std::size_t j = keep[k];
      out[i * keep.size() + k] = (view.features[i * p + j] - mean[j]) / sd[j];
    }

  std::vector<std::string> kept_names;
  view.stats.mean.clear();
  view.stats.stddev.clear();
  for (std::size_t j : keep) {
    kept_names.push_back(view.stats.retained_columns[j]);
    view.stats.mean.push_back(mean[j]);
    view.stats.stddev.push_back(sd[j]);
  }
  view.stats.retained_columns = std::move(kept_names);
  view.features = std::move(out);
  view.standardized = true;
}

DatasetView view_from_raw(const RawTable& raw, const NzvOptions& opts) {
  if (raw.n_rows() < 2) throw ParseError("table has fewer than 2 rows");

  PreprocessStats stats;
  stats.dropped_rows = raw.dropped_rows;
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < raw.n_features(); ++j) {
    NzvVerdict v = check_nzv(raw.columns[j], opts);
    if (v.removed) {
      stats.removed_columns.push_back({raw.feature_names[j], v.reason});
    } else {
      keep.push_back(j);
      stats.retained_columns.push_back(raw.feature_names[j]);
    }
  }
  if (keep.empty()) throw AllColumnsRemovedError("no feature columns survive preprocessing");

  DatasetView view;
  auto [encoded, names] = encode_labels(raw.labels);
  view.labels = std::move(encoded);
  view.class_names = std::move(names);
  view.class_count = static_cast<int>(view.class_names.size());
  view.features.resize(raw.n_rows() * keep.size());
  for (std::size_t i = 0; i < raw.n_rows(); ++i)
    for (std::size_t k = 0; k < keep.size(); ++k)
      view.features[i * keep.size() + k] = raw.columns[keep[k]][i];
  view.stats = std::move(stats);
  return view;
}

}  // namespace

std::vector<std::size_t> DatasetView::partition_indices(Partition p) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split_assignment.size(); ++i)
    if (split_assignment[i] == p) out.push_back(i);
  return out;
}

RawTable load_table(const std::string& path, const std::string& label_column, char delimiter) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  std::vector<std::string> header = split_fields(line, delimiter);

  std::size_t label_idx = header.size();
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == label_column) label_idx = j;
  if (label_idx == header.size())
    throw MissingLabelError(path + ": label column '" + label_column + "' not found");
  if (header.size() < 2) throw ParseError(path + ": no feature columns");

  RawTable table;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (j != label_idx) table.feature_names.push_back(header[j]);
  table.columns.resize(table.feature_names.size());

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_fields(line, delimiter);
    if (fields.size() != header.size())
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));

    bool missing = false;
    for (const auto& f : fields)
      if (is_missing(f)) missing = true;
    if (missing) {
      ++table.dropped_rows;
      continue;
    }

    std::size_t col = 0;
    std::vector<double> parsed(table.columns.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (j == label_idx) continue;
      const std::string& f = fields[j];
      char* end = nullptr;
      double v = std::strtod(f.c_str(), &end);
      if (end != f.c_str() + f.size() || f.empty())
        throw NonNumericError(path + ":" + std::to_string(line_no) + ": column '" + header[j] +
                              "' value '" + f + "' is not numeric");
      parsed[col++] = v;
    }
    for (std::size_t k = 0; k < parsed.size(); ++k) table.columns[k].push_back(parsed[k]);
    table.labels.push_back(fields[label_idx]);
  }
  return table;
}

std::pair<DatasetView, PreprocessStats> preprocess(const RawTable& raw, const NzvOptions& opts) {
  DatasetView view = view_from_raw(raw, opts);
  PreprocessStats stats = view.stats;
  return {std::move(view), std::move(stats)};
}

DatasetView split(const DatasetView& view, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw DegenerateSplitError("train_fraction must lie strictly between 0 and 1");
  const std::size_t n = view.n_rows();
  const auto n_train =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));
  if (n_train < 2 || n_train >= n)
    throw DegenerateSplitError("split leaves a partition too small (train=" +
                               std::to_string(n_train) + ", test=" + std::to_string(n - n_train) +
                               ")");

  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(perm);

  DatasetView out = view;
  out.seed = seed;
  out.split_assignment.assign(n, Partition::kTest);
  for (std::size_t i = 0; i < n_train; ++i) out.split_assignment[perm[i]] = Partition::kTrain;
  standardize_with_train_stats(out);
  return out;
}

DatasetView merge_predefined_test(const RawTable& train, const RawTable& test,
                                  const NzvOptions& opts) {
  if (train.feature_names != test.feature_names)
    throw ParseError("train/test feature columns differ");

  // NZV verdicts come from the training table alone.
  DatasetView train_view = view_from_raw(train, opts);

  std::vector<std::string> all_labels = train.labels;
  all_labels.insert(all_labels.end(), test.labels.begin(), test.labels.end());
  auto [encoded, names] = encode_labels(all_labels);

  DatasetView out;
  out.class_names = std::move(names);
  out.class_count = static_cast<int>(out.class_names.size());
  out.labels = std::move(encoded);
  out.stats = train_view.stats;
  out.stats.dropped_rows += test.dropped_rows;

  std::vector<std::size_t> keep;
  for (const auto& name : out.stats.retained_columns) {
    auto it = std::find(train.feature_names.begin(), train.feature_names.end(), name);
    keep.push_back(static_cast<std::size_t>(it - train.feature_names.begin()));
  }
  const std::size_t p = keep.size();
  const std::size_t n1 = train.n_rows(), n2 = test.n_rows();
  out.features.resize((n1 + n2) * p);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t k = 0; k < p; ++k) out.features[i * p + k] = train.columns[keep[k]][i];
  for (std::size_t i = 0; i < n2; ++i)
    for (std::size_t k = 0; k < p; ++k)
      out.features[(n1 + i) * p + k] = test.columns[keep[k]][i];

  out.split_assignment.assign(n1, Partition::kTrain);
  out.split_assignment.insert(out.split_assignment.end(), n2, Partition::kTest);
  standardize_with_train_stats(out);
  return out;
}

}  // namespace ndt
