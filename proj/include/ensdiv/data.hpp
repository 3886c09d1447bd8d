#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ensdiv/ensemble.hpp"
#include "ensdiv/mat.hpp"
#include "ensdiv/rng.hpp"

namespace ensdiv {

enum class Split { Train, Val, Test };

const char* to_string(Split split);

struct Dataset {
  Mat x;                    // N x p
  Mat y;                    // N x d (regression targets, or one-hot labels)
  std::vector<int> labels;  // classification only, size N
  TaskKind task = TaskKind::Regression;
  std::vector<std::size_t> train_idx, val_idx, test_idx;

  std::size_t n() const { return x.rows(); }
  std::size_t num_features() const { return x.cols(); }
  std::size_t num_outputs() const { return y.cols(); }

  const std::vector<std::size_t>& indices(Split split) const;
  Mat x_split(Split split) const { return x.select_rows(indices(split)); }
  Mat y_split(Split split) const { return y.select_rows(indices(split)); }
  std::vector<int> labels_split(Split split) const;
  void validate() const;
};

enum class ColumnKind { Numeric, Categorical, Target };

struct CsvColumn {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<double> numeric;         // Numeric/Target cells
  std::vector<std::string> categorical;
  std::vector<std::string> vocabulary;  // Categorical: values in first-seen order
};

struct RawTable {
  std::vector<CsvColumn> columns;
  std::size_t num_rows = 0;

  const CsvColumn* find(const std::string& name) const;
};

using CsvSchema = std::map<std::string, ColumnKind>;

/// Strict CSV reader: header row required, '.' decimals, no quoting. The
/// schema must cover the header exactly; a cell that fails to parse aborts
/// with an error naming its row and column.
RawTable load_csv(const std::string& path, const CsvSchema& schema);
RawTable parse_csv(const std::string& text, const CsvSchema& schema, const std::string& origin);

struct PreprocessOptions {
  bool standardize = true;
  bool one_hot = true;
  double log_skew_threshold = 2.0;  // log1p features whose sample skewness exceeds this
  bool standardize_targets = true;  // regression targets
};

struct FeatureStats {
  std::string name;
  double mean = 0.0;
  double stddev = 1.0;
  bool log_transformed = false;
};

struct PreprocessStats {
  std::vector<FeatureStats> features;  // one per emitted numeric column
  std::vector<std::pair<std::string, std::vector<std::string>>> vocabularies;
  std::vector<std::string> dropped_constant;  // warning records
  std::vector<FeatureStats> targets;
};

/// Deterministic shuffled split: floor allocation per fraction with the
/// remainder assigned to the first split. Throws if any split is empty.
std::vector<std::vector<std::size_t>> split_indices(std::size_t n,
                                                    const std::vector<double>& fractions,
                                                    std::uint64_t seed);

/// Fits statistics on the train rows only and applies them to every row.
/// Categorical columns are one-hot encoded; constant numeric columns are
/// dropped with a warning record. task decides how Target columns are read:
/// regression keeps them as real outputs, classification expects one Target
/// column of integer class ids.
std::pair<Dataset, PreprocessStats> preprocess(const RawTable& raw, const PreprocessOptions& options,
                                               TaskKind task,
                                               const std::vector<std::size_t>& train_idx,
                                               const std::vector<std::size_t>& val_idx,
                                               const std::vector<std::size_t>& test_idx);

/// Features are standard normal; the target is a standardized nonlinear mix
/// of sines and pairwise products plus Gaussian noise. collusion_friendly
/// scales the noise relative to the unit-variance clean signal so the
/// signal-to-noise ratio is controlled exactly.
Dataset synth_regression(std::size_t n, std::size_t p, double noise_std, bool collusion_friendly,
                         std::uint64_t seed,
                         const std::vector<double>& fractions = {0.64, 0.16, 0.20});

/// Gaussian class clusters: class c is centered at margin * u_c for random
/// unit directions u_c; labels drawn uniformly.
Dataset synth_classification(std::size_t n, std::size_t p, std::size_t classes, double margin,
                             std::uint64_t seed,
                             const std::vector<double>& fractions = {0.64, 0.16, 0.20});

/// Writes a dataset in the CSV layout produced by gen-data: feature columns,
/// target column(s), and a split tag column.
void write_dataset_csv(const std::string& path, const Dataset& dataset);

Mat one_hot(const std::vector<int>& labels, std::size_t classes);

double sample_skewness(const std::vector<double>& values);

}  // namespace ensdiv
