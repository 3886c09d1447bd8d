#include "ensdiv/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ensdiv {

const char* to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

const std::vector<std::size_t>& Dataset::indices(Split split) const {
  switch (split) {
    case Split::Train: return train_idx;
    case Split::Val: return val_idx;
    case Split::Test: return test_idx;
  }
  return train_idx;
}

std::vector<int> Dataset::labels_split(Split split) const {
  std::vector<int> out;
  for (std::size_t i : indices(split)) out.push_back(labels[i]);
  return out;
}

void Dataset::validate() const {
  if (x.rows() != y.rows()) throw_dim_error("dataset", x, y);
  x.require_finite("dataset features");
  y.require_finite("dataset targets");
  std::vector<char> seen(n(), 0);
  for (const auto* idx : {&train_idx, &val_idx, &test_idx})
    for (std::size_t i : *idx) {
      if (i >= n()) throw ConfigError("dataset: split index out of range");
      if (seen[i]) throw ConfigError("dataset: splits overlap");
      seen[i] = 1;
    }
  for (char s : seen)
    if (!s) throw ConfigError("dataset: splits do not cover all rows");
}

const CsvColumn* RawTable::find(const std::string& name) const {
  for (const auto& c : columns)
    if (c.name == name) return &c;
  return nullptr;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

bool parse_double(const std::string& cell, double& out) {
  const std::string t = trim(cell);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && std::isfinite(out);
}

}  // namespace

RawTable parse_csv(const std::string& text, const CsvSchema& schema, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw IoError(origin + ": empty file (header row required)");

  RawTable table;
  const std::vector<std::string> header = split_line(line);
  for (const std::string& raw_name : header) {
    const std::string name = trim(raw_name);
    auto it = schema.find(name);
    if (it == schema.end())
      throw ConfigError(origin + ": column '" + name + "' missing from schema");
    CsvColumn col;
    col.name = name;
    col.kind = it->second;
    table.columns.push_back(std::move(col));
  }
  if (table.columns.size() != schema.size())
    throw ConfigError(origin + ": schema names columns absent from the header");

  std::size_t row = 1;  // header is row 0
  while (std::getline(is, line)) {
    if (trim(line).empty()) {
      ++row;
      continue;
    }
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != table.columns.size()) {
      std::ostringstream os;
      os << origin << ": row " << row << " has " << cells.size() << " cells, expected "
         << table.columns.size();
      throw IoError(os.str());
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      CsvColumn& col = table.columns[c];
      if (col.kind == ColumnKind::Categorical) {
        const std::string v = trim(cells[c]);
        col.categorical.push_back(v);
        if (std::find(col.vocabulary.begin(), col.vocabulary.end(), v) == col.vocabulary.end())
          col.vocabulary.push_back(v);
      } else {
        double v = 0.0;
        if (!parse_double(cells[c], v)) {
          std::ostringstream os;
          os << origin << ": row " << row << ", column '" << col.name
             << "': cannot parse numeric cell '" << trim(cells[c]) << "'";
          throw IoError(os.str());
        }
        col.numeric.push_back(v);
      }
    }
    ++table.num_rows;
    ++row;
  }
  return table;
}

RawTable load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open CSV file: " + path);
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return parse_csv(buffer.str(), schema, path);
}

std::vector<std::vector<std::size_t>> split_indices(std::size_t n,
                                                    const std::vector<double>& fractions,
                                                    std::uint64_t seed) {
  if (fractions.empty()) throw ConfigError("split: no fractions given");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ConfigError("split: fractions must be positive");
    sum += f;
  }
  if (std::fabs(sum - 1.0) > 1e-9) throw ConfigError("split: fractions must sum to 1");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<std::size_t> sizes;
  std::size_t assigned = 0;
  for (double f : fractions) {
    const auto s = static_cast<std::size_t>(std::floor(f * static_cast<double>(n)));
    sizes.push_back(s);
    assigned += s;
  }
  sizes.front() += n - assigned;  // remainder goes to the first split

  std::vector<std::vector<std::size_t>> out;
  std::size_t pos = 0;
  for (std::size_t s : sizes) {
    if (s == 0) throw ConfigError("split: a split would be empty");
    out.emplace_back(order.begin() + pos, order.begin() + pos + s);
    pos += s;
  }
  return out;
}

double sample_skewness(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double m2 = 0.0, m3 = 0.0;
  for (double v : values) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  if (m2 <= 0.0) return 0.0;
  return m3 / std::pow(m2, 1.5);
}

namespace {

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

MeanStd train_stats(const std::vector<double>& all, const std::vector<std::size_t>& train_idx) {
  MeanStd s;
  const double n = static_cast<double>(train_idx.size());
  for (std::size_t i : train_idx) s.mean += all[i];
  s.mean /= n;
  double var = 0.0;
  for (std::size_t i : train_idx) {
    const double d = all[i] - s.mean;
    var += d * d;
  }
  s.stddev = std::sqrt(var / n);
  return s;
}

}  // namespace

std::pair<Dataset, PreprocessStats> preprocess(const RawTable& raw,
                                               const PreprocessOptions& options, TaskKind task,
                                               const std::vector<std::size_t>& train_idx,
                                               const std::vector<std::size_t>& val_idx,
                                               const std::vector<std::size_t>& test_idx) {
  if (train_idx.empty()) throw ConfigError("preprocess: empty train split");
  const std::size_t n = raw.num_rows;

  PreprocessStats stats;
  std::vector<std::vector<double>> feature_cols;
  std::vector<std::vector<double>> target_cols;

  for (const CsvColumn& col : raw.columns) {
    switch (col.kind) {
      case ColumnKind::Numeric: {
        std::vector<double> values = col.numeric;
        FeatureStats fs;
        fs.name = col.name;
        if (options.log_skew_threshold > 0.0) {
          std::vector<double> train_vals;
          double min_val = values.empty() ? 0.0 : values[0];
          for (double v : values) min_val = std::min(min_val, v);
          for (std::size_t i : train_idx) train_vals.push_back(values[i]);
          // log1p needs arguments > -1; restrict to nonnegative columns
          if (min_val >= 0.0 && sample_skewness(train_vals) > options.log_skew_threshold) {
            for (double& v : values) v = std::log1p(v);
            fs.log_transformed = true;
          }
        }
        const MeanStd ms = train_stats(values, train_idx);
        if (ms.stddev <= 0.0) {
          stats.dropped_constant.push_back(col.name);
          continue;
        }
        if (options.standardize) {
          fs.mean = ms.mean;
          fs.stddev = ms.stddev;
          for (double& v : values) v = (v - ms.mean) / ms.stddev;
        }
        stats.features.push_back(fs);
        feature_cols.push_back(std::move(values));
        break;
      }
      case ColumnKind::Categorical: {
        if (!options.one_hot)
          throw ConfigError("preprocess: categorical column '" + col.name +
                            "' requires one_hot encoding");
        stats.vocabularies.emplace_back(col.name, col.vocabulary);
        for (std::size_t v = 0; v < col.vocabulary.size(); ++v) {
          std::vector<double> indicator(n, 0.0);
          for (std::size_t i = 0; i < n; ++i)
            if (col.categorical[i] == col.vocabulary[v]) indicator[i] = 1.0;
          FeatureStats fs;
          fs.name = col.name + "=" + col.vocabulary[v];
          stats.features.push_back(fs);
          feature_cols.push_back(std::move(indicator));
        }
        break;
      }
      case ColumnKind::Target:
        target_cols.push_back(col.numeric);
        break;
    }
  }

  if (target_cols.empty()) throw ConfigError("preprocess: schema names no Target column");
  if (feature_cols.empty()) throw ConfigError("preprocess: no usable feature columns");

  Dataset ds;
  ds.task = task;
  ds.train_idx = train_idx;
  ds.val_idx = val_idx;
  ds.test_idx = test_idx;
  ds.x = Mat(n, feature_cols.size());
  for (std::size_t c = 0; c < feature_cols.size(); ++c)
    for (std::size_t r = 0; r < n; ++r) ds.x(r, c) = feature_cols[c][r];

  if (task == TaskKind::Regression) {
    for (auto& col : target_cols) {
      FeatureStats fs;
      fs.name = "target";
      if (options.standardize_targets) {
        const MeanStd ms = train_stats(col, train_idx);
        if (ms.stddev <= 0.0) throw ConfigError("preprocess: constant regression target");
        fs.mean = ms.mean;
        fs.stddev = ms.stddev;
        for (double& v : col) v = (v - ms.mean) / ms.stddev;
      }
      stats.targets.push_back(fs);
    }
    ds.y = Mat(n, target_cols.size());
    for (std::size_t c = 0; c < target_cols.size(); ++c)
      for (std::size_t r = 0; r < n; ++r) ds.y(r, c) = target_cols[c][r];
  } else {
    if (target_cols.size() != 1)
      throw ConfigError("preprocess: classification expects exactly one Target column");
    int max_label = 0;
    ds.labels.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      const double v = target_cols[0][r];
      const int label = static_cast<int>(std::llround(v));
      if (std::fabs(v - label) > 1e-9 || label < 0)
        throw ConfigError("preprocess: classification labels must be nonnegative integers");
      ds.labels[r] = label;
      max_label = std::max(max_label, label);
    }
    ds.y = one_hot(ds.labels, static_cast<std::size_t>(max_label) + 1);
  }

  ds.validate();
  return {std::move(ds), std::move(stats)};
}

Mat one_hot(const std::vector<int>& labels, std::size_t classes) {
  Mat y(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
      throw DomainError("one_hot: label out of range");
    y(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return y;
}

namespace {

void standardize_with_train(Mat& m, const std::vector<std::size_t>& train_idx) {
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t i : train_idx) mean += m(i, c);
    mean /= static_cast<double>(train_idx.size());
    double var = 0.0;
    for (std::size_t i : train_idx) {
      const double d = m(i, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(train_idx.size());
    const double stddev = std::sqrt(var);
    if (stddev <= 0.0) continue;
    for (std::size_t r = 0; r < m.rows(); ++r) m(r, c) = (m(r, c) - mean) / stddev;
  }
}

}  // namespace

Dataset synth_regression(std::size_t n, std::size_t p, double noise_std, bool collusion_friendly,
                         std::uint64_t seed, const std::vector<double>& fractions) {
  if (n < 10) throw ConfigError("synth_regression: need n >= 10");
  if (p < 1) throw ConfigError("synth_regression: need p >= 1");

  Rng rng(Rng::derive_seed(seed, 0x5e9f1));
  Dataset ds;
  ds.task = TaskKind::Regression;
  ds.x = Mat(n, p);
  for (std::size_t i = 0; i < ds.x.size(); ++i) ds.x.data()[i] = rng.normal();

  std::vector<double> clean(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double v = 0.0;
    for (std::size_t c = 0; c < p; ++c) v += std::sin(1.3 * ds.x(r, c));
    for (std::size_t c = 0; c + 1 < p; ++c) v += 0.5 * ds.x(r, c) * ds.x(r, c + 1);
    clean[r] = v;
  }

  if (collusion_friendly) {
    // unit-variance clean signal, so noise_std is the exact noise-to-signal ratio
    double mean = 0.0, var = 0.0;
    for (double v : clean) mean += v;
    mean /= static_cast<double>(n);
    for (double v : clean) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double s = var > 0.0 ? std::sqrt(var) : 1.0;
    for (double& v : clean) v = (v - mean) / s;
  }

  ds.y = Mat(n, 1);
  for (std::size_t r = 0; r < n; ++r) ds.y(r, 0) = clean[r] + noise_std * rng.normal();

  auto splits = split_indices(n, fractions, Rng::derive_seed(seed, 0x5b17));
  ds.train_idx = splits[0];
  ds.val_idx = splits.size() > 1 ? splits[1] : std::vector<std::size_t>{};
  ds.test_idx = splits.size() > 2 ? splits[2] : std::vector<std::size_t>{};

  standardize_with_train(ds.x, ds.train_idx);
  standardize_with_train(ds.y, ds.train_idx);
  ds.validate();
  return ds;
}

Dataset synth_classification(std::size_t n, std::size_t p, std::size_t classes, double margin,
                             std::uint64_t seed, const std::vector<double>& fractions) {
  if (n < 10) throw ConfigError("synth_classification: need n >= 10");
  if (p < 1) throw ConfigError("synth_classification: need p >= 1");
  if (classes < 2) throw ConfigError("synth_classification: need classes >= 2");

  Rng rng(Rng::derive_seed(seed, 0xc1a55));
  // class centers: margin * random unit direction
  std::vector<std::vector<double>> centers(classes, std::vector<double>(p, 0.0));
  for (std::size_t c = 0; c < classes; ++c) {
    double norm = 0.0;
    for (std::size_t k = 0; k < p; ++k) {
      centers[c][k] = rng.normal();
      norm += centers[c][k] * centers[c][k];
    }
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < p; ++k) centers[c][k] *= margin / norm;
  }

  Dataset ds;
  ds.task = TaskKind::Classification;
  ds.x = Mat(n, p);
  ds.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto label = static_cast<int>(rng.below(classes));
    ds.labels[r] = label;
    for (std::size_t k = 0; k < p; ++k)
      ds.x(r, k) = centers[static_cast<std::size_t>(label)][k] + rng.normal();
  }
  ds.y = one_hot(ds.labels, classes);

  auto splits = split_indices(n, fractions, Rng::derive_seed(seed, 0x5b17));
  ds.train_idx = splits[0];
  ds.val_idx = splits.size() > 1 ? splits[1] : std::vector<std::size_t>{};
  ds.test_idx = splits.size() > 2 ? splits[2] : std::vector<std::size_t>{};

  standardize_with_train(ds.x, ds.train_idx);
  ds.validate();
  return ds;
}

void write_dataset_csv(const std::string& path, const Dataset& dataset) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.precision(17);

  for (std::size_t c = 0; c < dataset.num_features(); ++c) os << "x" << c << ",";
  if (dataset.task == TaskKind::Regression) {
    for (std::size_t c = 0; c < dataset.num_outputs(); ++c) os << "target" << c << ",";
  } else {
    os << "label,";
  }
  os << "split\n";

  std::vector<const char*> tag(dataset.n(), "train");
  for (std::size_t i : dataset.val_idx) tag[i] = "val";
  for (std::size_t i : dataset.test_idx) tag[i] = "test";

  for (std::size_t r = 0; r < dataset.n(); ++r) {
    for (std::size_t c = 0; c < dataset.num_features(); ++c) os << dataset.x(r, c) << ",";
    if (dataset.task == TaskKind::Regression) {
      for (std::size_t c = 0; c < dataset.num_outputs(); ++c) os << dataset.y(r, c) << ",";
    } else {
      os << dataset.labels[r] << ",";
    }
    os << tag[r] << "\n";
  }
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace ensdiv
