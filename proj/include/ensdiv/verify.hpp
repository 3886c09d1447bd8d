#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ensdiv/theory.hpp"

namespace ensdiv {

struct VerifyOptions {
  std::uint64_t seed = 20240331;     // fixed default so reruns are stable
  double pathology_beta = 1.5;       // real-line case; > 1 required
  std::string out_dir;               // empty -> no report files
};

struct SuiteResult {
  std::string name;
  bool pass = false;
  std::vector<std::string> lines;  // one human-readable line per check
  double seconds = 0.0;
};

/// decomposition, taylor, pathology, gat, gradients, debias-opt,
/// beta-expectation.
const std::vector<std::string>& verify_suite_names();
bool is_verify_suite(const std::string& name);

/// Runs one certification suite with fixed seeds; writes certificate files
/// into options.out_dir when set.
SuiteResult run_verify_suite(const std::string& name, const VerifyOptions& options);

/// Construction helpers shared by the suites and the acceptance tests.
struct RandomEnsembleSpec {
  AggregationMode mode = AggregationMode::MeanOutput;
  std::size_t learners = 3;
  std::size_t dims = 2;
  std::size_t rows = 1;
  bool equal_weights = false;
  bool one_hot_targets = true;
  double score_scale = 1.5;
};

struct RandomEnsembleInstance {
  EnsembleOutputs outputs;
  Mat y;
  std::vector<double> weights;
};

RandomEnsembleInstance make_random_ensemble(const RandomEnsembleSpec& spec, Rng& rng);

/// Objective value recomputed from raw scores through the aggregation chain;
/// the independent route used by the finite-difference checks.
double beta_loss_from_scores(AggregationMode mode, LossKind kind,
                             const std::vector<Mat>& scores, const std::vector<double>& weights,
                             const Mat& y, double beta);

}  // namespace ensdiv
