#pragma once

#include <string>
#include <vector>

#include "ensdiv/train.hpp"
#include "ensdiv/verify.hpp"

namespace ensdiv {

/// Command implementations behind the CLI and the C API. Exit-code contract:
/// 0 success, 1 verification/diagnostic failure. Configuration problems
/// throw ConfigError/IoError, which callers map to exit code 2.

int cmd_verify(const std::vector<std::string>& suites, const std::string& out_dir,
               std::uint64_t seed, double pathology_beta, std::string& log);

int cmd_sweep(const std::string& config_text, const std::string& out_dir, int workers,
              std::string& log);

int cmd_diagnose(const std::string& kind, const std::string& config_text,
                 const std::string& out_dir, std::string& log);

int cmd_gen_data(const std::string& kind, const std::string& params_text,
                 const std::string& out_path, std::string& log);

/// Dataset built from the JSON "dataset" section (synth generators or CSV).
Dataset dataset_from_config_text(const std::string& dataset_json);

/// One training cell: keys ensemble, objective ("beta" or "gat_alpha" /
/// "gat_variant"), train, seed.
struct SingleRunSpec {
  EnsembleConfig ensemble;
  TrainingObjective objective;
  TrainConfig train;
};
SingleRunSpec parse_single_run(const std::string& config_text);

}  // namespace ensdiv
