// ensdiv command line front end. Links the C API only.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "ensdiv.h"

namespace {

constexpr int kExitUsage = 2;

std::string read_file_or_die(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    std::cerr << "error: cannot open " << path << "\n";
    std::exit(kExitUsage);
  }
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return buffer.str();
}

// --out flag, overridden by ENSDIV_OUT_DIR when the flag is absent
std::string resolve_out_dir(const std::string& flag_value, bool flag_given) {
  if (flag_given) return flag_value;
  if (const char* env = std::getenv("ENSDIV_OUT_DIR")) return env;
  return flag_value;
}

void print_log(char* log) {
  if (!log) return;
  std::fputs(log, stdout);
  ensdiv_string_free(log);
}

int map_code(int rc) {
  if (rc == ENSDIV_OK) return 0;
  if (rc == ENSDIV_FAIL) return 1;
  std::cerr << "error: " << ensdiv_last_error() << "\n";
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ensdiv: deep-ensemble training, diversity diagnostics and theory checks"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string out_dir = "out";
  bool out_given = false;
  app.add_option("--out", out_dir, "output directory for reports")
      ->each([&](const std::string&) { out_given = true; });
  int workers = 1;
  app.add_option("--workers", workers, "worker threads for sweep cells")->check(CLI::Range(1, 256));
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "seed override (0 keeps config/suite defaults)");

  auto* verify = app.add_subcommand("verify", "run theory certification suites");
  std::vector<std::string> suites;
  verify->add_option("--suites", suites, "suite names (default: all)")->delimiter(',');
  double pathology_beta = -1.0;
  verify->add_option("--beta", pathology_beta, "beta for the real-line pathology trace (> 1)");

  auto* sweep = app.add_subcommand("sweep", "train across a beta grid and emit sweep.csv");
  std::string sweep_config;
  sweep->add_option("--config", sweep_config, "JSON run configuration")->required();

  auto* diagnose = app.add_subcommand("diagnose", "run a collusion diagnostic");
  std::string diag_kind;
  diagnose->add_option("kind", diag_kind, "debias | dropout | gap")->required();
  std::string diag_config;
  diagnose->add_option("--config", diag_config, "JSON run configuration")->required();

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset as CSV");
  std::string gen_kind;
  gen->add_option("kind", gen_kind, "regression | classification")->required();
  std::string gen_params = "{}";
  gen->add_option("--params", gen_params, "JSON generator parameters (inline)");
  std::string gen_out;
  gen->add_option("--out-file", gen_out, "destination CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  const std::string resolved_out = resolve_out_dir(out_dir, out_given);
  char* log = nullptr;

  if (verify->parsed()) {
    std::string joined;
    for (const std::string& s : suites) {
      if (!joined.empty()) joined += ",";
      joined += s;
    }
    const int rc = ensdiv_verify(joined.empty() ? "all" : joined.c_str(), resolved_out.c_str(),
                                 seed, pathology_beta, &log);
    print_log(log);
    return map_code(rc);
  }

  if (sweep->parsed()) {
    const std::string config = read_file_or_die(sweep_config);
    const int rc = ensdiv_sweep(config.c_str(), resolved_out.c_str(), workers, &log);
    print_log(log);
    return map_code(rc);
  }

  if (diagnose->parsed()) {
    const std::string config = read_file_or_die(diag_config);
    const int rc =
        ensdiv_diagnose(diag_kind.c_str(), config.c_str(), resolved_out.c_str(), &log);
    print_log(log);
    return map_code(rc);
  }

  if (gen->parsed()) {
    const int rc = ensdiv_gen_data(gen_kind.c_str(), gen_params.c_str(), gen_out.c_str(), &log);
    print_log(log);
    return map_code(rc);
  }

  return kExitUsage;
}
