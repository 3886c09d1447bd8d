#include "ensdiv.h"

#include <cstdlib>
#include <cstring>
#include <sstream>
#include <string>

#include "ensdiv/diagnostics.hpp"
#include "ensdiv/report.hpp"
#include "ensdiv/runner.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& message) { g_last_error = message; }

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

int code_for_current_exception() {
  try {
    throw;
  } catch (const ensdiv::ConfigError& e) {
    set_error(e.what());
    return ENSDIV_BAD_CONFIG;
  } catch (const ensdiv::IoError& e) {
    set_error(e.what());
    return ENSDIV_BAD_CONFIG;
  } catch (const std::exception& e) {
    set_error(e.what());
    return ENSDIV_ERROR;
  } catch (...) {
    set_error("unknown error");
    return ENSDIV_ERROR;
  }
}

std::vector<std::string> split_csv_list(const char* text) {
  std::vector<std::string> out;
  if (!text) return out;
  std::string cur;
  for (const char* p = text;; ++p) {
    if (*p == ',' || *p == '\0') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
      if (*p == '\0') break;
    } else if (*p != ' ') {
      cur.push_back(*p);
    }
  }
  return out;
}

}  // namespace

struct ensdiv_dataset {
  ensdiv::Dataset data;
};

struct ensdiv_model {
  ensdiv::EnsembleModel model;
};

extern "C" {

const char* ensdiv_version(void) { return ensdiv::artifact_version(); }

const char* ensdiv_last_error(void) { return g_last_error.c_str(); }

void ensdiv_string_free(char* s) { std::free(s); }

int ensdiv_verify(const char* suites_csv, const char* out_dir, uint64_t seed,
                  double pathology_beta, char** log_out) {
  set_error("");
  try {
    std::string log;
    const int rc = ensdiv::cmd_verify(split_csv_list(suites_csv), out_dir ? out_dir : "", seed,
                                      pathology_beta, log);
    if (log_out) *log_out = dup_string(log);
    if (rc != 0) set_error("one or more verification suites failed");
    return rc == 0 ? ENSDIV_OK : ENSDIV_FAIL;
  } catch (...) {
    return code_for_current_exception();
  }
}

int ensdiv_sweep(const char* config_json, const char* out_dir, int workers, char** log_out) {
  set_error("");
  try {
    if (!config_json || !out_dir) throw ensdiv::ConfigError("sweep: config and out_dir required");
    std::string log;
    const int rc = ensdiv::cmd_sweep(config_json, out_dir, workers, log);
    if (log_out) *log_out = dup_string(log);
    return rc == 0 ? ENSDIV_OK : ENSDIV_FAIL;
  } catch (...) {
    return code_for_current_exception();
  }
}

int ensdiv_diagnose(const char* kind, const char* config_json, const char* out_dir,
                    char** log_out) {
  set_error("");
  try {
    if (!kind || !config_json || !out_dir)
      throw ensdiv::ConfigError("diagnose: kind, config and out_dir required");
    std::string log;
    const int rc = ensdiv::cmd_diagnose(kind, config_json, out_dir, log);
    if (log_out) *log_out = dup_string(log);
    return rc == 0 ? ENSDIV_OK : ENSDIV_FAIL;
  } catch (...) {
    return code_for_current_exception();
  }
}

int ensdiv_gen_data(const char* kind, const char* params_json, const char* out_path,
                    char** log_out) {
  set_error("");
  try {
    if (!kind || !params_json || !out_path)
      throw ensdiv::ConfigError("gen-data: kind, params and out path required");
    std::string log;
    const int rc = ensdiv::cmd_gen_data(kind, params_json, out_path, log);
    if (log_out) *log_out = dup_string(log);
    return rc == 0 ? ENSDIV_OK : ENSDIV_FAIL;
  } catch (...) {
    return code_for_current_exception();
  }
}

ensdiv_dataset* ensdiv_dataset_create(const char* dataset_json) {
  set_error("");
  try {
    if (!dataset_json) throw ensdiv::ConfigError("dataset config required");
    auto* handle = new ensdiv_dataset{ensdiv::dataset_from_config_text(dataset_json)};
    return handle;
  } catch (...) {
    code_for_current_exception();
    return nullptr;
  }
}

void ensdiv_dataset_free(ensdiv_dataset* dataset) { delete dataset; }

int ensdiv_dataset_shape(const ensdiv_dataset* dataset, size_t* n, size_t* features,
                         size_t* outputs) {
  set_error("");
  if (!dataset) {
    set_error("null dataset handle");
    return ENSDIV_BAD_CONFIG;
  }
  if (n) *n = dataset->data.n();
  if (features) *features = dataset->data.num_features();
  if (outputs) *outputs = dataset->data.num_outputs();
  return ENSDIV_OK;
}

ensdiv_model* ensdiv_train(const ensdiv_dataset* dataset, const char* config_json) {
  set_error("");
  try {
    if (!dataset || !config_json) throw ensdiv::ConfigError("train: dataset and config required");
    const ensdiv::SingleRunSpec spec = ensdiv::parse_single_run(config_json);
    ensdiv::TrainResult result =
        ensdiv::train_ensemble(dataset->data, spec.ensemble, spec.objective, spec.train);
    return new ensdiv_model{std::move(result.model)};
  } catch (...) {
    code_for_current_exception();
    return nullptr;
  }
}

ensdiv_model* ensdiv_model_load(const char* path) {
  set_error("");
  try {
    if (!path) throw ensdiv::ConfigError("model path required");
    return new ensdiv_model{ensdiv::load_ensemble_file(path)};
  } catch (...) {
    code_for_current_exception();
    return nullptr;
  }
}

int ensdiv_model_save(const ensdiv_model* model, const char* path) {
  set_error("");
  try {
    if (!model || !path) throw ensdiv::ConfigError("model and path required");
    ensdiv::save_ensemble_file(path, model->model);
    return ENSDIV_OK;
  } catch (...) {
    return code_for_current_exception();
  }
}

void ensdiv_model_free(ensdiv_model* model) { delete model; }

namespace {

ensdiv::Split parse_split_name(const char* split) {
  const std::string s = split ? split : "";
  if (s == "train") return ensdiv::Split::Train;
  if (s == "val") return ensdiv::Split::Val;
  if (s == "test") return ensdiv::Split::Test;
  throw ensdiv::ConfigError("split must be train, val or test");
}

}  // namespace

int ensdiv_evaluate(const ensdiv_model* model, const ensdiv_dataset* dataset, const char* split,
                    double metrics[4]) {
  set_error("");
  try {
    if (!model || !dataset || !metrics)
      throw ensdiv::ConfigError("evaluate: model, dataset and metrics required");
    const ensdiv::LossKind kind = ensdiv::default_loss_for(model->model.mode);
    const ensdiv::EvalResult result =
        ensdiv::evaluate(model->model, dataset->data, parse_split_name(split), kind);
    metrics[0] = result.decomp.err;
    metrics[1] = result.decomp.err_bar;
    metrics[2] = result.decomp.div;
    metrics[3] = result.has_accuracy ? result.accuracy : -1.0;
    return ENSDIV_OK;
  } catch (...) {
    return code_for_current_exception();
  }
}

int ensdiv_debias(const ensdiv_model* model, const ensdiv_dataset* dataset, const char* split,
                  double* div_before, double* div_after, double* max_aggregate_change) {
  set_error("");
  try {
    if (!model || !dataset) throw ensdiv::ConfigError("debias: model and dataset required");
    const ensdiv::DebiasReport report =
        ensdiv::debias(model->model, dataset->data, parse_split_name(split));
    if (div_before) *div_before = report.div_before;
    if (div_after) *div_after = report.div_after;
    if (max_aggregate_change) *max_aggregate_change = report.max_aggregate_change;
    return ENSDIV_OK;
  } catch (...) {
    return code_for_current_exception();
  }
}

}  // extern "C"
