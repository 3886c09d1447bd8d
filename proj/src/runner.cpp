#include "ensdiv/runner.hpp"

#include <json.hpp>

#include <cmath>
#include <set>
#include <sstream>

#include "ensdiv/diagnostics.hpp"
#include "ensdiv/report.hpp"

namespace ensdiv {

namespace {

using nlohmann::json;

json parse_json(const std::string& text, const char* what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError(std::string(what) + ": invalid JSON");
  return j;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const char* section) {
  if (!j.is_object()) throw ConfigError(std::string(section) + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError(std::string(section) + ": unknown key '" + it.key() + "'");
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

template <class T>
T require(const json& j, const char* key, const char* section) {
  if (!j.contains(key))
    throw ConfigError(std::string(section) + ": missing required key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(section) + ": bad value for '" + key + "'");
  }
}

AggregationMode parse_mode(const std::string& s) {
  if (s == "mean-output") return AggregationMode::MeanOutput;
  if (s == "score-avg") return AggregationMode::ScoreAvg;
  if (s == "prob-avg") return AggregationMode::ProbAvg;
  throw ConfigError("unknown aggregation mode '" + s + "'");
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ConfigError("unknown split '" + s + "'");
}

Dataset dataset_from_config(const json& cfg) {
  const std::string kind = require<std::string>(cfg, "kind", "dataset");
  if (kind == "synth-regression") {
    check_keys(cfg, {"kind", "n", "p", "noise_std", "collusion_friendly", "seed", "fractions"},
               "dataset");
    return synth_regression(require<std::size_t>(cfg, "n", "dataset"),
                            require<std::size_t>(cfg, "p", "dataset"),
                            get_or<double>(cfg, "noise_std", 0.3),
                            get_or<bool>(cfg, "collusion_friendly", true),
                            get_or<std::uint64_t>(cfg, "seed", 1),
                            get_or<std::vector<double>>(cfg, "fractions", {0.64, 0.16, 0.20}));
  }
  if (kind == "synth-classification") {
    check_keys(cfg, {"kind", "n", "p", "classes", "margin", "seed", "fractions"}, "dataset");
    return synth_classification(require<std::size_t>(cfg, "n", "dataset"),
                                require<std::size_t>(cfg, "p", "dataset"),
                                get_or<std::size_t>(cfg, "classes", 2),
                                get_or<double>(cfg, "margin", 2.0),
                                get_or<std::uint64_t>(cfg, "seed", 1),
                                get_or<std::vector<double>>(cfg, "fractions", {0.64, 0.16, 0.20}));
  }
  if (kind == "csv") {
    check_keys(cfg,
               {"kind", "path", "schema", "task", "split_column", "fractions", "split_seed",
                "standardize", "one_hot", "log_skew_threshold", "standardize_targets"},
               "dataset");
    const std::string path = require<std::string>(cfg, "path", "dataset");
    const json schema_json = require<json>(cfg, "schema", "dataset");
    CsvSchema schema;
    for (auto it = schema_json.begin(); it != schema_json.end(); ++it) {
      const std::string v = it.value().get<std::string>();
      ColumnKind ck;
      if (v == "numeric")
        ck = ColumnKind::Numeric;
      else if (v == "categorical")
        ck = ColumnKind::Categorical;
      else if (v == "target")
        ck = ColumnKind::Target;
      else
        throw ConfigError("dataset.schema: unknown column kind '" + v + "'");
      schema[it.key()] = ck;
    }
    const std::string task_name = get_or<std::string>(cfg, "task", "regression");
    const TaskKind task =
        task_name == "classification" ? TaskKind::Classification : TaskKind::Regression;

    RawTable raw = load_csv(path, schema);

    PreprocessOptions options;
    options.standardize = get_or<bool>(cfg, "standardize", true);
    options.one_hot = get_or<bool>(cfg, "one_hot", true);
    options.log_skew_threshold = get_or<double>(cfg, "log_skew_threshold", 2.0);
    options.standardize_targets = get_or<bool>(cfg, "standardize_targets", true);

    std::vector<std::size_t> train_idx, val_idx, test_idx;
    const std::string split_column = get_or<std::string>(cfg, "split_column", "");
    if (!split_column.empty()) {
      const CsvColumn* col = raw.find(split_column);
      if (!col || col->kind != ColumnKind::Categorical)
        throw ConfigError("dataset.split_column must name a categorical column");
      for (std::size_t r = 0; r < raw.num_rows; ++r) {
        const std::string& tag = col->categorical[r];
        if (tag == "train")
          train_idx.push_back(r);
        else if (tag == "val")
          val_idx.push_back(r);
        else if (tag == "test")
          test_idx.push_back(r);
        else
          throw ConfigError("dataset.split_column: unknown tag '" + tag + "'");
      }
      RawTable without;
      without.num_rows = raw.num_rows;
      for (CsvColumn& c : raw.columns)
        if (c.name != split_column) without.columns.push_back(std::move(c));
      raw = std::move(without);
    } else {
      const auto fractions = get_or<std::vector<double>>(cfg, "fractions", {0.64, 0.16, 0.20});
      auto splits = split_indices(raw.num_rows, fractions, get_or<std::uint64_t>(cfg, "split_seed", 1));
      train_idx = splits[0];
      if (splits.size() > 1) val_idx = splits[1];
      if (splits.size() > 2) test_idx = splits[2];
    }
    return preprocess(raw, options, task, train_idx, val_idx, test_idx).first;
  }
  throw ConfigError("dataset.kind must be synth-regression, synth-classification or csv");
}

struct RunConfig {
  Dataset dataset;
  EnsembleConfig ensemble;
  std::vector<double> betas;
  bool is_gat = false;
  GatObjective gat;
  TrainConfig train;
  std::vector<std::uint64_t> seeds;
  std::vector<double> dropout_fractions = {0.2, 0.4, 0.6};
  std::size_t dropout_trials = 100;
  Split debias_split = Split::Test;
  Split dropout_split = Split::Test;
  std::string checkpoint;
  bool save_models = false;
};

RunConfig parse_run_config(const std::string& text) {
  const json j = parse_json(text, "config");
  check_keys(j, {"dataset", "ensemble", "objective", "train", "seeds", "diagnostics",
                 "checkpoint", "save_models"},
             "config");

  RunConfig cfg;
  cfg.dataset = dataset_from_config(require<json>(j, "dataset", "config"));

  const json ens = require<json>(j, "ensemble", "config");
  check_keys(ens, {"learners", "hidden", "mode", "weights"}, "ensemble");
  cfg.ensemble.num_learners = require<std::size_t>(ens, "learners", "ensemble");
  cfg.ensemble.hidden = get_or<std::vector<std::size_t>>(ens, "hidden", {20});
  cfg.ensemble.mode = parse_mode(get_or<std::string>(ens, "mode", "mean-output"));
  cfg.ensemble.task = cfg.ensemble.mode == AggregationMode::MeanOutput ? TaskKind::Regression
                                                                       : TaskKind::Classification;
  cfg.ensemble.weights = get_or<std::vector<double>>(ens, "weights", {});

  const json obj = require<json>(j, "objective", "config");
  check_keys(obj, {"betas", "gat_alpha", "gat_variant"}, "objective");
  if (obj.contains("gat_alpha")) {
    cfg.is_gat = true;
    cfg.gat.alpha = require<double>(obj, "gat_alpha", "objective");
    const std::string variant = get_or<std::string>(obj, "gat_variant", "full");
    if (variant == "full")
      cfg.gat.variant = GatObjective::Variant::Full;
    else if (variant == "leave-one-out")
      cfg.gat.variant = GatObjective::Variant::LeaveOneOut;
    else
      throw ConfigError("objective.gat_variant must be 'full' or 'leave-one-out'");
  } else {
    cfg.betas = require<std::vector<double>>(obj, "betas", "objective");
    if (cfg.betas.empty()) throw ConfigError("objective.betas is empty");
    for (double b : cfg.betas)
      if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("objective.betas entries must lie in [0,1]");
  }

  const json tr = require<json>(j, "train", "config");
  check_keys(tr,
             {"optimizer", "lr", "momentum", "b1", "b2", "eps", "batch_size", "max_epochs",
              "patience", "weight_decay", "learner_dropout"},
             "train");
  const std::string opt_name = get_or<std::string>(tr, "optimizer", "sgd-momentum");
  const double lr = get_or<double>(tr, "lr", 0.01);
  if (opt_name == "sgd-momentum") {
    cfg.train.optimizer = SgdMomentum{lr, get_or<double>(tr, "momentum", 0.9)};
  } else if (opt_name == "adam") {
    cfg.train.optimizer = Adam{lr, get_or<double>(tr, "b1", 0.9), get_or<double>(tr, "b2", 0.999),
                               get_or<double>(tr, "eps", 1e-8)};
  } else {
    throw ConfigError("train.optimizer must be 'sgd-momentum' or 'adam'");
  }
  cfg.train.batch_size = get_or<std::size_t>(tr, "batch_size", 32);
  cfg.train.max_epochs = get_or<std::size_t>(tr, "max_epochs", 100);
  cfg.train.patience = get_or<std::size_t>(tr, "patience", 5);
  cfg.train.weight_decay = get_or<double>(tr, "weight_decay", 0.0);
  cfg.train.learner_dropout_p = get_or<double>(tr, "learner_dropout", 0.0);
  cfg.train.validate();

  cfg.seeds = get_or<std::vector<std::uint64_t>>(j, "seeds", {1});
  if (cfg.seeds.empty()) throw ConfigError("config: seeds is empty");

  if (j.contains("diagnostics")) {
    const json diag = j.at("diagnostics");
    check_keys(diag, {"dropout_fractions", "dropout_trials", "debias_split", "dropout_split"},
               "diagnostics");
    cfg.dropout_fractions =
        get_or<std::vector<double>>(diag, "dropout_fractions", cfg.dropout_fractions);
    cfg.dropout_trials = get_or<std::size_t>(diag, "dropout_trials", cfg.dropout_trials);
    cfg.debias_split = parse_split(get_or<std::string>(diag, "debias_split", "test"));
    cfg.dropout_split = parse_split(get_or<std::string>(diag, "dropout_split", "test"));
  }
  cfg.checkpoint = get_or<std::string>(j, "checkpoint", "");
  cfg.save_models = get_or<bool>(j, "save_models", false);
  return cfg;
}

std::string cell_suffix(double beta, std::uint64_t seed) {
  std::ostringstream os;
  os << "beta" << format_double(beta) << "_seed" << seed;
  return os.str();
}

Table history_table(const TrainHistory& history) {
  Table t;
  t.header = {"epoch",        "train_err", "train_err_bar", "train_div", "val_err",
              "val_err_bar",  "val_div",   "test_err",      "test_err_bar", "test_div"};
  for (std::size_t e = 0; e < history.epochs.size(); ++e) {
    const EpochRecord& rec = history.epochs[e];
    std::vector<std::string> row;
    row.push_back(std::to_string(e));
    row.push_back(format_double(rec.train.err));
    row.push_back(format_double(rec.train.err_bar));
    row.push_back(format_double(rec.train.div));
    for (const auto& opt : {rec.val, rec.test}) {
      if (opt) {
        row.push_back(format_double(opt->err));
        row.push_back(format_double(opt->err_bar));
        row.push_back(format_double(opt->div));
      } else {
        row.insert(row.end(), {"", "", ""});
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace

int cmd_verify(const std::vector<std::string>& suites, const std::string& out_dir,
               std::uint64_t seed, double pathology_beta, std::string& log) {
  VerifyOptions options;
  if (seed != 0) options.seed = seed;
  if (pathology_beta > 0.0) {
    if (pathology_beta <= 1.0)
      throw ConfigError("verify: --beta must exceed 1 for the pathology trace");
    options.pathology_beta = pathology_beta;
  }
  options.out_dir = out_dir;

  std::vector<std::string> to_run = suites;
  if (to_run.empty() || (to_run.size() == 1 && to_run[0] == "all")) to_run = verify_suite_names();
  for (const std::string& name : to_run)
    if (!is_verify_suite(name)) throw ConfigError("unknown verify suite: " + name);

  std::ostringstream os;
  bool all_pass = true;
  for (const std::string& name : to_run) {
    const SuiteResult result = run_verify_suite(name, options);
    os << "suite " << result.name << ": " << (result.pass ? "PASS" : "FAIL") << " ("
       << format_double(result.seconds) << " s)\n";
    for (const std::string& line : result.lines) os << line << "\n";
    all_pass = all_pass && result.pass;
  }
  log += os.str();
  return all_pass ? 0 : 1;
}

int cmd_sweep(const std::string& config_text, const std::string& out_dir, int workers,
              std::string& log) {
  RunConfig cfg = parse_run_config(config_text);
  if (cfg.is_gat) throw ConfigError("sweep: expects objective.betas (GAT runs train one cell)");
  ensure_directory(out_dir);
  const std::string config_hash = hex64(fnv1a64(config_text));

  const auto results =
      beta_sweep(cfg.dataset, cfg.ensemble, cfg.betas, cfg.seeds, cfg.train, workers);

  Table sweep;
  sweep.header = {"beta",       "seed",        "train_err",  "train_err_bar", "train_div",
                  "val_err",    "val_err_bar", "val_div",    "test_err",      "test_err_bar",
                  "test_div",   "test_accuracy", "best_epoch", "epochs_run"};
  for (const SweepCellResult& cell : results) {
    const SweepRow& r = cell.row;
    sweep.rows.push_back({format_double(r.beta), std::to_string(r.seed),
                          format_double(r.train.err), format_double(r.train.err_bar),
                          format_double(r.train.div), format_double(r.val.err),
                          format_double(r.val.err_bar), format_double(r.val.div),
                          format_double(r.test.err), format_double(r.test.err_bar),
                          format_double(r.test.div),
                          r.has_accuracy ? format_double(r.test_accuracy) : "",
                          std::to_string(r.best_epoch), std::to_string(r.epochs_run)});
  }
  Sidecar sidecar{config_hash, cfg.seeds.front(), "sweep"};
  write_table(out_dir + "/sweep.csv", sweep, sidecar);

  for (const SweepCellResult& cell : results) {
    const std::string suffix = cell_suffix(cell.row.beta, cell.row.seed);
    write_table(out_dir + "/history_" + suffix + ".csv", history_table(cell.history), sidecar);
    if (cfg.save_models)
      save_ensemble_file(out_dir + "/model_" + suffix + ".ckpt", cell.model);
  }
  log += "sweep: wrote " + std::to_string(sweep.rows.size()) + " rows to " + out_dir +
         "/sweep.csv\n";
  return 0;
}

int cmd_diagnose(const std::string& kind, const std::string& config_text,
                 const std::string& out_dir, std::string& log) {
  if (kind != "debias" && kind != "dropout" && kind != "gap")
    throw ConfigError("diagnose: kind must be debias, dropout or gap");
  RunConfig cfg = parse_run_config(config_text);
  ensure_directory(out_dir);
  const std::string config_hash = hex64(fnv1a64(config_text));
  Sidecar sidecar{config_hash, cfg.seeds.front(), "diagnose " + kind};

  struct NamedModel {
    double beta;
    std::uint64_t seed;
    EnsembleModel model;
    TrainHistory history;
  };
  std::vector<NamedModel> models;

  if (!cfg.checkpoint.empty()) {
    if (kind == "gap")
      throw ConfigError("diagnose gap: needs inline training, not a checkpoint");
    NamedModel nm;
    nm.beta = std::nan("");
    nm.seed = 0;
    nm.model = load_ensemble_file(cfg.checkpoint);
    models.push_back(std::move(nm));
  } else {
    if (cfg.is_gat) throw ConfigError("diagnose: expects objective.betas");
    for (double beta : cfg.betas)
      for (std::uint64_t seed : cfg.seeds) {
        TrainConfig tc = cfg.train;
        tc.seed = seed;
        TrainResult result = train_ensemble(cfg.dataset, cfg.ensemble,
                                            TrainingObjective::beta_objective(beta), tc);
        models.push_back({beta, seed, std::move(result.model), std::move(result.history)});
      }
  }

  if (kind == "debias") {
    Table t;
    t.header = {"beta",   "seed",        "split",           "div_before",
                "div_after", "percent_removed", "max_aggregate_change"};
    for (const NamedModel& nm : models) {
      const DebiasReport report = debias(nm.model, cfg.dataset, cfg.debias_split);
      t.rows.push_back({std::isnan(nm.beta) ? "checkpoint" : format_double(nm.beta),
                        std::to_string(nm.seed), to_string(cfg.debias_split),
                        format_double(report.div_before), format_double(report.div_after),
                        report.percent_defined ? format_double(report.percent_removed) : "n/a",
                        format_double(report.max_aggregate_change)});
    }
    write_table(out_dir + "/debias.csv", t, sidecar);
    log += "diagnose debias: wrote " + std::to_string(t.rows.size()) + " rows\n";
    return 0;
  }

  if (kind == "dropout") {
    Table t;
    t.header = {"beta", "seed", "fraction", "trials", "mean_relative_err_increase"};
    const LossKind loss = default_loss_for(cfg.ensemble.mode);
    for (const NamedModel& nm : models) {
      Rng rng(Rng::derive_seed(nm.seed, 0xd20b0));
      const auto cells = dropout_codependence(nm.model, cfg.dataset, cfg.dropout_split,
                                              cfg.dropout_fractions, cfg.dropout_trials, rng, loss);
      for (const DropoutCell& cell : cells)
        t.rows.push_back({std::isnan(nm.beta) ? "checkpoint" : format_double(nm.beta),
                          std::to_string(nm.seed), format_double(cell.fraction),
                          std::to_string(cell.trials),
                          format_double(cell.mean_relative_err_increase)});
    }
    write_table(out_dir + "/dropout.csv", t, sidecar);
    log += "diagnose dropout: wrote " + std::to_string(t.rows.size()) + " rows\n";
    return 0;
  }

  // gap
  for (const NamedModel& nm : models) {
    const auto series = gap_series(nm.history);
    Table t;
    t.header = {"epoch",      "train_err", "test_err",     "gap",
                "train_err_bar", "train_div", "test_err_bar", "test_div"};
    for (const GapPoint& p : series)
      t.rows.push_back({std::to_string(p.epoch), format_double(p.train_err),
                        format_double(p.test_err), format_double(p.gap),
                        format_double(p.train.err_bar), format_double(p.train.div),
                        format_double(p.test.err_bar), format_double(p.test.div)});
    write_table(out_dir + "/gap_" + cell_suffix(nm.beta, nm.seed) + ".csv", t, sidecar);
  }
  log += "diagnose gap: wrote " + std::to_string(models.size()) + " series\n";
  return 0;
}

Dataset dataset_from_config_text(const std::string& dataset_json) {
  return dataset_from_config(parse_json(dataset_json, "dataset"));
}

SingleRunSpec parse_single_run(const std::string& config_text) {
  const json j = parse_json(config_text, "config");
  check_keys(j, {"ensemble", "objective", "train", "seed"}, "config");

  SingleRunSpec spec;
  const json ens = require<json>(j, "ensemble", "config");
  check_keys(ens, {"learners", "hidden", "mode", "weights"}, "ensemble");
  spec.ensemble.num_learners = require<std::size_t>(ens, "learners", "ensemble");
  spec.ensemble.hidden = get_or<std::vector<std::size_t>>(ens, "hidden", {20});
  spec.ensemble.mode = parse_mode(get_or<std::string>(ens, "mode", "mean-output"));
  spec.ensemble.task = spec.ensemble.mode == AggregationMode::MeanOutput
                           ? TaskKind::Regression
                           : TaskKind::Classification;
  spec.ensemble.weights = get_or<std::vector<double>>(ens, "weights", {});

  const json obj = require<json>(j, "objective", "config");
  check_keys(obj, {"beta", "gat_alpha", "gat_variant"}, "objective");
  if (obj.contains("gat_alpha")) {
    const std::string variant = get_or<std::string>(obj, "gat_variant", "full");
    if (variant != "full" && variant != "leave-one-out")
      throw ConfigError("objective.gat_variant must be 'full' or 'leave-one-out'");
    spec.objective = TrainingObjective::gat_objective(
        require<double>(obj, "gat_alpha", "objective"),
        variant == "full" ? GatObjective::Variant::Full : GatObjective::Variant::LeaveOneOut);
  } else {
    spec.objective = TrainingObjective::beta_objective(require<double>(obj, "beta", "objective"));
  }

  const json tr = require<json>(j, "train", "config");
  check_keys(tr,
             {"optimizer", "lr", "momentum", "b1", "b2", "eps", "batch_size", "max_epochs",
              "patience", "weight_decay", "learner_dropout"},
             "train");
  const std::string opt_name = get_or<std::string>(tr, "optimizer", "sgd-momentum");
  const double lr = get_or<double>(tr, "lr", 0.01);
  if (opt_name == "sgd-momentum") {
    spec.train.optimizer = SgdMomentum{lr, get_or<double>(tr, "momentum", 0.9)};
  } else if (opt_name == "adam") {
    spec.train.optimizer = Adam{lr, get_or<double>(tr, "b1", 0.9), get_or<double>(tr, "b2", 0.999),
                                get_or<double>(tr, "eps", 1e-8)};
  } else {
    throw ConfigError("train.optimizer must be 'sgd-momentum' or 'adam'");
  }
  spec.train.batch_size = get_or<std::size_t>(tr, "batch_size", 32);
  spec.train.max_epochs = get_or<std::size_t>(tr, "max_epochs", 100);
  spec.train.patience = get_or<std::size_t>(tr, "patience", 5);
  spec.train.weight_decay = get_or<double>(tr, "weight_decay", 0.0);
  spec.train.learner_dropout_p = get_or<double>(tr, "learner_dropout", 0.0);
  spec.train.seed = get_or<std::uint64_t>(j, "seed", 1);
  spec.train.validate();
  return spec;
}

int cmd_gen_data(const std::string& kind, const std::string& params_text,
                 const std::string& out_path, std::string& log) {
  const json params = parse_json(params_text, "gen-data params");
  Dataset ds;
  if (kind == "regression") {
    check_keys(params, {"n", "p", "noise_std", "collusion_friendly", "seed", "fractions"},
               "gen-data");
    ds = synth_regression(require<std::size_t>(params, "n", "gen-data"),
                          require<std::size_t>(params, "p", "gen-data"),
                          get_or<double>(params, "noise_std", 0.3),
                          get_or<bool>(params, "collusion_friendly", true),
                          get_or<std::uint64_t>(params, "seed", 1),
                          get_or<std::vector<double>>(params, "fractions", {0.64, 0.16, 0.20}));
  } else if (kind == "classification") {
    check_keys(params, {"n", "p", "classes", "margin", "seed", "fractions"}, "gen-data");
    ds = synth_classification(require<std::size_t>(params, "n", "gen-data"),
                              require<std::size_t>(params, "p", "gen-data"),
                              get_or<std::size_t>(params, "classes", 2),
                              get_or<double>(params, "margin", 2.0),
                              get_or<std::uint64_t>(params, "seed", 1),
                              get_or<std::vector<double>>(params, "fractions", {0.64, 0.16, 0.20}));
  } else {
    throw ConfigError("gen-data: kind must be regression or classification");
  }
  write_dataset_csv(out_path, ds);
  log += "gen-data: wrote " + std::to_string(ds.n()) + " rows to " + out_path + "\n";
  return 0;
}

}  // namespace ensdiv
