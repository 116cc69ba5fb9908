#include "sppb/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "csv_util.hpp"
#include "sppb/cohort.hpp"
#include "sppb/dataset.hpp"
#include "sppb/errors.hpp"
#include "sppb/eval.hpp"
#include "sppb/preprocess.hpp"
#include "sppb/regressor.hpp"
#include "sppb/schema.hpp"
#include "sppb/shap.hpp"
#include "sppb/synthetic.hpp"
#include "sppb/version.hpp"

namespace sppb {

namespace {

namespace fs = std::filesystem;

constexpr const char* kCohortFile = "cohort.csv";
constexpr const char* kDatasetFile = "dataset.csv";
constexpr const char* kPreprocessFile = "preprocess.json";
constexpr const char* kModelFile = "model.json";
constexpr const char* kCvReportCsv = "cv_report.csv";
constexpr const char* kCvReportJson = "cv_report.json";
constexpr const char* kSummaryFile = "summary.csv";
constexpr const char* kAttributionsFile = "attributions.csv";
constexpr const char* kRankingFile = "ranking.csv";
constexpr const char* kBeeswarmCsv = "beeswarm.csv";
constexpr const char* kBeeswarmSvg = "beeswarm.svg";
constexpr const char* kExplainFile = "explain.json";
constexpr const char* kSimplifiedFile = "simplified.csv";
constexpr const char* kManifestFile = "manifest.json";

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << text;
  out.close();
  if (!out) throw DataError("write failed: " + path);
}

/// Per-run state. Stage functions materialize missing upstream artifacts on
/// demand and cache the loaded objects so composed stages compute each one
/// once. Manifest bookkeeping records files inside the output directory by
/// bare name and external files by the configured path.
struct Run {
  const RunConfig& config;
  bool verbose = false;
  fs::path out;
  std::set<std::string> inputs;
  std::set<std::string> artifacts;

  std::optional<FeatureSchema> schema;
  std::optional<SupervisedDataset> dataset;
  std::optional<PreprocessModel> prep;
  // dataset with X globally imputed and scaled; feeds cross-validation under
  // global fit scope, the final model fit, and the attribution stage
  std::optional<SupervisedDataset> scaled;
  std::optional<TrainedRegressor> model;
  std::optional<FeatureRanking> ranking;
  std::optional<FoldPlan> folds;

  Run(const RunConfig& c, bool v)
      : config(c), verbose(v), out(c.output.directory) {}

  std::string path(const std::string& name) const {
    return (out / name).string();
  }
  std::string artifact(const std::string& name) {
    artifacts.insert(name);
    return path(name);
  }
  std::string input(const std::string& name) {
    inputs.insert(name);
    return path(name);
  }
  void log(const std::string& stage, const std::string& message) const {
    if (verbose) std::cerr << "[" << stage << "] " << message << "\n";
  }
};

const FeatureSchema& schema_for(Run& run) {
  if (!run.schema) {
    if (run.config.data.schema_path.empty()) {
      run.schema = default_schema();
    } else {
      run.inputs.insert(run.config.data.schema_path);
      run.schema = load_schema(run.config.data.schema_path);
    }
  }
  return *run.schema;
}

void do_synth(Run& run) {
  const DataConfig& data = run.config.data;
  if (!data.synthetic) {
    throw ConfigError("synth requires a synthetic data source in the config");
  }
  const std::vector<ParticipantWaveRecord> records = generate_synthetic_cohort(
      data.synthetic->seed, data.synthetic->n_participants, schema_for(run));
  write_cohort_csv(run.artifact(kCohortFile), schema_for(run), records);
  run.log("synth", std::to_string(records.size()) + " wave records -> " +
                       run.path(kCohortFile));
}

/// Path of the cohort extract to ingest. An external source is used as
/// given; a synthetic source reads the generated extract, producing it
/// first when absent.
std::string ensure_cohort(Run& run) {
  const DataConfig& data = run.config.data;
  if (!data.source_path.empty()) {
    run.inputs.insert(data.source_path);
    return data.source_path;
  }
  if (fs::exists(run.path(kCohortFile))) {
    return run.input(kCohortFile);
  }
  do_synth(run);
  return run.path(kCohortFile);
}

void do_build(Run& run) {
  const std::string cohort_path = ensure_cohort(run);
  // the column map describes external extracts; generated ones use schema names
  ColumnMap column_map;
  if (!run.config.data.source_path.empty()) {
    column_map = run.config.data.column_map;
  }
  IngestOptions ingest_opts;
  ingest_opts.cutoffs = run.config.data.cutoffs;
  const std::vector<ParticipantWaveRecord> records =
      ingest_cohort(cohort_path, schema_for(run), column_map, ingest_opts);
  SupervisedDataset ds = build_wave_pairs(records, schema_for(run), 55.0, 85.0,
                                          run.config.data.cutoffs);
  if (ds.size() == 0) {
    throw DataError("no supervised samples after pairing waves from " +
                    cohort_path);
  }
  save_dataset_csv(run.artifact(kDatasetFile), ds);
  run.log("build", std::to_string(ds.size()) + " samples x " +
                       std::to_string(ds.X.cols) + " feature columns -> " +
                       run.path(kDatasetFile));
  run.dataset = std::move(ds);
}

const SupervisedDataset& dataset_for(Run& run) {
  if (!run.dataset) {
    if (fs::exists(run.path(kDatasetFile))) {
      run.dataset = load_dataset_csv(run.input(kDatasetFile), schema_for(run));
      run.log("data", std::to_string(run.dataset->size()) + " samples from " +
                          run.path(kDatasetFile));
    } else {
      do_build(run);
    }
  }
  return *run.dataset;
}

/// Fits imputation and scaling on the full feature matrix and caches the
/// globally preprocessed copy of the dataset. Single impute pass; the scale
/// part is fitted on the imputed matrix, matching the one-shot fit helper.
void ensure_prep(Run& run) {
  if (run.prep) return;
  const SupervisedDataset& ds = dataset_for(run);
  PreprocessModel imputer =
      fit_impute(ds.X, run.config.preprocess.k_neighbors);
  const Matrix imputed = impute(imputer, ds.X);
  PreprocessModel scaler = fit_scale(imputed);

  PreprocessModel prep;
  prep.feature_names = ds.feature_names;
  prep.reference = std::move(imputer.reference);
  prep.reference_col_mean = std::move(imputer.reference_col_mean);
  prep.k_neighbors = imputer.k_neighbors;
  prep.col_min = std::move(scaler.col_min);
  prep.col_max = std::move(scaler.col_max);

  SupervisedDataset scaled = ds;
  scaled.X = scale(prep, imputed);
  run.prep = std::move(prep);
  run.scaled = std::move(scaled);
  run.log("preprocess", "imputed and scaled " + std::to_string(ds.size()) +
                            " samples, k_neighbors=" +
                            std::to_string(run.config.preprocess.k_neighbors));
}

const FoldPlan& folds_for(Run& run) {
  if (!run.folds) {
    run.folds = make_folds(dataset_for(run).size(), run.config.cv.k,
                           run.config.cv.seed);
  }
  return *run.folds;
}

CvOptions cv_options(const Run& run) {
  return CvOptions{run.config.preprocess.k_neighbors,
                   run.config.preprocess.fit_scope};
}

/// Dataset cross-validation runs on. Under global scope this is the already
/// preprocessed copy: refitting preprocessing on a complete matrix whose
/// columns span [0, 1] is an exact identity, so results match preprocessing
/// inside the evaluation while the neighbor search runs only once per run.
const SupervisedDataset& cv_input(Run& run) {
  if (run.config.preprocess.fit_scope == FitScope::global) {
    ensure_prep(run);
    return *run.scaled;
  }
  return dataset_for(run);
}

void write_cv_report_csv(Run& run, const CvReport& report) {
  csv::Writer writer(run.artifact(kCvReportCsv));
  writer.row({"fold", "mae", "mse"}, ',');
  for (std::size_t f = 0; f < report.fold_mae.size(); ++f) {
    writer.row({std::to_string(f), csv::format_double(report.fold_mae[f]),
                csv::format_double(report.fold_mse[f])},
               ',');
  }
  writer.row({"mean", csv::format_double(report.mean_mae),
              csv::format_double(report.mean_mse)},
             ',');
  writer.close();
}

/// Cross-validates the spec (unless a report from a containing sweep is
/// supplied), then fits the published model on the full globally
/// preprocessed matrix regardless of the cross-validation fit scope.
void do_train(Run& run, const RegressorSpec& spec,
              const CvReport* reuse = nullptr) {
  ensure_prep(run);
  const CvReport report =
      reuse ? *reuse
            : cross_validate(cv_input(run), spec, folds_for(run),
                             cv_options(run));
  write_cv_report_csv(run, report);
  if (run.config.wants_format("json")) {
    write_text(run.artifact(kCvReportJson), cv_reports_to_json({report}) + "\n");
  }

  const SupervisedDataset& ds = dataset_for(run);
  const std::vector<double> y(ds.y.begin(), ds.y.end());
  TrainedRegressor model = fit_regressor(run.scaled->X, y, spec);
  save_preprocess(*run.prep, run.artifact(kPreprocessFile));
  save_regressor(model, run.artifact(kModelFile));
  run.model = std::move(model);
  run.log("train", to_string(spec.family) + " (" + spec.parameter_summary() +
                       "): cv mean mae " + csv::format_double(report.mean_mae) +
                       " -> " + run.path(kModelFile));
}

ParamGrid grid_for(const Run& run, Family family) {
  const ModelConfig& model = run.config.model;
  const auto it = model.family_grids.find(family);
  if (it != model.family_grids.end()) return it->second;
  if (model.grid && family == model.spec.family) return *model.grid;
  return default_grid(family);
}

/// Grid-searches one family and writes its sweep artifacts. Returns the
/// ranked reports (best first, failed cells last).
std::vector<CvReport> do_sweep_family(Run& run, Family family) {
  RegressorSpec base = run.config.model.spec;
  base.family = family;
  const std::vector<RegressorSpec> specs =
      expand_grid(base, grid_for(run, family));
  run.log("sweep", to_string(family) + ": " + std::to_string(specs.size()) +
                       " cells, " + std::to_string(run.config.cv.k) +
                       "-fold cross-validation");
  const std::vector<CvReport> reports =
      grid_search(cv_input(run), specs, folds_for(run), cv_options(run));
  write_text(run.artifact("sweep_" + to_string(family) + ".csv"),
             summary_table(reports));
  if (run.config.wants_format("json")) {
    write_text(run.artifact("sweep_" + to_string(family) + ".json"),
               cv_reports_to_json(reports) + "\n");
  }
  run.log("sweep", to_string(family) + ": best " +
                       (reports.front().failed
                            ? std::string("(all cells failed)")
                            : reports.front().spec.parameter_summary() +
                                  ", mean mae " +
                                  csv::format_double(reports.front().mean_mae)));
  return reports;
}

void ensure_model(Run& run) {
  if (run.model) return;
  if (fs::exists(run.path(kModelFile))) {
    run.model = load_regressor(run.input(kModelFile));
    run.log("model", "loaded " + run.path(kModelFile));
    return;
  }
  do_train(run, run.config.model.spec);
}

void do_explain(Run& run) {
  ensure_model(run);
  ensure_prep(run);
  const SupervisedDataset& ds = dataset_for(run);

  std::vector<std::size_t> idx;
  const std::string& split = run.config.explain.split;
  if (split == "all") {
    idx.resize(ds.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
  } else {
    // train/test are taken relative to fold 0 of the cross-validation plan
    const FoldPlan& plan = folds_for(run);
    const bool want_test = split == "test";
    for (std::size_t i = 0; i < plan.assignments.size(); ++i) {
      if ((plan.assignments[i] == 0) == want_test) idx.push_back(i);
    }
  }
  if (idx.empty()) {
    throw DataError("explain split '" + split + "' selected no samples");
  }

  const Matrix x = run.scaled->X.select_rows(idx);
  const TrainedRegressor& model = *run.model;
  AttributionMatrix attr;
  switch (model.family) {
    case Family::forest:
    case Family::boosted:
      attr = tree_shap(model, x, ds.feature_names);
      break;
    case Family::linear:
      attr = linear_attributions(model, x, ds.feature_names);
      break;
    case Family::dense:
      throw ConfigError(
          "attributions cover the linear and tree families; the dense family "
          "has none");
  }

  {
    csv::Writer writer(run.artifact(kAttributionsFile));
    std::vector<std::string> fields;
    fields.reserve(attr.feature_names.size() + 1);
    fields.push_back("sample_id");
    fields.insert(fields.end(), attr.feature_names.begin(),
                  attr.feature_names.end());
    writer.row(fields, ',');
    for (std::size_t r = 0; r < attr.values.rows; ++r) {
      fields.clear();
      fields.push_back(std::to_string(idx[r]));
      for (std::size_t j = 0; j < attr.values.cols; ++j) {
        fields.push_back(csv::format_double(attr.values.at(r, j)));
      }
      writer.row(fields, ',');
    }
    writer.close();
  }

  FeatureRanking ranking = rank_features(attr);
  {
    csv::Writer writer(run.artifact(kRankingFile));
    writer.row({"feature", "importance"}, ',');
    for (const RankedFeature& entry : ranking.entries) {
      writer.row({entry.name, csv::format_double(entry.importance)}, ',');
    }
    writer.close();
  }
  run.ranking = std::move(ranking);

  const std::size_t top_m = std::min<std::size_t>(15, attr.values.cols);
  const std::string svg_path =
      run.config.wants_format("svg") ? run.artifact(kBeeswarmSvg) : std::string{};
  export_beeswarm(attr, x, run.artifact(kBeeswarmCsv), svg_path, top_m);

  nlohmann::ordered_json meta;
  meta["split"] = split;
  meta["n_samples"] = idx.size();
  meta["n_features"] = attr.values.cols;
  meta["model_family"] = to_string(model.family);
  meta["base_value"] = attr.base_value;
  meta["beeswarm_features"] = top_m;
  write_text(run.artifact(kExplainFile), meta.dump(2) + "\n");

  run.log("explain", std::to_string(idx.size()) + " samples (" + split +
                         "), base value " +
                         csv::format_double(attr.base_value));
}

void ensure_ranking(Run& run) {
  if (run.ranking) return;
  if (!fs::exists(run.path(kRankingFile))) {
    do_explain(run);
    return;
  }
  const std::string path = run.input(kRankingFile);
  csv::Reader reader(path);
  std::vector<std::string> fields;
  if (!reader.next(fields, ',') ||
      fields != std::vector<std::string>{"feature", "importance"}) {
    throw DataError("malformed ranking header in " + path);
  }
  FeatureRanking ranking;
  while (reader.next(fields, ',')) {
    if (fields.size() != 2) {
      throw DataError("malformed ranking row in " + path);
    }
    ranking.entries.push_back(
        {fields[0], csv::parse_cell(fields[1], reader.line_number, "importance")});
  }
  if (ranking.entries.empty()) {
    throw DataError("ranking file has no entries: " + path);
  }
  run.ranking = std::move(ranking);
  run.log("explain", "loaded ranking of " +
                         std::to_string(run.ranking->entries.size()) +
                         " features from " + path);
}

void do_simplify(Run& run) {
  ensure_ranking(run);
  const SupervisedDataset& ds_scope = cv_input(run);
  const FoldPlan& plan = folds_for(run);
  const CvOptions options = cv_options(run);

  std::string table = "k,mean_mae,mean_mse,parameters\n";
  for (const std::size_t k : run.config.explain.top_k) {
    const CvReport report = simplify_and_retrain(
        ds_scope, *run.ranking, k, run.config.explain.exclusions, plan, options,
        run.config.model.spec.seed);
    table += std::to_string(k);
    table += ',';
    table += csv::format_double(report.mean_mae);
    table += ',';
    table += csv::format_double(report.mean_mse);
    table += ",\"";
    table += report.spec.parameter_summary();
    table += "\"\n";
    if (run.config.wants_format("json")) {
      write_text(run.artifact("simplify_k" + std::to_string(k) + ".json"),
                 cv_reports_to_json({report}) + "\n");
    }
    run.log("simplify", "k=" + std::to_string(k) + ": mean mae " +
                            csv::format_double(report.mean_mae));
  }
  write_text(run.artifact(kSimplifiedFile), table);
}

/// Full run: data assembly, a grid sweep per family, the cross-family
/// summary, final training on the best boosted cell, attributions, and the
/// reduced-feature retrains.
void do_replicate(Run& run) {
  dataset_for(run);
  ensure_prep(run);

  const Family order[] = {Family::linear, Family::forest, Family::boosted,
                          Family::dense};
  std::vector<CvReport> best_per_family;
  CvReport winner;
  bool have_winner = false;
  for (const Family family : order) {
    const std::vector<CvReport> reports = do_sweep_family(run, family);
    best_per_family.push_back(reports.front());
    if (family == Family::boosted && !reports.front().failed) {
      winner = reports.front();
      have_winner = true;
    }
  }
  write_text(run.artifact(kSummaryFile), summary_table(best_per_family));
  if (!have_winner) {
    throw FitError("every boosted sweep cell failed; no final model to train");
  }
  do_train(run, winner.spec, &winner);
  do_explain(run);
  do_simplify(run);
}

void write_manifest(Run& run, const std::string& subcommand) {
  char hash_hex[17];
  std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                static_cast<unsigned long long>(config_hash(run.config)));
  nlohmann::ordered_json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["config_version"] = run.config.config_version;
  manifest["config_hash"] = hash_hex;
  manifest["subcommand"] = subcommand;
  manifest["inputs"] = run.inputs;
  manifest["artifacts"] = run.artifacts;
  write_text(run.path(kManifestFile), manifest.dump(2) + "\n");
}

}  // namespace

void run_subcommand(const std::string& name, const RunConfig& config,
                    bool verbose) {
  Run run(config, verbose);
  std::error_code ec;
  fs::create_directories(run.out, ec);
  if (ec) {
    throw DataError("cannot create output directory: " + run.out.string());
  }

  if (name == "synth") {
    do_synth(run);
  } else if (name == "build") {
    do_build(run);
  } else if (name == "train") {
    do_train(run, config.model.spec);
  } else if (name == "sweep") {
    do_sweep_family(run, config.model.spec.family);
  } else if (name == "explain") {
    do_explain(run);
  } else if (name == "simplify") {
    do_simplify(run);
  } else if (name == "replicate") {
    do_replicate(run);
  } else {
    throw ConfigError("unknown subcommand: " + name);
  }
  write_manifest(run, name);
}

}  // namespace sppb
