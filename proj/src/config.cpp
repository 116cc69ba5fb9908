#include "sppb/config.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "spec_json.hpp"
#include "sppb/errors.hpp"
#include "sppb/hash.hpp"
#include "sppb/shap.hpp"
#include "sppb/version.hpp"

namespace sppb {

namespace {

using nlohmann::ordered_json;

void check_keys(const ordered_json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw ConfigError("config section '" + section + "' must be an object");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return it.key() == k; });
    if (!known) {
      throw ConfigError("config section '" + section +
                        "' has an unknown field '" + it.key() + "'");
    }
  }
}

std::string fit_scope_name(FitScope scope) {
  return scope == FitScope::fold ? "fold" : "global";
}

FitScope fit_scope_from_name(const std::string& name) {
  if (name == "fold") return FitScope::fold;
  if (name == "global") return FitScope::global;
  throw ConfigError("preprocess.fit_scope must be 'fold' or 'global', got '" +
                    name + "'");
}

template <std::size_t N>
void parse_cutoff_array(const ordered_json& j, const char* key,
                        std::array<double, N>& out) {
  if (!j.contains(key)) return;
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != N) {
    throw ConfigError("data.cutoffs." + std::string(key) + " needs exactly " +
                      std::to_string(N) + " values");
  }
  std::copy(v.begin(), v.end(), out.begin());
}

void parse_cutoffs(const ordered_json& j, CutoffTable& cutoffs) {
  check_keys(j, "data.cutoffs",
             {"balance_hold_s", "full_tandem_partial_floor_s",
              "gait_reference_course_m", "gait_cutoffs_s", "chair_cutoffs_s"});
  cutoffs.balance_hold_s = j.value("balance_hold_s", cutoffs.balance_hold_s);
  cutoffs.full_tandem_partial_floor_s =
      j.value("full_tandem_partial_floor_s", cutoffs.full_tandem_partial_floor_s);
  cutoffs.gait_reference_course_m =
      j.value("gait_reference_course_m", cutoffs.gait_reference_course_m);
  parse_cutoff_array(j, "gait_cutoffs_s", cutoffs.gait_cutoffs_s);
  parse_cutoff_array(j, "chair_cutoffs_s", cutoffs.chair_cutoffs_s);

  const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(cutoffs.balance_hold_s)) {
    throw ConfigError("data.cutoffs.balance_hold_s must be positive");
  }
  if (!std::isfinite(cutoffs.full_tandem_partial_floor_s) ||
      cutoffs.full_tandem_partial_floor_s < 0.0 ||
      cutoffs.full_tandem_partial_floor_s >= cutoffs.balance_hold_s) {
    throw ConfigError(
        "data.cutoffs.full_tandem_partial_floor_s must lie in [0, balance_hold_s)");
  }
  if (!positive(cutoffs.gait_reference_course_m)) {
    throw ConfigError("data.cutoffs.gait_reference_course_m must be positive");
  }
  const auto increasing_positive = [&](const auto& arr) {
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!positive(arr[i])) return false;
      if (i > 0 && arr[i] <= arr[i - 1]) return false;
    }
    return true;
  };
  if (!increasing_positive(cutoffs.gait_cutoffs_s)) {
    throw ConfigError(
        "data.cutoffs.gait_cutoffs_s must be positive and strictly increasing");
  }
  if (!increasing_positive(cutoffs.chair_cutoffs_s)) {
    throw ConfigError(
        "data.cutoffs.chair_cutoffs_s must be positive and strictly increasing");
  }
}

void parse_data(const ordered_json& j, DataConfig& data) {
  check_keys(j, "data", {"source", "schema", "column_map", "cutoffs"});
  if (!j.contains("source")) {
    throw ConfigError("data.source is required");
  }
  const ordered_json& source = j.at("source");
  check_keys(source, "data.source", {"path", "synthetic"});
  const bool has_path = source.contains("path");
  const bool has_synth = source.contains("synthetic");
  if (has_path == has_synth) {
    throw ConfigError("data.source needs exactly one of 'path' or 'synthetic'");
  }
  if (has_path) {
    data.source_path = source.at("path").get<std::string>();
    if (data.source_path.empty()) {
      throw ConfigError("data.source.path must not be empty");
    }
  } else {
    const ordered_json& synth = source.at("synthetic");
    check_keys(synth, "data.source.synthetic", {"seed", "n_participants"});
    SyntheticSource spec;
    spec.seed = synth.value("seed", spec.seed);
    spec.n_participants = synth.value("n_participants", spec.n_participants);
    if (spec.n_participants == 0) {
      throw ConfigError("data.source.synthetic.n_participants must be positive");
    }
    data.synthetic = spec;
  }
  data.schema_path = j.value("schema", std::string{});
  if (j.contains("column_map")) {
    const ordered_json& map = j.at("column_map");
    if (!map.is_object()) {
      throw ConfigError("data.column_map must map feature names to columns");
    }
    for (auto it = map.begin(); it != map.end(); ++it) {
      data.column_map[it.key()] = it.value().get<std::string>();
    }
  }
  if (j.contains("cutoffs")) {
    parse_cutoffs(j.at("cutoffs"), data.cutoffs);
  }
}

void parse_model_spec(const ordered_json& j, RegressorSpec& spec) {
  if (j.contains("family")) {
    spec.family = family_from_string(j.at("family").get<std::string>());
  }
  spec.trees = j.value("trees", spec.trees);
  if (j.contains("max_depth")) {
    spec.max_depth = j.at("max_depth").is_null()
                         ? kUnlimitedDepth
                         : j.at("max_depth").get<int>();
  }
  spec.min_samples_leaf = j.value("min_samples_leaf", spec.min_samples_leaf);
  spec.learning_rate = j.value("learning_rate", spec.learning_rate);
  spec.l2_leaf_penalty = j.value("l2_leaf_penalty", spec.l2_leaf_penalty);
  spec.features_per_split = j.value("features_per_split", spec.features_per_split);
  spec.bootstrap = j.value("bootstrap", spec.bootstrap);
  if (j.contains("layer_sizes")) {
    spec.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
  }
  spec.epochs = j.value("epochs", spec.epochs);
  spec.batch_size = j.value("batch_size", spec.batch_size);
  spec.seed = j.value("seed", spec.seed);
}

ParamGrid parse_grid(const ordered_json& j, Family family) {
  check_keys(j, "model.grid", {"trees", "max_depths", "layer_sizes"});
  ParamGrid grid = default_grid(family);
  if (j.contains("trees")) {
    grid.trees = j.at("trees").get<std::vector<int>>();
  }
  if (j.contains("max_depths")) {
    grid.max_depths.clear();
    for (const ordered_json& d : j.at("max_depths")) {
      grid.max_depths.push_back(d.is_null() ? kUnlimitedDepth : d.get<int>());
    }
  }
  if (j.contains("layer_sizes")) {
    grid.layer_sizes = j.at("layer_sizes").get<std::vector<std::vector<std::size_t>>>();
  }
  const bool tree_family = family == Family::forest || family == Family::boosted;
  if (tree_family && (grid.trees.empty() || grid.max_depths.empty())) {
    throw ConfigError("model.grid needs non-empty trees and max_depths axes");
  }
  if (family == Family::dense && grid.layer_sizes.empty()) {
    throw ConfigError("model.grid needs a non-empty layer_sizes axis");
  }
  return grid;
}

void parse_model(const ordered_json& j, ModelConfig& model) {
  check_keys(j, "model",
             {"family", "trees", "max_depth", "min_samples_leaf", "learning_rate",
              "l2_leaf_penalty", "features_per_split", "bootstrap", "layer_sizes",
              "epochs", "batch_size", "seed", "grid", "grids"});
  parse_model_spec(j, model.spec);
  model.spec.validate();
  if (j.contains("grid")) {
    model.grid = parse_grid(j.at("grid"), model.spec.family);
  }
  if (j.contains("grids")) {
    const ordered_json& grids = j.at("grids");
    check_keys(grids, "model.grids", {"forest", "boosted", "dense"});
    for (auto it = grids.begin(); it != grids.end(); ++it) {
      const Family family = family_from_string(it.key());
      model.family_grids[family] = parse_grid(it.value(), family);
    }
  }
}

void parse_explain(const ordered_json& j, ExplainConfig& explain) {
  check_keys(j, "explain", {"top_k", "exclusions", "split"});
  if (j.contains("top_k")) {
    explain.top_k = j.at("top_k").get<std::vector<std::size_t>>();
    if (explain.top_k.empty()) {
      throw ConfigError("explain.top_k must list at least one k");
    }
    for (const std::size_t k : explain.top_k) {
      if (k == 0) throw ConfigError("explain.top_k entries must be positive");
    }
  }
  if (j.contains("exclusions")) {
    explain.exclusions = j.at("exclusions").get<std::vector<std::string>>();
  }
  explain.split = j.value("split", explain.split);
  if (explain.split != "all" && explain.split != "train" &&
      explain.split != "test") {
    throw ConfigError("explain.split must be 'all', 'train', or 'test', got '" +
                      explain.split + "'");
  }
}

void parse_output(const ordered_json& j, OutputConfig& output) {
  check_keys(j, "output", {"directory", "formats"});
  output.directory = j.value("directory", output.directory);
  if (output.directory.empty()) {
    throw ConfigError("output.directory must not be empty");
  }
  if (j.contains("formats")) {
    output.formats = j.at("formats").get<std::vector<std::string>>();
    for (const std::string& format : output.formats) {
      if (format != "csv" && format != "json" && format != "svg") {
        throw ConfigError("output.formats accepts csv, json, svg; got '" +
                          format + "'");
      }
    }
  }
}

}  // namespace

bool RunConfig::wants_format(const std::string& format) const {
  if (format == "csv") return true;
  return std::find(output.formats.begin(), output.formats.end(), format) !=
         output.formats.end();
}

RunConfig parse_run_config(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  RunConfig config;
  config.explain.exclusions = default_shap_exclusions();
  try {
    check_keys(j, "config",
               {"config_version", "data", "preprocess", "model", "cv", "explain",
                "output"});
    if (!j.contains("config_version")) {
      throw ConfigError("config_version is required");
    }
    config.config_version = j.at("config_version").get<int>();
    if (config.config_version != kConfigVersion) {
      throw ConfigError("unsupported config_version " +
                        std::to_string(config.config_version) + "; this tool reads version " +
                        std::to_string(kConfigVersion));
    }
    if (!j.contains("data")) {
      throw ConfigError("the data section is required");
    }
    parse_data(j.at("data"), config.data);
    if (j.contains("preprocess")) {
      const ordered_json& pre = j.at("preprocess");
      check_keys(pre, "preprocess", {"k_neighbors", "fit_scope"});
      config.preprocess.k_neighbors =
          pre.value("k_neighbors", config.preprocess.k_neighbors);
      if (config.preprocess.k_neighbors == 0) {
        throw ConfigError("preprocess.k_neighbors must be positive");
      }
      if (pre.contains("fit_scope")) {
        config.preprocess.fit_scope =
            fit_scope_from_name(pre.at("fit_scope").get<std::string>());
      }
    }
    if (j.contains("model")) {
      parse_model(j.at("model"), config.model);
    }
    if (j.contains("cv")) {
      const ordered_json& cv = j.at("cv");
      check_keys(cv, "cv", {"k", "seed"});
      config.cv.k = cv.value("k", config.cv.k);
      config.cv.seed = cv.value("seed", config.cv.seed);
      if (config.cv.k < 2) {
        throw ConfigError("cv.k must be at least 2");
      }
    }
    if (j.contains("explain")) {
      parse_explain(j.at("explain"), config.explain);
    }
    if (j.contains("output")) {
      parse_output(j.at("output"), config.output);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config value: ") + e.what());
  }

  if (!config.data.source_path.empty() &&
      !std::filesystem::exists(config.data.source_path)) {
    throw ConfigError("data.source.path does not exist: " +
                      config.data.source_path);
  }
  if (!config.data.schema_path.empty() &&
      !std::filesystem::exists(config.data.schema_path)) {
    throw ConfigError("data.schema does not exist: " + config.data.schema_path);
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str());
}

std::string run_config_to_canonical_json(const RunConfig& config) {
  ordered_json j;
  j["config_version"] = config.config_version;

  ordered_json source;
  if (config.data.synthetic) {
    source["synthetic"] = {{"seed", config.data.synthetic->seed},
                           {"n_participants", config.data.synthetic->n_participants}};
  } else {
    source["path"] = config.data.source_path;
  }
  j["data"] = {{"source", source},
               {"schema", config.data.schema_path},
               {"column_map", ordered_json::object()}};
  for (const auto& [feature, column] : config.data.column_map) {
    j["data"]["column_map"][feature] = column;  // std::map keeps keys sorted
  }
  const CutoffTable& cut = config.data.cutoffs;
  j["data"]["cutoffs"] = {
      {"balance_hold_s", cut.balance_hold_s},
      {"full_tandem_partial_floor_s", cut.full_tandem_partial_floor_s},
      {"gait_reference_course_m", cut.gait_reference_course_m},
      {"gait_cutoffs_s", cut.gait_cutoffs_s},
      {"chair_cutoffs_s", cut.chair_cutoffs_s}};

  j["preprocess"] = {{"k_neighbors", config.preprocess.k_neighbors},
                     {"fit_scope", fit_scope_name(config.preprocess.fit_scope)}};

  const auto grid_to_json = [](const ParamGrid& grid) {
    ordered_json out;
    out["trees"] = grid.trees;
    out["max_depths"] = ordered_json::array();
    for (const int d : grid.max_depths) {
      if (d == kUnlimitedDepth) {
        out["max_depths"].push_back(nullptr);
      } else {
        out["max_depths"].push_back(d);
      }
    }
    out["layer_sizes"] = grid.layer_sizes;
    return out;
  };
  j["model"] = {{"spec", detail::spec_to_json(config.model.spec)}};
  if (config.model.grid) {
    j["model"]["grid"] = grid_to_json(*config.model.grid);
  } else {
    j["model"]["grid"] = nullptr;
  }
  j["model"]["grids"] = ordered_json::object();
  for (const auto& [family, grid] : config.model.family_grids) {
    j["model"]["grids"][to_string(family)] = grid_to_json(grid);
  }

  j["cv"] = {{"k", config.cv.k}, {"seed", config.cv.seed}};
  j["explain"] = {{"top_k", config.explain.top_k},
                  {"exclusions", config.explain.exclusions},
                  {"split", config.explain.split}};
  j["output"] = {{"directory", config.output.directory},
                 {"formats", config.output.formats}};
  return j.dump(2);
}

std::uint64_t config_hash(const RunConfig& config) {
  return fnv1a64(run_config_to_canonical_json(config));
}

}  // namespace sppb
