#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sppb/cohort.hpp"
#include "sppb/eval.hpp"
#include "sppb/regressor.hpp"

namespace sppb {

struct SyntheticSource {
  std::uint64_t seed = 1;
  std::size_t n_participants = 1000;
};

struct DataConfig {
  // exactly one of source_path / synthetic is set
  std::string source_path;
  std::optional<SyntheticSource> synthetic;
  std::string schema_path;  // empty uses the shipped default schema
  ColumnMap column_map;
  // scoring thresholds applied at ingestion and score derivation
  CutoffTable cutoffs;
};

struct PreprocessConfig {
  std::size_t k_neighbors = 5;
  FitScope fit_scope = FitScope::fold;
};

struct ModelConfig {
  RegressorSpec spec;
  // sweep search space; unset means the family's published default grid
  std::optional<ParamGrid> grid;
  // per-family overrides consulted by the full-pipeline sweep
  std::map<Family, ParamGrid> family_grids;
};

struct CvConfig {
  std::size_t k = 10;
  std::uint64_t seed = 0;
};

struct ExplainConfig {
  std::vector<std::size_t> top_k = {10, 15, 20};
  std::vector<std::string> exclusions;  // defaults to the component-score list
  // rows the attributions are computed on: "all" (default), or "train" /
  // "test" relative to fold 0 of the cross-validation plan
  std::string split = "all";
};

struct OutputConfig {
  std::string directory = "out";
  // artifact encodings to emit; "csv" is always written
  std::vector<std::string> formats = {"csv", "json", "svg"};
};

struct RunConfig {
  int config_version = 1;
  DataConfig data;
  PreprocessConfig preprocess;
  ModelConfig model;
  CvConfig cv;
  ExplainConfig explain;
  OutputConfig output;

  bool wants_format(const std::string& format) const;
};

/// Parses and validates a run configuration document. Unknown keys, a
/// missing data source, version mismatches, or bad values raise ConfigError;
/// referenced paths must exist at validation time.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

/// Canonical dump with every field resolved; two configs hash equal exactly
/// when they mean the same run.
std::string run_config_to_canonical_json(const RunConfig& config);
std::uint64_t config_hash(const RunConfig& config);

}  // namespace sppb
