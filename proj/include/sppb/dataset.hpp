#pragma once

#include <string>
#include <vector>

#include "sppb/cohort.hpp"
#include "sppb/matrix.hpp"
#include "sppb/schema.hpp"

namespace sppb {

/// Which (participant, wave) pairing produced a sample.
struct SampleProvenance {
  std::string participant_id;
  int feature_wave = 0;
  int target_wave = 0;
};

/// Supervised future-score dataset: features at one measured wave, total
/// score four years later. X is one-hot expanded; missing cells remain for
/// the preprocessing stage to fill.
struct SupervisedDataset {
  FeatureSchema schema;
  std::vector<std::string> feature_names;  // expanded, X.cols entries
  Matrix X;
  std::vector<int> y;  // 0..12
  std::vector<SampleProvenance> provenance;

  std::size_t size() const { return y.size(); }
};

/// Pairs measured waves four years apart (2->4, 4->6): features and derived
/// current scores from the earlier wave, target total score from the later
/// one. Samples whose target wave lacks any of the three assessments are
/// dropped; the age filter applies at the feature wave, bounds inclusive.
SupervisedDataset build_wave_pairs(const std::vector<ParticipantWaveRecord>& records,
                                   const FeatureSchema& schema, double min_age = 55.0,
                                   double max_age = 85.0,
                                   const CutoffTable& cutoffs = {});

void save_dataset_csv(const std::string& path, const SupervisedDataset& ds,
                      char delimiter = ',');

/// Reads a dataset written by save_dataset_csv. The file's feature columns
/// must match the schema's expanded names exactly.
SupervisedDataset load_dataset_csv(const std::string& path, const FeatureSchema& schema,
                                   char delimiter = ',');

}  // namespace sppb
