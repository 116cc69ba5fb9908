#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sppb/schema.hpp"
#include "sppb/sppb_score.hpp"

namespace sppb {

/// One row of a longitudinal extract: a participant observed at one wave.
/// `values` holds one cell per schema feature in schema order (derived
/// features stay missing in raw records). The measurement structs preserve
/// the unable/not-attempted state that the numeric cells cannot:
/// a struct is absent when the assessment was not recorded at all.
struct ParticipantWaveRecord {
  std::string participant_id;
  int wave = 0;
  double age = 0.0;
  std::vector<double> values;
  std::optional<BalanceMeasurement> balance;
  std::optional<GaitMeasurement> gait;
  std::optional<ChairStandMeasurement> chair;
};

/// Maps schema feature names to cohort file column headers. Features not
/// listed use their own name as the column; an empty string marks a feature
/// absent from the file (all cells missing).
using ColumnMap = std::map<std::string, std::string>;

struct IngestOptions {
  char delimiter = ',';
  /// Course length for gait measurements in this extract; the UK cohort
  /// used an 8 ft (2.44 m) course.
  double gait_course_m = 2.44;
  CutoffTable cutoffs;
};

/// Code in a timed-measurement cell meaning the test was attempted but could
/// not be completed (or a stance was not attempted). Scores zero points;
/// distinct from the missing codes, which mean "not recorded".
inline constexpr double kUnableCode = -2.0;

/// Reads a delimited cohort extract (header row required; one row per
/// participant and wave). Sentinel missing codes become missing cells,
/// balance holds are capped at the hold cutoff, measurement structs are
/// assembled per the three-state encoding.
std::vector<ParticipantWaveRecord> ingest_cohort(const std::string& path,
                                                 const FeatureSchema& schema,
                                                 const ColumnMap& column_map = {},
                                                 const IngestOptions& opts = {});

/// Writes records in the format ingest_cohort reads. Derived features are
/// not written.
void write_cohort_csv(const std::string& path, const FeatureSchema& schema,
                      const std::vector<ParticipantWaveRecord>& records,
                      char delimiter = ',');

}  // namespace sppb
