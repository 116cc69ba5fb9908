#pragma once

#include <array>
#include <optional>
#include <string>

namespace sppb {

/// Scoring thresholds for the three timed tests. Defaults are the standard
/// published instrument cutoffs. Gait cutoffs refer to the reference course
/// length and are rescaled proportionally for other courses.
struct CutoffTable {
  double balance_hold_s = 10.0;            // held this long -> full points
  double full_tandem_partial_floor_s = 3.0; // full tandem held in [floor, hold)
  double gait_reference_course_m = 4.0;
  std::array<double, 3> gait_cutoffs_s{4.82, 6.20, 8.70};        // 4 / 3 / 2 pts
  std::array<double, 4> chair_cutoffs_s{11.19, 13.69, 16.69, 60.0}; // 4/3/2/1 pts
};

/// Human-readable cutoff listing for the --show-cutoffs flag.
std::string describe(const CutoffTable& cutoffs);

/// Timed balance holds in seconds, capped at the hold threshold at ingestion.
/// nullopt means the stance was not attempted (contributes 0 points); that is
/// distinct from a recorded 0.0 s hold.
struct BalanceMeasurement {
  std::optional<double> side_by_side_held_s;
  std::optional<double> semi_tandem_held_s;
  std::optional<double> full_tandem_held_s;
};

/// Timed walk over a known course. nullopt time means the walk could not be
/// completed (scores 0).
struct GaitMeasurement {
  std::optional<double> time_s;
  double course_length_m = 4.0;
};

/// Five timed chair rises. nullopt means unable or over the time limit.
struct ChairStandMeasurement {
  std::optional<double> time_s;
};

struct SppbScore {
  int balance = 0;
  int gait = 0;
  int chair = 0;
  int total = 0;
};

enum class SppbCategory { good, reduced, very_poor };

const char* to_string(SppbCategory c);

/// Balance points, 0-4. Side-by-side and semi-tandem held to the threshold
/// give one point each; full tandem gives two at the threshold and one when
/// held at least the partial floor. Negative or non-finite hold times are
/// invalid.
int score_balance(const BalanceMeasurement& m, const CutoffTable& cutoffs = {});

/// Gait points, 0-4. Cutoffs are scaled by course_length_m / reference
/// course; an uncompleted walk scores 0. The fastest band is exclusive of
/// its cutoff, the remaining bands are inclusive.
int score_gait(const GaitMeasurement& m, const CutoffTable& cutoffs = {});

/// Chair-stand points, 0-4. Band upper edges are inclusive; times over the
/// last cutoff and "unable" score 0.
int score_chair(const ChairStandMeasurement& m, const CutoffTable& cutoffs = {});

/// Sums the three partial scores. Partials must each be in 0-4.
SppbScore total_sppb(int balance, int gait, int chair);

/// Clinical classification of a 0-12 total: >= 10 good, 4-9 reduced,
/// < 4 very poor.
SppbCategory classify_sppb(int total);

}  // namespace sppb
