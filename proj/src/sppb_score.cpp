#include "sppb/sppb_score.hpp"

#include <cmath>
#include <sstream>

#include "sppb/errors.hpp"

namespace sppb {

namespace {

void check_hold(const std::optional<double>& t, const char* stance) {
  if (t && (!std::isfinite(*t) || *t < 0.0))
    throw DataError(std::string("invalid balance hold time for ") + stance);
}

}  // namespace

std::string describe(const CutoffTable& c) {
  std::ostringstream os;
  os << "balance: hold " << c.balance_hold_s << " s for full points, full tandem "
     << c.full_tandem_partial_floor_s << "-" << c.balance_hold_s << " s for 1 point\n";
  os << "gait (at " << c.gait_reference_course_m << " m): < " << c.gait_cutoffs_s[0]
     << " s -> 4, <= " << c.gait_cutoffs_s[1] << " s -> 3, <= " << c.gait_cutoffs_s[2]
     << " s -> 2, slower -> 1, unable -> 0 (cutoffs scale with course length)\n";
  os << "chair: <= " << c.chair_cutoffs_s[0] << " s -> 4, <= " << c.chair_cutoffs_s[1]
     << " s -> 3, <= " << c.chair_cutoffs_s[2] << " s -> 2, <= " << c.chair_cutoffs_s[3]
     << " s -> 1, slower or unable -> 0\n";
  return os.str();
}

const char* to_string(SppbCategory c) {
  switch (c) {
    case SppbCategory::good: return "good";
    case SppbCategory::reduced: return "reduced";
    case SppbCategory::very_poor: return "very_poor";
  }
  return "?";
}

int score_balance(const BalanceMeasurement& m, const CutoffTable& cutoffs) {
  check_hold(m.side_by_side_held_s, "side-by-side");
  check_hold(m.semi_tandem_held_s, "semi-tandem");
  check_hold(m.full_tandem_held_s, "full tandem");

  int points = 0;
  if (m.side_by_side_held_s && *m.side_by_side_held_s >= cutoffs.balance_hold_s) points += 1;
  if (m.semi_tandem_held_s && *m.semi_tandem_held_s >= cutoffs.balance_hold_s) points += 1;
  if (m.full_tandem_held_s) {
    if (*m.full_tandem_held_s >= cutoffs.balance_hold_s)
      points += 2;
    else if (*m.full_tandem_held_s >= cutoffs.full_tandem_partial_floor_s)
      points += 1;
  }
  return points;
}

int score_gait(const GaitMeasurement& m, const CutoffTable& cutoffs) {
  if (!std::isfinite(m.course_length_m) || m.course_length_m <= 0.0)
    throw DataError("gait course length must be positive");
  if (!m.time_s) return 0;
  if (!std::isfinite(*m.time_s) || *m.time_s <= 0.0)
    throw DataError("gait time must be positive");

  const double r = m.course_length_m / cutoffs.gait_reference_course_m;
  const double t = *m.time_s;
  if (t < cutoffs.gait_cutoffs_s[0] * r) return 4;
  if (t <= cutoffs.gait_cutoffs_s[1] * r) return 3;
  if (t <= cutoffs.gait_cutoffs_s[2] * r) return 2;
  return 1;
}

int score_chair(const ChairStandMeasurement& m, const CutoffTable& cutoffs) {
  if (!m.time_s) return 0;
  if (!std::isfinite(*m.time_s) || *m.time_s <= 0.0)
    throw DataError("chair stand time must be positive");

  const double t = *m.time_s;
  if (t <= cutoffs.chair_cutoffs_s[0]) return 4;
  if (t <= cutoffs.chair_cutoffs_s[1]) return 3;
  if (t <= cutoffs.chair_cutoffs_s[2]) return 2;
  if (t <= cutoffs.chair_cutoffs_s[3]) return 1;
  return 0;
}

SppbScore total_sppb(int balance, int gait, int chair) {
  auto check = [](int v, const char* what) {
    if (v < 0 || v > 4)
      throw DataError(std::string(what) + " score out of range: " + std::to_string(v));
  };
  check(balance, "balance");
  check(gait, "gait");
  check(chair, "chair");
  return SppbScore{balance, gait, chair, balance + gait + chair};
}

SppbCategory classify_sppb(int total) {
  if (total < 0 || total > 12)
    throw DataError("total score out of range: " + std::to_string(total));
  if (total >= 10) return SppbCategory::good;
  if (total >= 4) return SppbCategory::reduced;
  return SppbCategory::very_poor;
}

}  // namespace sppb
