#include "sppb/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "sppb/errors.hpp"
#include "sppb/matrix.hpp"
#include "sppb/rng.hpp"

namespace sppb {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double round_to(double v, double step) { return std::round(v / step) * step; }

/// Stable per-participant traits; waves evolve only the health burden.
struct Traits {
  int age2 = 0;         // age at the first measured wave
  bool male = false;
  double strength = 0.0;  // fitness propensity, raises grip, slows decline
  double education = 0;
  bool ever_smoked = false;
  bool smokes = false;
  double height_base = 0.0;
  double bmi_base = 0.0;
  int marital = 1;
  bool mother_alive = false, father_alive = false;
  std::array<bool, 14> diagnosed{};
  bool joint_replaced = false;
};

const char* const kDiagnosisNames[14] = {
    "diag_high_blood_pressure", "diag_diabetes", "diag_cancer", "diag_lung_disease",
    "diag_heart_problems", "diag_stroke", "diag_arthritis", "diag_asthma",
    "diag_high_cholesterol", "diag_cataracts", "diag_parkinsons", "diag_hip_fracture",
    "diag_osteoporosis", "diag_psychiatric"};

constexpr double kDiagnosisBase[14] = {-0.6, -1.7, -2.2, -2.4, -1.6, -2.8, -0.7,
                                       -1.9, -0.8, -1.5, -4.3, -3.6, -2.1, -2.3};

}  // namespace

std::vector<ParticipantWaveRecord> generate_synthetic_cohort(std::uint64_t seed,
                                                             std::size_t n_participants,
                                                             const FeatureSchema& schema) {
  if (n_participants == 0) throw ConfigError("n_participants must be positive");
  schema.validate();

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t f = 0; f < schema.features.size(); ++f)
    index.emplace(schema.features[f].name, f);
  auto idx = [&](const char* name) {
    const auto it = index.find(name);
    if (it == index.end()) throw DataError(std::string("schema lacks feature: ") + name);
    return it->second;
  };
  const std::size_t age_i = idx("age");
  const std::size_t sbs_i = idx("balance_sbs_time");
  const std::size_t semi_i = idx("balance_semi_tandem_time");
  const std::size_t full_i = idx("balance_full_tandem_time");
  const std::size_t gait_i = idx("gait_time");
  const std::size_t chair_i = idx("chair_stand_time");

  std::vector<ParticipantWaveRecord> records;
  records.reserve(n_participants * 3);

  for (std::size_t pi = 0; pi < n_participants; ++pi) {
    Rng rng(mix_seed(seed, pi));
    char id[24];
    std::snprintf(id, sizeof id, "P%06zu", pi);

    Traits t;
    t.age2 = static_cast<int>(rng.uniform_int(55, 85));
    t.male = rng.bernoulli(0.5);
    t.strength = rng.normal();
    t.education = std::clamp(std::round(2.8 + 1.1 * rng.normal()), 1.0, 5.0);
    t.smokes = rng.bernoulli(0.22);
    t.ever_smoked = t.smokes || rng.bernoulli(0.40);
    t.height_base = (t.male ? 175.0 : 162.0) + 6.0 * rng.normal();
    t.bmi_base = 2.8 * rng.normal();
    {
      const double widow = 0.06 + 0.008 * (t.age2 - 55);
      double w[7] = {0.50, 0.07, 0.06, 0.03, 0.10, widow, 0.10};
      double total = 0.0;
      for (double v : w) total += v;
      double u = rng.uniform() * total;
      t.marital = 7;
      for (int c = 0; c < 7; ++c) {
        if (u < w[c]) {
          t.marital = c + 1;
          break;
        }
        u -= w[c];
      }
    }
    t.mother_alive = rng.bernoulli(sigmoid(1.2 - 0.14 * (t.age2 - 55)));
    t.father_alive = rng.bernoulli(sigmoid(0.6 - 0.15 * (t.age2 - 55)));
    const double mother_dead_age = std::clamp(62.0 + 9.0 * rng.normal(), 35.0, 100.0);
    const double father_dead_age = std::clamp(59.0 + 9.0 * rng.normal(), 35.0, 100.0);

    // latent health burden; higher is worse
    double h = 1.6 * (t.age2 - 70) / 15.0 + 0.55 * rng.normal();

    for (int wave = 2; wave <= 6; wave += 2) {
      const double age = t.age2 + 2.0 * (wave - 2);

      ParticipantWaveRecord rec;
      rec.participant_id = id;
      rec.wave = wave;
      rec.values.assign(schema.features.size(), kMissing);
      auto set = [&](const char* name, double v) { rec.values[idx(name)] = v; };

      // demographics
      set("age", age);
      set("gender", t.male ? 1.0 : 0.0);
      set("education_level", t.education);
      set("household_size",
          std::min(6.0, 1.0 + (t.marital <= 3 ? 1.0 : 0.0) + static_cast<double>(rng.below(2))));
      if (t.mother_alive)
        set("mother_age", std::min(101.0, age + 20.0 + std::abs(4.0 * rng.normal())));
      else
        set("mother_age", mother_dead_age);
      if (t.father_alive)
        set("father_age", std::min(102.0, age + 21.0 + std::abs(4.0 * rng.normal())));
      else
        set("father_age", father_dead_age);
      set("mother_alive", t.mother_alive ? 1.0 : 0.0);
      set("father_alive", t.father_alive ? 1.0 : 0.0);
      set("marital_status", t.marital);

      // health state
      set("self_rated_health",
          std::clamp(std::round(2.5 + 0.75 * h + 0.7 * rng.normal()), 1.0, 5.0));
      set("dental_health",
          std::clamp(std::round(2.7 + 0.25 * h + 0.9 * rng.normal()), 1.0, 5.0));
      for (int d = 0; d < 14; ++d) {
        const double z = kDiagnosisBase[d] + 0.25 * h + 0.04 * (age - 70);
        // chronic conditions accumulate; incidence after the first wave
        if (!t.diagnosed[d]) t.diagnosed[d] = rng.bernoulli(sigmoid(z) * (wave == 2 ? 1.0 : 0.3));
        set(kDiagnosisNames[d], t.diagnosed[d] ? 1.0 : 0.0);
      }
      set("shortness_of_breath", rng.bernoulli(sigmoid(0.7 * h - 1.9)) ? 1.0 : 0.0);
      set("persistent_wheezing", rng.bernoulli(sigmoid(0.4 * h - 1.9)) ? 1.0 : 0.0);
      const bool pain = rng.bernoulli(sigmoid(0.5 * h - 0.8));
      set("pain_troubled", pain ? 1.0 : 0.0);
      set("pain_severity",
          pain ? std::clamp(std::round(1.6 + 0.4 * h + 0.7 * rng.normal()), 1.0, 3.0) : 0.0);
      set("leg_pain_walking", rng.bernoulli(sigmoid(0.6 * h - 1.6)) ? 1.0 : 0.0);

      // procedures and recent history
      if (!t.joint_replaced)
        t.joint_replaced = rng.bernoulli(sigmoid(0.3 * h + 0.05 * (age - 70) - 3.0));
      set("joint_replacement", t.joint_replaced ? 1.0 : 0.0);
      set("recent_angina", rng.bernoulli(sigmoid(0.35 * h - 3.1)) ? 1.0 : 0.0);
      set("recent_heart_attack", rng.bernoulli(sigmoid(0.35 * h - 3.4)) ? 1.0 : 0.0);
      set("recent_hip_fracture",
          rng.bernoulli(sigmoid(0.3 * h + 0.05 * (age - 70) - 3.8)) ? 1.0 : 0.0);
      set("recent_psych_problems", rng.bernoulli(sigmoid(0.3 * h - 3.0)) ? 1.0 : 0.0);

      // reported difficulties
      set("diff_walk_100yds", rng.bernoulli(sigmoid(1.3 * h - 1.7)) ? 1.0 : 0.0);
      set("diff_sit_2hours", rng.bernoulli(sigmoid(0.6 * h - 2.2)) ? 1.0 : 0.0);
      set("diff_carry_10lbs", rng.bernoulli(sigmoid(1.1 * h - 1.8)) ? 1.0 : 0.0);
      set("diff_pick_up_coin", rng.bernoulli(sigmoid(0.7 * h - 2.8)) ? 1.0 : 0.0);
      set("diff_reach_arms", rng.bernoulli(sigmoid(0.8 * h - 2.4)) ? 1.0 : 0.0);
      set("diff_push_pull_large", rng.bernoulli(sigmoid(1.1 * h - 1.9)) ? 1.0 : 0.0);

      // sensory
      set("eyesight_distance",
          std::clamp(std::round(2.3 + 0.2 * h + 0.05 * (age - 70) + 0.8 * rng.normal()), 1.0, 5.0));
      set("eyesight_near",
          std::clamp(std::round(2.4 + 0.2 * h + 0.05 * (age - 70) + 0.8 * rng.normal()), 1.0, 5.0));
      set("hearing",
          std::clamp(std::round(2.3 + 0.15 * h + 0.07 * (age - 70) + 0.8 * rng.normal()), 1.0, 5.0));

      // cognition
      set("cesd_score", std::clamp(std::round(1.2 + 0.55 * h + 1.2 * rng.normal()), 0.0, 8.0));
      set("memory_problems",
          rng.bernoulli(sigmoid(0.4 * h + 0.05 * (age - 70) - 2.6)) ? 1.0 : 0.0);
      set("self_rated_memory",
          std::clamp(std::round(2.6 + 0.3 * h + 0.04 * (age - 70) + 0.8 * rng.normal()), 1.0, 5.0));

      // falls
      const bool fallen = rng.bernoulli(sigmoid(0.5 * h + 0.03 * (age - 70) - 1.3));
      set("fallen_down_2y", fallen ? 1.0 : 0.0);
      set("number_of_falls", fallen ? 1.0 + static_cast<double>(rng.below(3)) : 0.0);
      set("fall_injury", (fallen && rng.bernoulli(sigmoid(0.3 * h - 1.2))) ? 1.0 : 0.0);
      set("uses_fall_alarm", rng.bernoulli(sigmoid(0.5 * h + 0.05 * (age - 70) - 3.6)) ? 1.0 : 0.0);

      // timed tests and grip; these carry the recoverable signal
      const double sbs = round_to(std::clamp(10.0 - 2.5 * (h - 2.5 + 0.4 * rng.normal()), 0.0, 10.0), 0.01);
      const double semi = round_to(std::clamp(10.0 - 2.0 * (h - 1.5 + 0.4 * rng.normal()), 0.0, 10.0), 0.01);
      const double full = round_to(std::clamp(10.0 - 2.0 * (h - 0.2 + 0.5 * rng.normal()), 0.0, 10.0), 0.01);
      const bool gait_unable = h + 0.3 * rng.normal() > 4.8;
      const double gait_time = round_to(std::max(1.2, 2.35 + 0.78 * h + 0.35 * rng.normal()), 0.01);
      const bool chair_unable = h + 0.3 * rng.normal() > 4.5;
      const double chair_time = round_to(std::max(4.0, 8.6 + 2.1 * h + 1.1 * rng.normal()), 0.01);
      const double grip = round_to(
          std::max(2.0, (t.male ? 40.0 : 26.0) - 4.5 * h + 5.5 * t.strength + 2.5 * rng.normal()),
          0.1);
      set("grip_strength", grip);

      // daily functioning
      set("health_limits_work", rng.bernoulli(sigmoid(0.9 * h - 1.6)) ? 1.0 : 0.0);
      set("adl_dressing", rng.bernoulli(sigmoid(1.0 * h - 2.0)) ? 1.0 : 0.0);
      set("adl_walking_room", rng.bernoulli(sigmoid(1.1 * h - 2.8)) ? 1.0 : 0.0);
      set("adl_bathing", rng.bernoulli(sigmoid(1.1 * h - 2.4)) ? 1.0 : 0.0);
      set("adl_eating", rng.bernoulli(sigmoid(0.9 * h - 3.2)) ? 1.0 : 0.0);
      set("adl_bed_transfer", rng.bernoulli(sigmoid(1.0 * h - 2.7)) ? 1.0 : 0.0);
      set("adl_toilet", rng.bernoulli(sigmoid(1.0 * h - 3.0)) ? 1.0 : 0.0);
      set("iadl_map_use", rng.bernoulli(sigmoid(0.8 * h - 2.9)) ? 1.0 : 0.0);
      set("iadl_hot_meal", rng.bernoulli(sigmoid(0.9 * h - 2.8)) ? 1.0 : 0.0);
      set("iadl_shopping", rng.bernoulli(sigmoid(1.1 * h - 2.2)) ? 1.0 : 0.0);
      set("iadl_medications", rng.bernoulli(sigmoid(0.9 * h - 3.1)) ? 1.0 : 0.0);
      set("iadl_housework", rng.bernoulli(sigmoid(1.1 * h - 2.1)) ? 1.0 : 0.0);
      set("iadl_money", rng.bernoulli(sigmoid(0.9 * h - 2.9)) ? 1.0 : 0.0);

      // habits
      if (t.smokes && wave > 2 && rng.bernoulli(0.15)) t.smokes = false;
      set("smokes_now", t.smokes ? 1.0 : 0.0);
      set("ever_smoked", t.ever_smoked ? 1.0 : 0.0);
      set("cigarettes_per_day", t.smokes ? 5.0 + static_cast<double>(rng.below(20)) : 0.0);
      const bool drinks = rng.bernoulli(sigmoid(0.8 - 0.25 * h));
      set("drinks_alcohol", drinks ? 1.0 : 0.0);
      set("drinks_per_week",
          drinks ? std::max(0.0, std::round(4.0 + 3.0 * rng.normal() - 0.5 * h)) : 0.0);
      set("social_participation",
          std::clamp(std::round(2.8 - 0.35 * h + 0.9 * rng.normal()), 0.0, 5.0));
      set("working_status",
          (age < 65 ? rng.bernoulli(sigmoid(2.2 - 0.30 * (age - 60) - 0.4 * h))
                    : rng.bernoulli(0.05))
              ? 1.0
              : 0.0);
      set("activity_vigorous",
          std::clamp(std::round(2.2 - 0.55 * h - 0.04 * (age - 70) + 0.8 * rng.normal()), 0.0, 4.0));
      set("activity_moderate",
          std::clamp(std::round(2.8 - 0.45 * h - 0.02 * (age - 70) + 0.8 * rng.normal()), 0.0, 4.0));
      set("activity_light",
          std::clamp(std::round(3.3 - 0.3 * h + 0.7 * rng.normal()), 0.0, 4.0));

      // physical measures
      const double height = round_to(t.height_base - 0.3 * (wave - 2) / 2.0, 0.5);
      const double bmi =
          round_to(std::clamp(27.5 + 0.35 * h + t.bmi_base + 0.4 * rng.normal(), 16.0, 45.0), 0.1);
      set("height_cm", height);
      set("bmi", bmi);
      set("weight_kg", round_to(bmi * (height / 100.0) * (height / 100.0), 0.1));
      set("systolic_bp",
          std::clamp(std::round(128.0 + 0.45 * (age - 70) + 2.0 * h + 11.0 * rng.normal()), 85.0,
                     210.0));
      set("diastolic_bp",
          std::clamp(std::round(76.0 + 0.15 * (age - 70) + 1.0 * h + 7.0 * rng.normal()), 50.0,
                     125.0));

      // parent deaths between waves
      if (t.mother_alive && rng.bernoulli(std::clamp(0.25 + 0.01 * (age - 60), 0.0, 0.9)))
        t.mother_alive = false;
      if (t.father_alive && rng.bernoulli(std::clamp(0.30 + 0.01 * (age - 60), 0.0, 0.9)))
        t.father_alive = false;
      // widowhood between waves
      if (t.marital <= 3 && rng.bernoulli(std::clamp(0.04 + 0.004 * (age - 60), 0.0, 0.5)))
        t.marital = 6;

      // missingness: one draw per balance assessment, then per ordinary cell.
      // Age is the pairing and filter key and is always observed.
      const bool balance_missing = rng.bernoulli(0.02);
      const bool gait_missing = rng.bernoulli(0.02);
      const bool chair_missing = rng.bernoulli(0.02);

      if (!balance_missing) {
        BalanceMeasurement b{sbs, semi, full};
        rec.balance = b;
        rec.values[sbs_i] = sbs;
        rec.values[semi_i] = semi;
        rec.values[full_i] = full;
      }
      if (!gait_missing) {
        GaitMeasurement g;
        g.course_length_m = 2.44;
        if (!gait_unable) {
          g.time_s = gait_time;
          rec.values[gait_i] = gait_time;
        }
        rec.gait = g;
      }
      if (!chair_missing) {
        ChairStandMeasurement c;
        if (!chair_unable) {
          c.time_s = chair_time;
          rec.values[chair_i] = chair_time;
        }
        rec.chair = c;
      }

      for (std::size_t f = 0; f < schema.features.size(); ++f) {
        const auto& def = schema.features[f];
        if (def.derived || f == age_i) continue;
        if (f == sbs_i || f == semi_i || f == full_i || f == gait_i || f == chair_i) continue;
        if (rng.bernoulli(0.10)) rec.values[f] = kMissing;
      }

      rec.age = age;
      records.push_back(std::move(rec));

      h += 0.22 + 0.028 * std::max(0.0, age - 70.0) - 0.09 * t.strength + 0.15 * rng.normal();
    }
  }
  return records;
}

}  // namespace sppb
