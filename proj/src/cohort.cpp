#include "sppb/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "csv_util.hpp"
#include "sppb/matrix.hpp"

namespace sppb {

namespace {

bool is_missing_code(double v, const std::vector<double>& codes) {
  return std::find(codes.begin(), codes.end(), v) != codes.end();
}

bool is_unable(double v) { return v == kUnableCode; }

}  // namespace

std::vector<ParticipantWaveRecord> ingest_cohort(const std::string& path,
                                                 const FeatureSchema& schema,
                                                 const ColumnMap& column_map,
                                                 const IngestOptions& opts) {
  schema.validate();
  csv::Reader reader(path);

  std::vector<std::string> header;
  if (!reader.next(header, opts.delimiter)) throw DataError("empty cohort file: " + path);
  std::unordered_map<std::string, std::size_t> col_index;
  for (std::size_t i = 0; i < header.size(); ++i) col_index.emplace(header[i], i);

  auto resolve = [&](const std::string& name, bool required) -> std::ptrdiff_t {
    std::string column = name;
    if (const auto it = column_map.find(name); it != column_map.end()) column = it->second;
    if (column.empty()) {
      if (required) throw DataError("required column '" + name + "' marked absent");
      return -1;  // feature absent from the file: all cells missing
    }
    const auto it = col_index.find(column);
    if (it == col_index.end())
      throw DataError("column '" + column + "' (for '" + name + "') not in header of " + path);
    return static_cast<std::ptrdiff_t>(it->second);
  };

  const std::ptrdiff_t id_col = resolve("participant_id", true);
  const std::ptrdiff_t wave_col = resolve("wave", true);
  std::vector<std::ptrdiff_t> feature_col(schema.features.size(), -1);
  for (std::size_t f = 0; f < schema.features.size(); ++f)
    if (!schema.features[f].derived) feature_col[f] = resolve(schema.features[f].name, false);

  const std::size_t age_idx = schema.index_of("age");
  const std::size_t sbs = schema.index_of("balance_sbs_time");
  const std::size_t semi = schema.index_of("balance_semi_tandem_time");
  const std::size_t full = schema.index_of("balance_full_tandem_time");
  const std::size_t gait = schema.index_of("gait_time");
  const std::size_t chair = schema.index_of("chair_stand_time");

  std::vector<ParticipantWaveRecord> records;
  std::vector<std::string> fields;
  std::vector<double> raw(schema.features.size());
  while (reader.next(fields, opts.delimiter)) {
    const std::size_t row = reader.line_number;
    if (fields.size() != header.size())
      throw DataError("row " + std::to_string(row) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));

    ParticipantWaveRecord rec;
    rec.participant_id = fields[static_cast<std::size_t>(id_col)];
    if (rec.participant_id.empty())
      throw DataError("row " + std::to_string(row) + ": empty participant_id");
    const double wave = csv::parse_cell(fields[static_cast<std::size_t>(wave_col)], row, "wave");
    if (wave != 2.0 && wave != 4.0 && wave != 6.0)
      throw DataError("row " + std::to_string(row) + ": wave must be 2, 4 or 6");
    rec.wave = static_cast<int>(wave);

    // raw values with sentinel missing codes mapped out; -2 kept for now
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      const auto& def = schema.features[f];
      if (feature_col[f] < 0) {
        raw[f] = kMissing;
        continue;
      }
      double v = csv::parse_cell(fields[static_cast<std::size_t>(feature_col[f])], row, def.name);
      if (!std::isnan(v) && is_missing_code(v, def.missing_codes)) v = kMissing;
      raw[f] = v;
    }

    rec.values.assign(raw.begin(), raw.end());

    // balance: the three stances are one assessment; any unrecorded stance
    // voids it. Unable stances count as zero-second holds in the features.
    if (is_missing(raw[sbs]) || is_missing(raw[semi]) || is_missing(raw[full])) {
      rec.values[sbs] = rec.values[semi] = rec.values[full] = kMissing;
    } else {
      BalanceMeasurement b;
      auto stance = [&](std::size_t f, std::optional<double>& held) {
        if (is_unable(raw[f])) {
          rec.values[f] = 0.0;
        } else {
          if (raw[f] < 0.0)
            throw DataError("row " + std::to_string(row) + ", column '" +
                            schema.features[f].name + "': negative hold time");
          rec.values[f] = std::min(raw[f], opts.cutoffs.balance_hold_s);
          held = rec.values[f];
        }
      };
      stance(sbs, b.side_by_side_held_s);
      stance(semi, b.semi_tandem_held_s);
      stance(full, b.full_tandem_held_s);
      rec.balance = b;
    }

    // timed walks/rises: unable has no finite time; the feature cell is
    // left missing and the state lives in the measurement struct.
    auto check_time = [&](std::size_t f) {
      if (raw[f] <= 0.0)
        throw DataError("row " + std::to_string(row) + ", column '" +
                        schema.features[f].name + "': non-positive time");
    };
    if (!is_missing(raw[gait])) {
      GaitMeasurement g;
      g.course_length_m = opts.gait_course_m;
      if (is_unable(raw[gait])) {
        rec.values[gait] = kMissing;
      } else {
        check_time(gait);
        g.time_s = raw[gait];
      }
      rec.gait = g;
    }
    if (!is_missing(raw[chair])) {
      ChairStandMeasurement c;
      if (is_unable(raw[chair])) {
        rec.values[chair] = kMissing;
      } else {
        check_time(chair);
        c.time_s = raw[chair];
      }
      rec.chair = c;
    }

    rec.age = rec.values[age_idx];
    if (!is_missing(rec.age) && rec.age <= 0.0)
      throw DataError("row " + std::to_string(row) + ": non-positive age");
    records.push_back(std::move(rec));
  }
  return records;
}

void write_cohort_csv(const std::string& path, const FeatureSchema& schema,
                      const std::vector<ParticipantWaveRecord>& records,
                      char delimiter) {
  schema.validate();
  csv::Writer writer(path);

  std::vector<std::string> fields{"participant_id", "wave"};
  std::vector<std::size_t> cols;
  for (std::size_t f = 0; f < schema.features.size(); ++f)
    if (!schema.features[f].derived) {
      fields.push_back(schema.features[f].name);
      cols.push_back(f);
    }
  writer.row(fields, delimiter);

  const std::size_t sbs = schema.index_of("balance_sbs_time");
  const std::size_t semi = schema.index_of("balance_semi_tandem_time");
  const std::size_t full = schema.index_of("balance_full_tandem_time");
  const std::size_t gait = schema.index_of("gait_time");
  const std::size_t chair = schema.index_of("chair_stand_time");

  for (const auto& rec : records) {
    if (rec.values.size() != schema.features.size())
      throw DataError("record for '" + rec.participant_id + "' has " +
                      std::to_string(rec.values.size()) + " values, schema has " +
                      std::to_string(schema.features.size()));
    fields.clear();
    fields.push_back(rec.participant_id);
    fields.push_back(std::to_string(rec.wave));
    for (const std::size_t f : cols) {
      std::string cell;
      auto optional_time = [](const std::optional<double>& t) {
        return t ? csv::format_double(*t) : std::string("-2");
      };
      if (f == sbs && rec.balance) cell = optional_time(rec.balance->side_by_side_held_s);
      else if (f == semi && rec.balance) cell = optional_time(rec.balance->semi_tandem_held_s);
      else if (f == full && rec.balance) cell = optional_time(rec.balance->full_tandem_held_s);
      else if (f == gait && rec.gait) cell = optional_time(rec.gait->time_s);
      else if (f == chair && rec.chair) cell = optional_time(rec.chair->time_s);
      else if (!is_missing(rec.values[f])) cell = csv::format_double(rec.values[f]);
      fields.push_back(std::move(cell));
    }
    writer.row(fields, delimiter);
  }
  writer.close();
}

}  // namespace sppb
