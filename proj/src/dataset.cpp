#include "sppb/dataset.hpp"

#include <cmath>
#include <unordered_map>

#include "csv_util.hpp"
#include "sppb/preprocess.hpp"

namespace sppb {

namespace {

struct DerivedIdx {
  std::size_t balance_score, gait_score, chair_score, sppb_total;
};

/// Partial scores at a wave; missing when the assessment was not recorded.
void fill_derived(std::vector<double>& row, const ParticipantWaveRecord& rec,
                  const DerivedIdx& idx, const CutoffTable& cutoffs) {
  const double b = rec.balance ? score_balance(*rec.balance, cutoffs) : kMissing;
  const double g = rec.gait ? score_gait(*rec.gait, cutoffs) : kMissing;
  const double c = rec.chair ? score_chair(*rec.chair, cutoffs) : kMissing;
  row[idx.balance_score] = b;
  row[idx.gait_score] = g;
  row[idx.chair_score] = c;
  row[idx.sppb_total] =
      (rec.balance && rec.gait && rec.chair) ? b + g + c : kMissing;
}

}  // namespace

SupervisedDataset build_wave_pairs(const std::vector<ParticipantWaveRecord>& records,
                                   const FeatureSchema& schema, double min_age,
                                   double max_age, const CutoffTable& cutoffs) {
  schema.validate();
  const std::size_t base_width = schema.features.size();
  const DerivedIdx didx{schema.index_of("balance_score"), schema.index_of("gait_score"),
                        schema.index_of("chair_score"), schema.index_of("sppb_total")};

  std::unordered_map<std::string, std::unordered_map<int, std::size_t>> by_participant;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.values.size() != base_width)
      throw DataError("record for '" + rec.participant_id +
                      "' does not match the schema width");
    if (!by_participant[rec.participant_id].emplace(rec.wave, i).second)
      throw DataError("duplicate record for participant '" + rec.participant_id +
                      "' at wave " + std::to_string(rec.wave));
  }

  std::vector<double> base_rows;
  std::vector<int> targets;
  std::vector<SampleProvenance> provenance;
  std::vector<double> row(base_width);

  for (const auto& rec : records) {
    if (rec.wave != 2 && rec.wave != 4) continue;
    if (is_missing(rec.age) || rec.age < min_age || rec.age > max_age) continue;

    const auto& waves = by_participant.at(rec.participant_id);
    const auto target_it = waves.find(rec.wave + 2);
    if (target_it == waves.end()) continue;
    const auto& target = records[target_it->second];
    // the target must be ground truth: all three assessments recorded
    if (!target.balance || !target.gait || !target.chair) continue;

    row.assign(rec.values.begin(), rec.values.end());
    fill_derived(row, rec, didx, cutoffs);
    const int y = total_sppb(score_balance(*target.balance, cutoffs),
                             score_gait(*target.gait, cutoffs),
                             score_chair(*target.chair, cutoffs))
                      .total;

    base_rows.insert(base_rows.end(), row.begin(), row.end());
    targets.push_back(y);
    provenance.push_back({rec.participant_id, rec.wave, rec.wave + 2});
  }

  if (targets.empty())
    throw DataError("wave pairing produced an empty dataset (" +
                    std::to_string(records.size()) + " records, ages " +
                    csv::format_double(min_age) + " to " + csv::format_double(max_age) + ")");

  Matrix base(targets.size(), base_width);
  base.values = std::move(base_rows);
  auto [X, names] = one_hot_encode(base, schema);

  SupervisedDataset ds;
  ds.schema = schema;
  ds.feature_names = std::move(names);
  ds.X = std::move(X);
  ds.y = std::move(targets);
  ds.provenance = std::move(provenance);
  return ds;
}

void save_dataset_csv(const std::string& path, const SupervisedDataset& ds,
                      char delimiter) {
  csv::Writer writer(path);
  std::vector<std::string> fields{"participant_id", "feature_wave", "target_wave"};
  fields.insert(fields.end(), ds.feature_names.begin(), ds.feature_names.end());
  fields.push_back("sppb_future");
  writer.row(fields, delimiter);

  for (std::size_t i = 0; i < ds.size(); ++i) {
    fields.clear();
    fields.push_back(ds.provenance[i].participant_id);
    fields.push_back(std::to_string(ds.provenance[i].feature_wave));
    fields.push_back(std::to_string(ds.provenance[i].target_wave));
    for (std::size_t j = 0; j < ds.X.cols; ++j) {
      const double v = ds.X.at(i, j);
      fields.push_back(is_missing(v) ? std::string() : csv::format_double(v));
    }
    fields.push_back(std::to_string(ds.y[i]));
    writer.row(fields, delimiter);
  }
  writer.close();
}

SupervisedDataset load_dataset_csv(const std::string& path, const FeatureSchema& schema,
                                   char delimiter) {
  schema.validate();
  csv::Reader reader(path);
  std::vector<std::string> header;
  if (!reader.next(header, delimiter)) throw DataError("empty dataset file: " + path);

  const auto expected = schema.expanded_names();
  if (header.size() != expected.size() + 4 || header[0] != "participant_id" ||
      header[1] != "feature_wave" || header[2] != "target_wave" ||
      header.back() != "sppb_future")
    throw DataError("dataset header of " + path + " does not match the schema layout");
  for (std::size_t j = 0; j < expected.size(); ++j)
    if (header[j + 3] != expected[j])
      throw DataError("dataset column '" + header[j + 3] + "' does not match schema column '" +
                      expected[j] + "'");

  SupervisedDataset ds;
  ds.schema = schema;
  ds.feature_names = expected;

  std::vector<std::string> fields;
  std::vector<double> cells;
  while (reader.next(fields, delimiter)) {
    const std::size_t row = reader.line_number;
    if (fields.size() != header.size())
      throw DataError("row " + std::to_string(row) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    SampleProvenance prov;
    prov.participant_id = fields[0];
    prov.feature_wave = static_cast<int>(csv::parse_cell(fields[1], row, "feature_wave"));
    prov.target_wave = static_cast<int>(csv::parse_cell(fields[2], row, "target_wave"));
    for (std::size_t j = 0; j < expected.size(); ++j)
      cells.push_back(csv::parse_cell(fields[j + 3], row, expected[j]));
    const double y = csv::parse_cell(fields.back(), row, "sppb_future");
    if (std::isnan(y) || y != std::floor(y) || y < 0.0 || y > 12.0)
      throw DataError("row " + std::to_string(row) + ": target must be an integer in 0..12");
    ds.y.push_back(static_cast<int>(y));
    ds.provenance.push_back(std::move(prov));
  }
  if (ds.y.empty()) throw DataError("dataset file has no samples: " + path);

  ds.X.rows = ds.y.size();
  ds.X.cols = expected.size();
  ds.X.values = std::move(cells);
  return ds;
}

}  // namespace sppb
