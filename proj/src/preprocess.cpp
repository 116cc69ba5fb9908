#include "sppb/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "sppb/errors.hpp"
#include "sppb/parallel.hpp"
#include "sppb/version.hpp"

namespace sppb {

namespace {

constexpr int kPreprocessFormatVersion = 1;

}  // namespace

std::pair<Matrix, std::vector<std::string>> one_hot_encode(const Matrix& X,
                                                           const FeatureSchema& schema) {
  schema.validate();
  if (X.cols != schema.features.size())
    throw DataError("one-hot input has " + std::to_string(X.cols) + " columns, schema has " +
                    std::to_string(schema.features.size()) + " features");

  Matrix out(X.rows, schema.expanded_width());
  for (std::size_t r = 0; r < X.rows; ++r) {
    std::size_t o = 0;
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      const auto& def = schema.features[f];
      const double v = X.at(r, f);
      if (def.kind != FeatureKind::nominal) {
        out.at(r, o++) = v;
        continue;
      }
      if (is_missing(v)) {
        for (std::size_t c = 0; c < def.categories.size(); ++c) out.at(r, o++) = kMissing;
        continue;
      }
      std::ptrdiff_t hit = -1;
      for (std::size_t c = 0; c < def.categories.size(); ++c)
        if (v == static_cast<double>(def.categories[c].code)) hit = static_cast<std::ptrdiff_t>(c);
      if (hit < 0)
        throw DataError("feature '" + def.name + "': value " + std::to_string(v) +
                        " outside the declared categories");
      for (std::size_t c = 0; c < def.categories.size(); ++c)
        out.at(r, o++) = (static_cast<std::ptrdiff_t>(c) == hit) ? 1.0 : 0.0;
    }
  }
  return {std::move(out), schema.expanded_names()};
}

PreprocessModel fit_impute(const Matrix& X_fit, std::size_t k_neighbors) {
  if (k_neighbors < 1) throw ConfigError("k_neighbors must be at least 1");
  if (X_fit.rows == 0) throw DataError("imputer fitted on an empty matrix");

  PreprocessModel model;
  model.k_neighbors = k_neighbors;
  model.reference = X_fit;
  model.reference_col_mean.assign(X_fit.cols, 0.0);
  for (std::size_t j = 0; j < X_fit.cols; ++j) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < X_fit.rows; ++r) {
      const double v = X_fit.at(r, j);
      if (!is_missing(v)) {
        sum += v;
        ++count;
      }
    }
    if (count == 0)
      throw DataError("column " + std::to_string(j) + " has no observed values; cannot impute");
    model.reference_col_mean[j] = sum / static_cast<double>(count);
  }
  return model;
}

namespace {

/// Distances from row s to every reference row under the missing-aware
/// Euclidean metric. Masked arithmetic adds exact zero terms for skipped
/// coordinates, so the sums match a branchy per-coordinate loop bit for bit.
void row_distances(std::span<const double> x, std::span<const double> x_mask,
                   const Matrix& ref, const std::vector<double>& ref_sanitized,
                   const std::vector<double>& ref_mask, std::vector<double>& dist) {
  const std::size_t p = ref.cols;
  const double p_total = static_cast<double>(p);
  for (std::size_t r = 0; r < ref.rows; ++r) {
    const double* b = ref_sanitized.data() + r * p;
    const double* bm = ref_mask.data() + r * p;
    double d2 = 0.0;
    double common = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double m = x_mask[j] * bm[j];
      const double d = m * (x[j] - b[j]);
      d2 += d * d;
      common += m;
    }
    dist[r] = common > 0.0 ? std::sqrt(d2 * p_total / common)
                           : std::numeric_limits<double>::infinity();
  }
}

}  // namespace

Matrix impute(const PreprocessModel& model, const Matrix& X) {
  if (!model.has_impute()) throw ConfigError("preprocess model has no imputation part");
  const Matrix& ref = model.reference;
  if (X.cols != ref.cols)
    throw DataError("impute input has " + std::to_string(X.cols) + " columns, model has " +
                    std::to_string(ref.cols));

  const std::size_t p = ref.cols;
  std::vector<double> ref_sanitized(ref.values.size());
  std::vector<double> ref_mask(ref.values.size());
  for (std::size_t i = 0; i < ref.values.size(); ++i) {
    const bool obs = !is_missing(ref.values[i]);
    ref_sanitized[i] = obs ? ref.values[i] : 0.0;
    ref_mask[i] = obs ? 1.0 : 0.0;
  }

  Matrix out = X;
  parallel_for(X.rows, [&](std::size_t s) {
    const auto x_raw = X.row(s);
    bool any_missing = false;
    for (std::size_t j = 0; j < p; ++j)
      if (is_missing(x_raw[j])) any_missing = true;
    if (!any_missing) return;

    std::vector<double> x(p), x_mask(p);
    for (std::size_t j = 0; j < p; ++j) {
      const bool obs = !is_missing(x_raw[j]);
      x[j] = obs ? x_raw[j] : 0.0;
      x_mask[j] = obs ? 1.0 : 0.0;
    }
    std::vector<double> dist(ref.rows);
    row_distances(x, x_mask, ref, ref_sanitized, ref_mask, dist);

    // bounded selection, ordered by (distance, donor index)
    std::vector<std::pair<double, std::size_t>> best;
    best.reserve(model.k_neighbors + 1);
    for (std::size_t j = 0; j < p; ++j) {
      if (!is_missing(x_raw[j])) continue;
      best.clear();
      for (std::size_t r = 0; r < ref.rows; ++r) {
        if (ref_mask[r * p + j] == 0.0) continue;  // donor must observe j
        if (std::isinf(dist[r])) continue;         // no shared coordinates
        const std::pair<double, std::size_t> cand{dist[r], r};
        if (best.size() == model.k_neighbors && !(cand < best.back())) continue;
        best.insert(std::lower_bound(best.begin(), best.end(), cand), cand);
        if (best.size() > model.k_neighbors) best.pop_back();
      }
      if (best.empty()) {
        out.at(s, j) = model.reference_col_mean[j];
      } else {
        double sum = 0.0;
        for (const auto& [d, r] : best) sum += ref.at(r, j);
        out.at(s, j) = sum / static_cast<double>(best.size());
      }
    }
  });
  return out;
}

PreprocessModel fit_scale(const Matrix& X_fit) {
  if (X_fit.rows == 0) throw DataError("scaler fitted on an empty matrix");
  if (X_fit.has_missing()) throw DataError("scaler must be fitted on a complete matrix");

  PreprocessModel model;
  model.col_min.assign(X_fit.cols, 0.0);
  model.col_max.assign(X_fit.cols, 0.0);
  for (std::size_t j = 0; j < X_fit.cols; ++j) {
    double lo = X_fit.at(0, j), hi = X_fit.at(0, j);
    for (std::size_t r = 1; r < X_fit.rows; ++r) {
      lo = std::min(lo, X_fit.at(r, j));
      hi = std::max(hi, X_fit.at(r, j));
    }
    model.col_min[j] = lo;
    model.col_max[j] = hi;
  }
  return model;
}

Matrix scale(const PreprocessModel& model, const Matrix& X) {
  if (!model.has_scale()) throw ConfigError("preprocess model has no scaling part");
  if (X.cols != model.col_min.size())
    throw DataError("scale input has " + std::to_string(X.cols) + " columns, model has " +
                    std::to_string(model.col_min.size()));

  Matrix out = X;
  for (std::size_t r = 0; r < X.rows; ++r)
    for (std::size_t j = 0; j < X.cols; ++j) {
      const double v = X.at(r, j);
      if (is_missing(v)) continue;
      const double range = model.col_max[j] - model.col_min[j];
      double t = range == 0.0 ? 0.0 : (v - model.col_min[j]) / range;
      t = std::clamp(t, 0.0, 1.0);
      out.at(r, j) = t;
    }
  return out;
}

Matrix unscale(const PreprocessModel& model, const Matrix& X) {
  if (!model.has_scale()) throw ConfigError("preprocess model has no scaling part");
  if (X.cols != model.col_min.size())
    throw DataError("unscale input has " + std::to_string(X.cols) + " columns, model has " +
                    std::to_string(model.col_min.size()));

  Matrix out = X;
  for (std::size_t r = 0; r < X.rows; ++r)
    for (std::size_t j = 0; j < X.cols; ++j) {
      const double v = X.at(r, j);
      if (is_missing(v)) continue;
      out.at(r, j) = model.col_min[j] + v * (model.col_max[j] - model.col_min[j]);
    }
  return out;
}

PreprocessModel fit_preprocess(const Matrix& X_fit, std::size_t k_neighbors) {
  PreprocessModel model = fit_impute(X_fit, k_neighbors);
  const Matrix completed = impute(model, X_fit);
  PreprocessModel scaler = fit_scale(completed);
  model.col_min = std::move(scaler.col_min);
  model.col_max = std::move(scaler.col_max);
  return model;
}

Matrix apply_preprocess(const PreprocessModel& model, const Matrix& X) {
  return scale(model, impute(model, X));
}

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json cells = json::array();
  for (const double v : m.values)
    if (is_missing(v)) cells.push_back(nullptr);
    else cells.push_back(v);
  return json{{"rows", m.rows}, {"cols", m.cols}, {"values", std::move(cells)}};
}

Matrix matrix_from_json(const json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  const auto& cells = j.at("values");
  if (cells.size() != m.values.size()) throw DataError("matrix cell count mismatch");
  for (std::size_t i = 0; i < m.values.size(); ++i)
    m.values[i] = cells[i].is_null() ? kMissing : cells[i].get<double>();
  return m;
}

}  // namespace

void save_preprocess(const PreprocessModel& model, const std::string& path) {
  json j;
  j["format_version"] = kPreprocessFormatVersion;
  j["tool_version"] = kToolVersion;
  j["feature_names"] = model.feature_names;
  j["k_neighbors"] = model.k_neighbors;
  if (model.has_impute()) {
    j["reference"] = matrix_to_json(model.reference);
    j["reference_col_mean"] = model.reference_col_mean;
  }
  if (model.has_scale()) {
    j["col_min"] = model.col_min;
    j["col_max"] = model.col_max;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write preprocess model: " + path);
  out << j.dump(2) << '\n';
  out.close();
  if (!out) throw DataError("write failed: " + path);
}

PreprocessModel load_preprocess(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open preprocess model: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("cannot parse preprocess model " + path + ": " + e.what());
  }
  if (j.value("format_version", 0) != kPreprocessFormatVersion)
    throw DataError("unsupported preprocess model version in " + path);

  PreprocessModel model;
  model.feature_names = j.value("feature_names", std::vector<std::string>{});
  model.k_neighbors = j.value("k_neighbors", std::size_t{5});
  if (j.contains("reference")) {
    model.reference = matrix_from_json(j.at("reference"));
    model.reference_col_mean = j.at("reference_col_mean").get<std::vector<double>>();
  }
  if (j.contains("col_min")) {
    model.col_min = j.at("col_min").get<std::vector<double>>();
    model.col_max = j.at("col_max").get<std::vector<double>>();
  }
  return model;
}

}  // namespace sppb
