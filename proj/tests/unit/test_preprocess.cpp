#include "sppb/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "doctest.h"
#include "sppb/errors.hpp"
#include "sppb/rng.hpp"

using namespace sppb;

namespace {

/// Independent per-cell neighbor search: branchy distance loop, full stable
/// sort of every candidate donor. Any deviation from the shipped imputer is
/// a defect in one of them.
Matrix oracle_impute(const Matrix& ref, const Matrix& X, std::size_t k) {
  const std::size_t p = ref.cols;
  Matrix out = X;
  for (std::size_t s = 0; s < X.rows; ++s) {
    for (std::size_t j = 0; j < p; ++j) {
      if (!is_missing(X.at(s, j))) continue;

      std::vector<std::pair<double, std::size_t>> candidates;
      for (std::size_t r = 0; r < ref.rows; ++r) {
        if (is_missing(ref.at(r, j))) continue;
        double d2 = 0.0;
        std::size_t common = 0;
        for (std::size_t c = 0; c < p; ++c) {
          if (is_missing(X.at(s, c)) || is_missing(ref.at(r, c))) continue;
          const double d = X.at(s, c) - ref.at(r, c);
          d2 += d * d;
          ++common;
        }
        if (common == 0) continue;
        candidates.emplace_back(
            std::sqrt(d2 * static_cast<double>(p) / static_cast<double>(common)), r);
      }

      if (candidates.empty()) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t r = 0; r < ref.rows; ++r)
          if (!is_missing(ref.at(r, j))) {
            sum += ref.at(r, j);
            ++count;
          }
        out.at(s, j) = sum / static_cast<double>(count);
        continue;
      }

      std::sort(candidates.begin(), candidates.end());
      const std::size_t take = std::min(k, candidates.size());
      double sum = 0.0;
      for (std::size_t i = 0; i < take; ++i) sum += ref.at(candidates[i].second, j);
      out.at(s, j) = sum / static_cast<double>(take);
    }
  }
  return out;
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double missing_rate) {
  Matrix m(rows, cols);
  for (auto& v : m.values)
    v = rng.bernoulli(missing_rate) ? kMissing : rng.uniform(-3.0, 3.0);
  return m;
}

FeatureSchema nominal_schema() {
  FeatureSchema s;
  FeatureDef a;
  a.name = "x";
  a.kind = FeatureKind::continuous;
  s.features.push_back(a);
  FeatureDef m;
  m.name = "marital";
  m.kind = FeatureKind::nominal;
  m.categories = {{1, "married"}, {2, "divorced"}, {3, "widowed"}, {4, "never"}};
  s.features.push_back(m);
  s.validate();
  return s;
}

}  // namespace

TEST_CASE("one hot encoding expands nominal features") {
  const auto schema = nominal_schema();
  Matrix X(3, 2);
  X.at(0, 0) = 0.5; X.at(0, 1) = 1.0;
  X.at(1, 0) = 0.7; X.at(1, 1) = 4.0;
  X.at(2, 0) = 0.9; X.at(2, 1) = kMissing;

  const auto [out, names] = one_hot_encode(X, schema);
  REQUIRE(out.cols == 5);
  CHECK(names == std::vector<std::string>{"x", "marital=married", "marital=divorced",
                                          "marital=widowed", "marital=never"});
  CHECK(out.at(0, 1) == 1.0);
  CHECK(out.at(0, 2) == 0.0);
  CHECK(out.at(1, 4) == 1.0);
  // one observed value sets exactly one indicator
  CHECK(out.at(0, 1) + out.at(0, 2) + out.at(0, 3) + out.at(0, 4) == 1.0);
  // missing source leaves every indicator missing
  for (std::size_t c = 1; c < 5; ++c) CHECK(is_missing(out.at(2, c)));

  Matrix bad(1, 2);
  bad.at(0, 0) = 0.1;
  bad.at(0, 1) = 9.0;
  CHECK_THROWS_WITH_AS(one_hot_encode(bad, schema), doctest::Contains("marital"), DataError);
}

TEST_CASE("one hot encoding without nominal features is the identity") {
  FeatureSchema s;
  FeatureDef a;
  a.name = "x";
  s.features.push_back(a);
  Matrix X(2, 1);
  X.at(0, 0) = 1.5;
  X.at(1, 0) = kMissing;
  const auto [out, names] = one_hot_encode(X, s);
  CHECK(out.cols == 1);
  CHECK(out.at(0, 0) == 1.5);
  CHECK(is_missing(out.at(1, 0)));
}

TEST_CASE("imputation on a complete matrix is the identity") {
  Rng rng(3);
  const Matrix X = random_matrix(rng, 12, 5, 0.0);
  const auto model = fit_impute(X, 5);
  const Matrix out = impute(model, X);
  CHECK(out.values == X.values);
}

TEST_CASE("k=1 imputation picks the distance-minimizing donor") {
  // three complete donors; one query row missing feature 2
  Matrix ref(3, 3);
  const double vals[9] = {0.0, 0.0, 10.0, 1.0, 1.0, 20.0, 5.0, 5.0, 30.0};
  ref.values.assign(vals, vals + 9);
  Matrix X(1, 3);
  X.at(0, 0) = 0.9;
  X.at(0, 1) = 1.1;
  X.at(0, 2) = kMissing;

  const auto model = fit_impute(ref, 1);
  const Matrix out = impute(model, X);
  // squared distances: row0 2.02/2, row1 0.02/2, row2 32.02/2 -> row 1 wins
  CHECK(out.at(0, 2) == 20.0);
}

TEST_CASE("imputer matches the brute force oracle cell for cell") {
  Rng rng(20240817);
  for (int rep = 0; rep < 60; ++rep) {
    const Matrix ref = random_matrix(rng, 20, 8, 0.15);
    // skip degenerate references the fitter rejects
    bool fittable = true;
    for (std::size_t j = 0; j < ref.cols && fittable; ++j) {
      bool any = false;
      for (std::size_t r = 0; r < ref.rows; ++r)
        if (!is_missing(ref.at(r, j))) any = true;
      fittable = any;
    }
    if (!fittable) continue;

    const Matrix X = random_matrix(rng, 20, 8, 0.15);
    const auto model = fit_impute(ref, 5);
    const Matrix got = impute(model, X);
    const Matrix want = oracle_impute(ref, X, 5);
    for (std::size_t i = 0; i < got.values.size(); ++i) {
      CHECK(got.values[i] == want.values[i]);  // exact, same tie rule
    }
  }
}

TEST_CASE("imputation is idempotent and respects reference bounds") {
  Rng rng(7);
  const Matrix ref = random_matrix(rng, 25, 6, 0.1);
  const Matrix X = random_matrix(rng, 15, 6, 0.2);
  const auto model = fit_impute(ref, 5);
  const Matrix once = impute(model, X);
  const Matrix twice = impute(model, once);
  CHECK(once.values == twice.values);

  for (std::size_t j = 0; j < ref.cols; ++j) {
    double lo = 1e300, hi = -1e300;
    for (std::size_t r = 0; r < ref.rows; ++r)
      if (!is_missing(ref.at(r, j))) {
        lo = std::min(lo, ref.at(r, j));
        hi = std::max(hi, ref.at(r, j));
      }
    for (std::size_t s = 0; s < X.rows; ++s)
      if (is_missing(X.at(s, j))) {
        CHECK(once.at(s, j) >= lo);
        CHECK(once.at(s, j) <= hi);
      }
  }
}

TEST_CASE("rows sharing no coordinates fall back to the column mean") {
  Matrix ref(2, 2);
  ref.at(0, 0) = 1.0; ref.at(0, 1) = kMissing;
  ref.at(1, 0) = 3.0; ref.at(1, 1) = kMissing;
  // fitting fails outright when a column has no observed value
  CHECK_THROWS_AS(fit_impute(ref, 5), DataError);

  Matrix ref2(3, 2);
  ref2.at(0, 0) = 1.0; ref2.at(0, 1) = kMissing;
  ref2.at(1, 0) = 3.0; ref2.at(1, 1) = kMissing;
  ref2.at(2, 0) = kMissing; ref2.at(2, 1) = 8.0;
  const auto model = fit_impute(ref2, 5);

  // query observes only feature 1; the sole donor for feature 1 shares no
  // observed coordinate, so the reference mean steps in
  Matrix X(1, 2);
  X.at(0, 0) = kMissing;
  X.at(0, 1) = 5.0;
  const Matrix out = impute(model, X);
  CHECK(out.at(0, 0) == 2.0);
}

TEST_CASE("scaling endpoints, constants and clipping") {
  Matrix fit(3, 2);
  fit.at(0, 0) = 0.0; fit.at(1, 0) = 5.0; fit.at(2, 0) = 10.0;
  fit.at(0, 1) = 3.0; fit.at(1, 1) = 3.0; fit.at(2, 1) = 3.0;

  const auto model = fit_scale(fit);
  const Matrix out = scale(model, fit);
  CHECK(out.at(0, 0) == 0.0);
  CHECK(out.at(1, 0) == 0.5);
  CHECK(out.at(2, 0) == 1.0);
  for (std::size_t r = 0; r < 3; ++r) CHECK(out.at(r, 1) == 0.0);

  Matrix wild(2, 2);
  wild.at(0, 0) = 12.0; wild.at(0, 1) = 4.0;
  wild.at(1, 0) = -2.0; wild.at(1, 1) = 2.0;
  const Matrix clipped = scale(model, wild);
  CHECK(clipped.at(0, 0) == 1.0);
  CHECK(clipped.at(1, 0) == 0.0);
}

TEST_CASE("scale unscale round trip within 1e-12") {
  Rng rng(99);
  const Matrix fit = random_matrix(rng, 30, 4, 0.0);
  const auto model = fit_scale(fit);
  const Matrix there = scale(model, fit);
  const Matrix back = unscale(model, there);
  for (std::size_t i = 0; i < fit.values.size(); ++i)
    CHECK(std::abs(back.values[i] - fit.values[i]) < 1e-12);
}

TEST_CASE("fit_scale rejects incomplete input") {
  Matrix fit(2, 1);
  fit.at(0, 0) = 1.0;
  fit.at(1, 0) = kMissing;
  CHECK_THROWS_AS(fit_scale(fit), DataError);
}

TEST_CASE("full pipeline is deterministic on its own fit split") {
  Rng rng(5);
  const Matrix X = random_matrix(rng, 40, 6, 0.12);
  const auto model = fit_preprocess(X, 5);
  const Matrix a = apply_preprocess(model, X);
  const Matrix b = apply_preprocess(model, X);
  CHECK(a.values == b.values);
  for (const double v : a.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("preprocess model serialization round trip") {
  Rng rng(13);
  const Matrix X = random_matrix(rng, 10, 4, 0.15);
  const auto model = fit_preprocess(X, 3);

  const std::string path = "preprocess_test_tmp.json";
  save_preprocess(model, path);
  const auto loaded = load_preprocess(path);
  std::remove(path.c_str());

  CHECK(loaded.k_neighbors == model.k_neighbors);
  CHECK(loaded.reference.values.size() == model.reference.values.size());
  for (std::size_t i = 0; i < model.reference.values.size(); ++i) {
    if (is_missing(model.reference.values[i]))
      CHECK(is_missing(loaded.reference.values[i]));
    else
      CHECK(loaded.reference.values[i] == model.reference.values[i]);
  }
  CHECK(loaded.col_min == model.col_min);
  CHECK(loaded.col_max == model.col_max);
  CHECK(loaded.reference_col_mean == model.reference_col_mean);

  const Matrix a = apply_preprocess(model, X);
  const Matrix b = apply_preprocess(loaded, X);
  CHECK(a.values == b.values);
}
