#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "sppb/matrix.hpp"
#include "sppb/schema.hpp"

namespace sppb {

/// Fitted preprocessing state. The imputation part keeps the fit split as a
/// reference matrix (donor rows); the scaling part keeps per-column min/max.
/// fit_impute and fit_scale each fill their own part; fit_preprocess fills
/// both. Pipeline order is fixed: one-hot, impute, scale.
struct PreprocessModel {
  std::vector<std::string> feature_names;

  // imputation
  Matrix reference;
  std::vector<double> reference_col_mean;  // fallback donor value
  std::size_t k_neighbors = 5;

  // scaling
  std::vector<double> col_min;
  std::vector<double> col_max;

  bool has_impute() const { return reference.rows > 0; }
  bool has_scale() const { return !col_min.empty(); }
};

/// Replaces each nominal schema feature by one binary column per declared
/// category. A present value sets exactly one of them to 1; a missing value
/// leaves all of them missing. X columns follow schema feature order.
std::pair<Matrix, std::vector<std::string>> one_hot_encode(const Matrix& X,
                                                           const FeatureSchema& schema);

/// Fits the k nearest neighbor imputer: stores the fit rows as donors.
/// Every column must have at least one observed value.
PreprocessModel fit_impute(const Matrix& X_fit, std::size_t k_neighbors = 5);

/// Fills missing cells. The distance from a sample to a donor row is the
/// missing-aware Euclidean distance: squared differences summed over
/// coordinates observed in both rows, rescaled by total/common coordinate
/// count, square-rooted. A missing cell (s, j) becomes the unweighted mean
/// of column j over the k nearest donors having j observed; ties by lower
/// donor index. Samples sharing no observed coordinate with any such donor
/// fall back to the reference column mean. Observed cells pass through.
Matrix impute(const PreprocessModel& model, const Matrix& X);

/// Fits per-column min/max on a complete matrix.
PreprocessModel fit_scale(const Matrix& X_fit);

/// Maps x to (x - min) / (max - min), clipped to [0, 1]. Constant columns
/// map to 0.
Matrix scale(const PreprocessModel& model, const Matrix& X);

/// Inverse of scale for non-constant columns (constant columns recover the
/// fitted constant). Values are not un-clipped.
Matrix unscale(const PreprocessModel& model, const Matrix& X);

/// fit_impute on X_fit, then fit_scale on the imputed fit split.
PreprocessModel fit_preprocess(const Matrix& X_fit, std::size_t k_neighbors = 5);

/// impute then scale.
Matrix apply_preprocess(const PreprocessModel& model, const Matrix& X);

void save_preprocess(const PreprocessModel& model, const std::string& path);
PreprocessModel load_preprocess(const std::string& path);

}  // namespace sppb
