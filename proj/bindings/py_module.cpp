// Python bindings for the score-prediction core: scoring, synthetic data,
// preprocessing, model fit/predict, attributions, metrics.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sppb/dataset.hpp"
#include "sppb/errors.hpp"
#include "sppb/eval.hpp"
#include "sppb/matrix.hpp"
#include "sppb/preprocess.hpp"
#include "sppb/regressor.hpp"
#include "sppb/schema.hpp"
#include "sppb/shap.hpp"
#include "sppb/sppb_score.hpp"
#include "sppb/synthetic.hpp"
#include "sppb/version.hpp"

namespace py = pybind11;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

sppb::Matrix to_matrix(const DoubleArray& a) {
  if (a.ndim() != 2) throw sppb::DataError("expected a 2-d array");
  sppb::Matrix m(static_cast<std::size_t>(a.shape(0)),
                 static_cast<std::size_t>(a.shape(1)));
  if (!m.values.empty())
    std::memcpy(m.values.data(), a.data(), sizeof(double) * m.values.size());
  return m;
}

py::array_t<double> to_array(const sppb::Matrix& m) {
  py::array_t<double> a(std::vector<py::ssize_t>{
      static_cast<py::ssize_t>(m.rows), static_cast<py::ssize_t>(m.cols)});
  if (!m.values.empty())
    std::memcpy(a.mutable_data(), m.values.data(),
                sizeof(double) * m.values.size());
  return a;
}

std::vector<double> to_vector(const DoubleArray& a) {
  if (a.ndim() != 1) throw sppb::DataError("expected a 1-d array");
  return std::vector<double>(a.data(), a.data() + a.shape(0));
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> a(static_cast<py::ssize_t>(v.size()));
  if (!v.empty())
    std::memcpy(a.mutable_data(), v.data(), sizeof(double) * v.size());
  return a;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  using namespace sppb;

  m.doc() =
      "Core routines for predicting a future physical performance score "
      "from questionnaire and assessment data.";
  m.attr("__version__") = kToolVersion;
  m.attr("UNLIMITED_DEPTH") = kUnlimitedDepth;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);

  // scoring
  m.def(
      "score_balance",
      [](std::optional<double> side_by_side_s, std::optional<double> semi_tandem_s,
         std::optional<double> full_tandem_s) {
        return score_balance(
            BalanceMeasurement{side_by_side_s, semi_tandem_s, full_tandem_s});
      },
      py::arg("side_by_side_s") = py::none(),
      py::arg("semi_tandem_s") = py::none(),
      py::arg("full_tandem_s") = py::none(),
      "Balance points, 0-4. None means the stance was not attempted.");
  m.def(
      "score_gait",
      [](std::optional<double> time_s, double course_length_m) {
        return score_gait(GaitMeasurement{time_s, course_length_m});
      },
      py::arg("time_s") = py::none(), py::arg("course_length_m") = 4.0,
      "Gait points, 0-4. Cutoffs scale with the course length; None means "
      "the walk could not be completed.");
  m.def(
      "score_chair",
      [](std::optional<double> time_s) {
        return score_chair(ChairStandMeasurement{time_s});
      },
      py::arg("time_s") = py::none(),
      "Chair-stand points, 0-4. None means unable or over the time limit.");
  m.def(
      "total_sppb",
      [](int balance, int gait, int chair) {
        return total_sppb(balance, gait, chair).total;
      },
      py::arg("balance"), py::arg("gait"), py::arg("chair"),
      "Total score 0-12 from the three partial scores.");
  m.def(
      "classify_sppb",
      [](int total) { return std::string(to_string(classify_sppb(total))); },
      py::arg("total"),
      "Classification of a 0-12 total: good, reduced, or very_poor.");

  // data
  m.def(
      "synthetic_dataset",
      [](std::uint64_t seed, std::size_t n_participants) {
        const FeatureSchema schema = default_schema();
        const auto records = generate_synthetic_cohort(seed, n_participants, schema);
        const SupervisedDataset ds = build_wave_pairs(records, schema);
        py::array_t<double> y(static_cast<py::ssize_t>(ds.y.size()));
        auto* out = y.mutable_data();
        for (std::size_t i = 0; i < ds.y.size(); ++i) out[i] = ds.y[i];
        return py::make_tuple(to_array(ds.X), y, ds.feature_names);
      },
      py::arg("seed") = 1, py::arg("n_participants") = 1000,
      "Seeded synthetic supervised dataset: (X, y, feature_names). X is "
      "one-hot expanded and still contains NaN for missing cells; y is the "
      "total score four years after the feature wave.");

  // preprocessing
  py::class_<PreprocessModel>(m, "PreprocessModel",
                              "Fitted imputation and scaling state.")
      .def_readonly("feature_names", &PreprocessModel::feature_names)
      .def_readonly("k_neighbors", &PreprocessModel::k_neighbors)
      .def_property_readonly(
          "col_min", [](const PreprocessModel& p) { return to_array(p.col_min); })
      .def_property_readonly(
          "col_max", [](const PreprocessModel& p) { return to_array(p.col_max); })
      .def(
          "save",
          [](const PreprocessModel& p, const std::string& path) {
            save_preprocess(p, path);
          },
          py::arg("path"));
  m.def(
      "fit_preprocess",
      [](const DoubleArray& x, std::size_t k_neighbors,
         std::vector<std::string> feature_names) {
        PreprocessModel p = fit_preprocess(to_matrix(x), k_neighbors);
        p.feature_names = std::move(feature_names);
        return p;
      },
      py::arg("x"), py::arg("k_neighbors") = 5,
      py::arg("feature_names") = std::vector<std::string>{},
      "Fits the k-nearest-neighbor imputer and the 0-1 scaler on x.");
  m.def(
      "apply_preprocess",
      [](const PreprocessModel& p, const DoubleArray& x) {
        return to_array(apply_preprocess(p, to_matrix(x)));
      },
      py::arg("model"), py::arg("x"), "Imputes then scales x.");
  m.def("load_preprocess", &load_preprocess, py::arg("path"));

  // models
  py::class_<RegressorSpec>(m, "RegressorSpec",
                            "Model family and hyperparameters.")
      .def(py::init([](const std::string& family, int trees, int max_depth,
                       double min_samples_leaf, double learning_rate,
                       double l2_leaf_penalty, std::size_t features_per_split,
                       bool bootstrap, std::vector<std::size_t> layer_sizes,
                       int epochs, std::size_t batch_size, std::uint64_t seed) {
             RegressorSpec s;
             s.family = family_from_string(family);
             s.trees = trees;
             s.max_depth = max_depth;
             s.min_samples_leaf = min_samples_leaf;
             s.learning_rate = learning_rate;
             s.l2_leaf_penalty = l2_leaf_penalty;
             s.features_per_split = features_per_split;
             s.bootstrap = bootstrap;
             s.layer_sizes = std::move(layer_sizes);
             s.epochs = epochs;
             s.batch_size = batch_size;
             s.seed = seed;
             s.validate();
             return s;
           }),
           py::arg("family") = "boosted", py::arg("trees") = 100,
           py::arg("max_depth") = 2, py::arg("min_samples_leaf") = 1.0,
           py::arg("learning_rate") = 0.3, py::arg("l2_leaf_penalty") = 1.0,
           py::arg("features_per_split") = 0, py::arg("bootstrap") = true,
           py::arg("layer_sizes") = std::vector<std::size_t>{8, 16, 8},
           py::arg("epochs") = 200, py::arg("batch_size") = 64,
           py::arg("seed") = 0)
      .def_property(
          "family",
          [](const RegressorSpec& s) { return to_string(s.family); },
          [](RegressorSpec& s, const std::string& name) {
            s.family = family_from_string(name);
          })
      .def_readwrite("trees", &RegressorSpec::trees)
      .def_readwrite("max_depth", &RegressorSpec::max_depth)
      .def_readwrite("min_samples_leaf", &RegressorSpec::min_samples_leaf)
      .def_readwrite("learning_rate", &RegressorSpec::learning_rate)
      .def_readwrite("l2_leaf_penalty", &RegressorSpec::l2_leaf_penalty)
      .def_readwrite("features_per_split", &RegressorSpec::features_per_split)
      .def_readwrite("bootstrap", &RegressorSpec::bootstrap)
      .def_readwrite("layer_sizes", &RegressorSpec::layer_sizes)
      .def_readwrite("epochs", &RegressorSpec::epochs)
      .def_readwrite("batch_size", &RegressorSpec::batch_size)
      .def_readwrite("seed", &RegressorSpec::seed)
      .def("parameter_summary", &RegressorSpec::parameter_summary)
      .def("__repr__", [](const RegressorSpec& s) {
        return "RegressorSpec(" + s.parameter_summary() + ")";
      });

  py::class_<TrainedRegressor>(m, "Regressor", "A fitted model.")
      .def_property_readonly(
          "family",
          [](const TrainedRegressor& r) { return to_string(r.family); })
      .def_readonly("n_features", &TrainedRegressor::n_features)
      .def_readonly("spec", &TrainedRegressor::spec)
      .def(
          "predict",
          [](const TrainedRegressor& r, const DoubleArray& x) {
            const Matrix mx = to_matrix(x);
            if (mx.cols != r.n_features)
              throw DataError("predict: expected " + std::to_string(r.n_features) +
                              " feature columns, got " + std::to_string(mx.cols));
            return to_array(predict(r, mx));
          },
          py::arg("x"))
      .def(
          "save",
          [](const TrainedRegressor& r, const std::string& path) {
            save_regressor(r, path);
          },
          py::arg("path"));
  m.def(
      "fit_regressor",
      [](const DoubleArray& x, const DoubleArray& y, const RegressorSpec& spec) {
        const Matrix mx = to_matrix(x);
        const std::vector<double> vy = to_vector(y);
        if (mx.rows != vy.size())
          throw DataError("fit_regressor: x has " + std::to_string(mx.rows) +
                          " rows but y has " + std::to_string(vy.size()));
        return fit_regressor(mx, vy, spec);
      },
      py::arg("x"), py::arg("y"), py::arg("spec") = RegressorSpec{},
      "Fits the family selected by spec on complete feature rows.");
  m.def("load_regressor", &load_regressor, py::arg("path"));

  // attributions
  py::class_<AttributionMatrix>(m, "Attributions",
                                "Signed per-sample, per-feature contributions.")
      .def_property_readonly(
          "values", [](const AttributionMatrix& a) { return to_array(a.values); })
      .def_readonly("base_value", &AttributionMatrix::base_value)
      .def_readonly("feature_names", &AttributionMatrix::feature_names);
  m.def(
      "tree_shap",
      [](const TrainedRegressor& r, const DoubleArray& x,
         std::vector<std::string> feature_names) {
        return tree_shap(r, to_matrix(x), std::move(feature_names));
      },
      py::arg("model"), py::arg("x"),
      py::arg("feature_names") = std::vector<std::string>{},
      "Exact path-dependent Shapley attributions for the tree families.");
  m.def(
      "linear_attributions",
      [](const TrainedRegressor& r, const DoubleArray& x,
         std::vector<std::string> feature_names) {
        return linear_attributions(r, to_matrix(x), std::move(feature_names));
      },
      py::arg("model"), py::arg("x"),
      py::arg("feature_names") = std::vector<std::string>{});
  m.def(
      "rank_features",
      [](const AttributionMatrix& a) {
        std::vector<std::pair<std::string, double>> out;
        for (const auto& e : rank_features(a).entries)
          out.emplace_back(e.name, e.importance);
        return out;
      },
      py::arg("attributions"),
      "(name, mean absolute attribution) pairs, importance descending.");
  m.def("default_shap_exclusions", &default_shap_exclusions,
        "Feature names excluded from reduced-model selection.");

  // metrics
  m.def(
      "mae",
      [](const DoubleArray& y_true, const DoubleArray& y_pred) {
        return mae(to_vector(y_true), to_vector(y_pred));
      },
      py::arg("y_true"), py::arg("y_pred"));
  m.def(
      "mse",
      [](const DoubleArray& y_true, const DoubleArray& y_pred) {
        return mse(to_vector(y_true), to_vector(y_pred));
      },
      py::arg("y_true"), py::arg("y_pred"));
}
