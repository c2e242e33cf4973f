#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ft/plots.hpp"
#include "ft/raster.hpp"

namespace ft {

/// Plot-level training example: one aggregated EO value per channel plus the
/// measured height.
struct FeatureVector {
    std::string plot_id;
    std::vector<double> features;
    double label = 0.0;
};

/// Per channel, the mean over pixels whose centers lie within the plot radius
/// of the plot center; when no pixel center qualifies, the pixel containing
/// the center. Throws DataError for plots outside the grid or all-nodata
/// footprints.
FeatureVector extract_plot_features(const EOStack& stack, const PlotRecord& plot);
std::vector<FeatureVector> extract_plot_features(const EOStack& stack, const PlotTable& plots);

/// Ordinary least squares with intercept; predictions clamped at 0 m.
struct MLRModel {
    double intercept = 0.0;
    std::vector<double> coefficients;
};

/// Requires n > n_features + 1. A rank-deficient design matrix degrades to
/// the minimum-norm solution with a warning on stderr.
MLRModel mlr_fit(const std::vector<FeatureVector>& train);
double mlr_predict_raw(const MLRModel& model, const std::vector<double>& features);  // unclamped
double mlr_predict(const MLRModel& model, const std::vector<double>& features);

/// kNN imputation over standardized features. Predictions are convex
/// combinations of reference labels, hence bounded by the reference label
/// range.
struct KNNModel {
    enum class Weighting { inverse_distance, uniform };

    int k = 5;
    Weighting weighting = Weighting::inverse_distance;
    std::vector<double> feature_mean;
    std::vector<double> feature_std;  // floored at 1e-6
    std::vector<FeatureVector> references;  // features stored standardized
    std::string reference_path;             // provenance of the reference table
};

KNNModel knn_fit(const std::vector<FeatureVector>& train, int k,
                 KNNModel::Weighting weighting = KNNModel::Weighting::inverse_distance);

/// Standardizes the raw query, ranks references by Euclidean distance with
/// ties broken by plot_id, and returns the inverse-distance (or uniform)
/// weighted label mean of the k nearest. A zero-distance match returns that
/// reference's label exactly.
double knn_predict(const KNNModel& model, const std::vector<double>& raw_features);

// JSON (de)serialization.
void save_mlr(const MLRModel& model, const std::filesystem::path& path);
MLRModel load_mlr(const std::filesystem::path& path);
void save_knn(const KNNModel& model, const std::filesystem::path& path);
KNNModel load_knn(const std::filesystem::path& path);

} // namespace ft
