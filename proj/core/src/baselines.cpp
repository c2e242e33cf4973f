#include "ft/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include <Eigen/Dense>
#include <json.hpp>

#include "ft/error.hpp"

namespace ft {

FeatureVector extract_plot_features(const EOStack& stack, const PlotRecord& plot) {
    const auto center = stack.grid.world_to_pixel(plot.x, plot.y);
    if (!center) throw DataError("plot '" + plot.plot_id + "' lies outside the grid extent");

    // Candidate window: all pixels whose centers could lie within the radius.
    const int reach = static_cast<int>(plot.radius_m / stack.grid.pixel_size) + 1;
    std::vector<PixelIndex> footprint;
    for (int row = center->row - reach; row <= center->row + reach; ++row) {
        for (int col = center->col - reach; col <= center->col + reach; ++col) {
            if (row < 0 || row >= stack.grid.height || col < 0 || col >= stack.grid.width) continue;
            const double dx = stack.grid.center_x(col) - plot.x;
            const double dy = stack.grid.center_y(row) - plot.y;
            if (dx * dx + dy * dy <= plot.radius_m * plot.radius_m) footprint.push_back({row, col});
        }
    }
    if (footprint.empty()) footprint.push_back(*center);

    FeatureVector fv;
    fv.plot_id = plot.plot_id;
    fv.label = plot.height_m;
    fv.features.resize(stack.bands());
    for (int c = 0; c < stack.bands(); ++c) {
        double sum = 0.0;
        int n = 0;
        for (const auto& px : footprint) {
            const float v = stack.at(c, px.row, px.col);
            if (std::isfinite(v)) {
                sum += v;
                ++n;
            }
        }
        if (n == 0)
            throw DataError("plot '" + plot.plot_id + "': all-nodata footprint in band " +
                            std::to_string(c));
        fv.features[c] = sum / n;
    }
    return fv;
}

std::vector<FeatureVector> extract_plot_features(const EOStack& stack, const PlotTable& plots) {
    std::vector<FeatureVector> out;
    out.reserve(plots.size());
    for (const auto& p : plots) out.push_back(extract_plot_features(stack, p));
    return out;
}

namespace {

void check_feature_lengths(const std::vector<FeatureVector>& rows) {
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].features.size() != rows[0].features.size())
            throw DataError("feature vectors have inconsistent lengths");
}

} // namespace

MLRModel mlr_fit(const std::vector<FeatureVector>& train) {
    if (train.empty()) throw DataError("mlr_fit: empty training set");
    check_feature_lengths(train);
    const auto n = static_cast<Eigen::Index>(train.size());
    const auto f = static_cast<Eigen::Index>(train[0].features.size());
    if (n <= f + 1)
        throw DataError("mlr_fit: need more than " + std::to_string(f + 1) + " samples, got " +
                        std::to_string(n));

    Eigen::MatrixXd X(n, f + 1);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        for (Eigen::Index j = 0; j < f; ++j) X(i, j + 1) = train[i].features[j];
        y(i) = train[i].label;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.rank() < f + 1)
        std::cerr << "warning: mlr design matrix is rank-deficient (rank " << svd.rank() << " of "
                  << f + 1 << "); using the minimum-norm solution\n";
    const Eigen::VectorXd beta = svd.solve(y);

    MLRModel model;
    model.intercept = beta(0);
    model.coefficients.assign(beta.data() + 1, beta.data() + f + 1);
    return model;
}

double mlr_predict_raw(const MLRModel& model, const std::vector<double>& features) {
    if (features.size() != model.coefficients.size())
        throw DataError("mlr_predict: feature length mismatch");
    double acc = model.intercept;
    for (std::size_t j = 0; j < features.size(); ++j) acc += model.coefficients[j] * features[j];
    return acc;
}

double mlr_predict(const MLRModel& model, const std::vector<double>& features) {
    return std::max(0.0, mlr_predict_raw(model, features));
}

KNNModel knn_fit(const std::vector<FeatureVector>& train, int k, KNNModel::Weighting weighting) {
    if (train.empty()) throw DataError("knn_fit: empty training set");
    check_feature_lengths(train);
    if (k < 1) throw ConfigError("knn_fit: k must be >= 1");
    if (static_cast<std::size_t>(k) > train.size())
        throw DataError("knn_fit: k=" + std::to_string(k) + " exceeds reference count " +
                        std::to_string(train.size()));

    KNNModel model;
    model.k = k;
    model.weighting = weighting;
    const std::size_t f = train[0].features.size();
    model.feature_mean.assign(f, 0.0);
    model.feature_std.assign(f, 0.0);
    for (std::size_t j = 0; j < f; ++j) {
        double sum = 0.0, sumsq = 0.0;
        for (const auto& r : train) {
            sum += r.features[j];
            sumsq += r.features[j] * r.features[j];
        }
        const double mean = sum / static_cast<double>(train.size());
        const double var = std::max(0.0, sumsq / static_cast<double>(train.size()) - mean * mean);
        model.feature_mean[j] = mean;
        model.feature_std[j] = std::max(std::sqrt(var), 1e-6);
    }
    model.references = train;
    for (auto& r : model.references)
        for (std::size_t j = 0; j < f; ++j)
            r.features[j] = (r.features[j] - model.feature_mean[j]) / model.feature_std[j];
    return model;
}

double knn_predict(const KNNModel& model, const std::vector<double>& raw_features) {
    if (raw_features.size() != model.feature_mean.size())
        throw DataError("knn_predict: feature length mismatch");
    if (model.k < 1 || static_cast<std::size_t>(model.k) > model.references.size())
        throw DataError("knn_predict: k exceeds reference count");

    std::vector<double> q(raw_features.size());
    for (std::size_t j = 0; j < q.size(); ++j)
        q[j] = (raw_features[j] - model.feature_mean[j]) / model.feature_std[j];

    std::vector<std::size_t> order(model.references.size());
    std::vector<double> dist(model.references.size());
    for (std::size_t i = 0; i < model.references.size(); ++i) {
        order[i] = i;
        double acc = 0.0;
        const auto& rf = model.references[i].features;
        for (std::size_t j = 0; j < q.size(); ++j) {
            const double d = rf[j] - q[j];
            acc += d * d;
        }
        dist[i] = std::sqrt(acc);
    }
    const auto closer = [&](std::size_t a, std::size_t b) {
        if (dist[a] != dist[b]) return dist[a] < dist[b];
        return model.references[a].plot_id < model.references[b].plot_id;
    };
    const std::size_t k = static_cast<std::size_t>(model.k);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), closer);

    if (dist[order[0]] == 0.0) return model.references[order[0]].label;

    double wsum = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double w = model.weighting == KNNModel::Weighting::inverse_distance
                             ? 1.0 / (dist[order[i]] + 1e-6)
                             : 1.0;
        wsum += w;
        acc += w * model.references[order[i]].label;
    }
    return acc / wsum;
}

// ---- serialization ----------------------------------------------------------

void save_mlr(const MLRModel& model, const std::filesystem::path& path) {
    nlohmann::json j;
    j["model"] = "mlr";
    j["intercept"] = model.intercept;
    j["coefficients"] = model.coefficients;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write model file: " + path.string());
    out << j.dump(2) << '\n';
}

MLRModel load_mlr(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing model file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
        if (j.at("model").get<std::string>() != "mlr") throw DataError("not an mlr model: " + path.string());
        MLRModel model;
        model.intercept = j.at("intercept").get<double>();
        model.coefficients = j.at("coefficients").get<std::vector<double>>();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("corrupt model file: ") + e.what());
    }
}

void save_knn(const KNNModel& model, const std::filesystem::path& path) {
    nlohmann::json j;
    j["model"] = "knn";
    j["k"] = model.k;
    j["weighting"] = model.weighting == KNNModel::Weighting::inverse_distance ? "inverse_distance" : "uniform";
    j["feature_mean"] = model.feature_mean;
    j["feature_std"] = model.feature_std;
    j["reference_path"] = model.reference_path;
    nlohmann::json refs = nlohmann::json::array();
    for (const auto& r : model.references)
        refs.push_back({{"plot_id", r.plot_id}, {"features", r.features}, {"label", r.label}});
    j["references"] = std::move(refs);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write model file: " + path.string());
    out << j.dump(2) << '\n';
}

KNNModel load_knn(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing model file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
        if (j.at("model").get<std::string>() != "knn") throw DataError("not a knn model: " + path.string());
        KNNModel model;
        model.k = j.at("k").get<int>();
        model.weighting = j.at("weighting").get<std::string>() == "uniform"
                              ? KNNModel::Weighting::uniform
                              : KNNModel::Weighting::inverse_distance;
        model.feature_mean = j.at("feature_mean").get<std::vector<double>>();
        model.feature_std = j.at("feature_std").get<std::vector<double>>();
        model.reference_path = j.at("reference_path").get<std::string>();
        for (const auto& r : j.at("references")) {
            FeatureVector fv;
            fv.plot_id = r.at("plot_id").get<std::string>();
            fv.features = r.at("features").get<std::vector<double>>();
            fv.label = r.at("label").get<double>();
            model.references.push_back(std::move(fv));
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("corrupt model file: ") + e.what());
    }
}

} // namespace ft
