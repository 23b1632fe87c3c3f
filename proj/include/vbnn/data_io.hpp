#pragma once

#include "vbnn/model_state.hpp"
#include "vbnn/predictor.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace vbnn {

struct Table {
    std::vector<std::string> header;
    Eigen::MatrixXd values;
};

Table read_csv(const std::string& path, char delimiter = ',');

// Targets are picked by column name; every other column is an input.
Dataset load_dataset(const std::string& path, const std::vector<std::string>& targets, char delimiter = ',');

Normalization fit_normalization(const Eigen::MatrixXd& X_raw);
// Builds a dataset normalized with the given statistics.
Dataset make_dataset(const Eigen::MatrixXd& X_raw, const Eigen::MatrixXd& Y, const Normalization& norm,
                     std::vector<std::string> feature_names = {}, std::vector<std::string> target_names = {});
// Same, with statistics taken from X_raw.
Dataset make_dataset(const Eigen::MatrixXd& X_raw, const Eigen::MatrixXd& Y, std::vector<std::string> feature_names = {},
                     std::vector<std::string> target_names = {});
Eigen::MatrixXd normalize(const Eigen::MatrixXd& X_raw, const Normalization& norm);

// Seeded shuffle; training rows set the normalization for both parts.
std::pair<Dataset, Dataset> split(const Dataset& data, double train_frac, std::uint64_t seed);

// x ~ U[-2, 2]^2, y = 0.1 x1^2 + 10 sin(x1) + N(0, 0.5).
Dataset simulate_toy(int n, Rng& rng);

struct Metrics {
    double rmse = 0.0;
    double nll = 0.0;       // mean negative log predictive density
    double coverage = 0.0;  // fraction of targets inside the credible interval
    double level = 0.95;
    int n = 0;
};

Metrics evaluate(const std::vector<PredictiveSummary>& preds, const Eigen::MatrixXd& Y, double level = 0.95);

// Writes to a temporary file in the same directory, then renames.
void atomic_write(const std::string& path, const std::string& content);

std::string predictions_csv(const std::vector<PredictiveSummary>& preds, double level);
std::string table_csv(const Table& t);

}  // namespace vbnn
