#pragma once

#include "vbnn/cavi.hpp"

#include <Eigen/Dense>

#include <vector>

namespace vbnn {

struct SparseMask;

struct PredictOptions {
    double tol = 1e-4;
    int consecutive_hits = 3;
    int max_iters = 500;
};

struct PredictiveSummary {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;         // signal + noise
    Eigen::VectorXd signal_variance;  // excludes output noise
};

struct Interval {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};

// Local factors for a new (normalized) input, iterated until the local
// objective stops moving. The trace of that objective is optional output.
LocalPoint predictive_local_fit(const GlobalVariational& g, const Eigen::VectorXd& x, const PredictOptions& options,
                                std::vector<double>* trace = nullptr);

PredictiveSummary predictive_moments(const GlobalVariational& g, const LocalPoint& p);

// J ancestral draws of y*, one per row.
Eigen::MatrixXd sample_predictive(const GlobalVariational& g, const LocalPoint& p, int J, Rng& rng);

PredictiveSummary predict_point(const GlobalVariational& g, const Eigen::VectorXd& x, const PredictOptions& options);
std::vector<PredictiveSummary> predict(const GlobalVariational& g, const Eigen::MatrixXd& X,
                                       const PredictOptions& options);

// Predictions with pruned weights fixed at zero; dead nodes are dropped.
PredictiveSummary sparse_predict(const GlobalVariational& g, const SparseMask& mask, const Eigen::VectorXd& x,
                                 const PredictOptions& options);
std::vector<PredictiveSummary> sparse_predict(const GlobalVariational& g, const SparseMask& mask,
                                              const Eigen::MatrixXd& X, const PredictOptions& options);

// Gaussian credible interval at the given level.
Interval credible_interval(const PredictiveSummary& s, double level);

// Square-root factor of a PSD matrix (may be singular).
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& A);

}  // namespace vbnn
