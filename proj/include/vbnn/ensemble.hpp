#pragma once

#include "vbnn/cavi.hpp"
#include "vbnn/predictor.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace vbnn {

struct EnsembleModel {
    std::vector<FitResult> members;
    Eigen::VectorXd weights;
    double zeta = 0.05;
};

// softmax(zeta * elbo), computed in log space.
Eigen::VectorXd ensemble_weights(const std::vector<double>& elbos, double zeta);

// Moment-matched mixture: mean sum w mu, variance sum w var + sum w mu^2 - mean^2.
PredictiveSummary combine_predictions(const std::vector<PredictiveSummary>& parts, const Eigen::VectorXd& w);

// Member k uses seed + k and alternates Laplace / spike-and-slab starts.
EnsembleModel fit_ensemble(const NetworkConfig& config, const Dataset& data, int members, double zeta,
                           const CaviOptions& options, std::uint64_t seed);

PredictiveSummary ensemble_predict(const EnsembleModel& model, const Eigen::VectorXd& x, const PredictOptions& options);
std::vector<PredictiveSummary> ensemble_predict(const EnsembleModel& model, const Eigen::MatrixXd& X,
                                                const PredictOptions& options);

}  // namespace vbnn
