#pragma once

#include "vbnn/model_state.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace vbnn {

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct SparseMask {
    std::vector<BoolMatrix> keep;            // per weight layer, rows x inputs
    std::vector<std::vector<bool>> node_alive;  // per hidden layer
    double kappa = 1.0;
    double alpha = 0.0;

    int kept_edges() const;
    int total_edges() const;
};

// Q = Phi(|m| / sd) for every weight (biases excluded), per layer.
std::vector<Eigen::MatrixXd> weight_scores(const GlobalVariational& g);

// Estimated false discovery rate of the set {Q > kappa}; 0 when empty.
double fdr_estimate(const std::vector<double>& scores, double kappa);

struct Threshold {
    double kappa = 1.0;
    bool empty = true;  // even the top score exceeds the FDR target
};

// Lowers the threshold down the sorted scores while the selected set keeps an
// estimated FDR below alpha. Tied scores are accepted or rejected together.
Threshold select_threshold(const std::vector<double>& scores, double alpha);

SparseMask select_from_scores(const std::vector<Eigen::MatrixXd>& scores, double alpha);
SparseMask select_nodes(const GlobalVariational& g, double alpha);

// Drops incoming weights of nodes without outgoing ones and vice versa,
// repeated to a fixed point. Refreshes node_alive.
void structural_prune(SparseMask& mask);

std::vector<std::vector<int>> alive_nodes(const SparseMask& mask);

// Pruned weights get mean 0 and variance 0. With `compact`, dead hidden nodes
// are removed from the network.
GlobalVariational apply_mask(const GlobalVariational& g, const SparseMask& mask, bool compact);

SparseMask full_mask(const GlobalVariational& g);

std::string mask_to_dot(const SparseMask& mask, const std::vector<std::string>& inputs = {},
                        const std::vector<std::string>& outputs = {});

}  // namespace vbnn
