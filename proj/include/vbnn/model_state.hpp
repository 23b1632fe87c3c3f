#pragma once

#include "vbnn/distributions.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace vbnn {

enum class PriorFamily { InverseGamma, Gamma, InverseGaussian, GeneralGig };
enum class InitScheme { Laplace, SpikeSlab };

std::string to_string(PriorFamily f);
PriorFamily prior_family_from_string(const std::string& s);
std::string to_string(InitScheme s);
InitScheme init_scheme_from_string(const std::string& s);

// Shrinkage hyperparameters for a family: IG uses nu/delta, Gamma nu/lambda,
// IGauss delta/lambda with nu fixed at -1/2.
GigParams default_prior(PriorFamily f);

struct NetworkConfig {
    std::vector<int> dims;  // D_0 (inputs), D_1..D_L (hidden), D_{L+1} (outputs)
    double temperature = 0.1;
    PriorFamily prior_family = PriorFamily::InverseGamma;
    GigParams glob_prior{-1.5, 1.0, 0.0};
    GigParams loc_prior_base{-1.5, 1.0, 0.0};
    double bias_var = 1.0;
    InvGammaParams noise_prior_out{2.0, 0.5};
    InvGammaParams noise_prior_hidden{3.0, 0.03};
    bool em_enabled = true;
    std::uint64_t seed = 0;

    int depth() const { return static_cast<int>(dims.size()) - 2; }
    int num_weight_layers() const { return static_cast<int>(dims.size()) - 1; }
    void validate() const;
};

// Everything the model needs after configuration: temperature, bias and noise
// priors, and the shrinkage priors after depth/width scaling. The global
// shrinkage prior is refreshed by the EM step.
struct Hyperparameters {
    PriorFamily family = PriorFamily::InverseGamma;
    double temperature = 0.1;
    double bias_var = 1.0;
    InvGammaParams noise_out{2.0, 0.5};
    InvGammaParams noise_hidden{3.0, 0.03};
    bool em_enabled = true;
    GigParams glob;
    std::vector<GigParams> loc;  // one per weight layer
};

Hyperparameters scale_hyperparameters(const NetworkConfig& config);

// Posterior over one weight layer. Row d holds the bias followed by the
// incoming weights, so the Gaussian for a row has dimension inputs + 1.
struct WeightLayer {
    std::vector<Eigen::VectorXd> mean;
    std::vector<Eigen::MatrixXd> cov;
    std::vector<InvGammaParams> noise;
    GigParams tau;
    double psi_nu = -2.0;
    double psi_lam = 0.0;
    Eigen::MatrixXd psi_delta;  // rows x inputs

    int rows() const { return static_cast<int>(mean.size()); }
    int inputs() const { return static_cast<int>(psi_delta.cols()); }
    GigParams psi(int d, int j) const { return {psi_nu, psi_delta(d, j), psi_lam}; }
};

struct GlobalVariational {
    Hyperparameters hyper;
    std::vector<WeightLayer> layers;  // L hidden layers then the output layer

    int depth() const { return static_cast<int>(layers.size()) - 1; }
    std::vector<int> dims() const;
};

// Per-observation factors of one hidden layer. q(a_l | a_{l-1}) has mean
// shift + gain * a_{l-1} and covariance cov.
struct LocalLayer {
    Eigen::VectorXd rho;      // E[gamma]
    Eigen::VectorXd pg_tilt;  // A, so q(omega) = PG(1, A)
    Eigen::VectorXd shift;
    Eigen::MatrixXd gain;
    Eigen::MatrixXd cov;
    double log_det_cov = 0.0;
};

// Index 0 is the input. cross[k] = E[a_k a_{k-1}^T] for k >= 1.
struct ActivationMoments {
    std::vector<Eigen::VectorXd> mean;
    std::vector<Eigen::MatrixXd> second;
    std::vector<Eigen::MatrixXd> cross;
};

struct LocalPoint {
    std::vector<LocalLayer> layers;
    ActivationMoments moments;
};

struct LocalVariational {
    std::vector<LocalPoint> points;
};

struct Normalization {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
};

struct Dataset {
    Eigen::MatrixXd X;      // normalized inputs, N x D_0
    Eigen::MatrixXd Y;      // raw targets, N x D_{L+1}
    Eigen::MatrixXd X_raw;  // inputs before normalization
    std::vector<std::string> feature_names;
    std::vector<std::string> target_names;
    Normalization norm;

    int size() const { return static_cast<int>(X.rows()); }
};

struct FitResult {
    NetworkConfig config;
    GlobalVariational global;
    std::vector<double> elbo_trace;
    bool converged = false;
    std::uint64_t seed = 0;
    double wall_time = 0.0;
    Normalization norm;
    std::vector<std::string> feature_names;
    std::vector<std::string> target_names;

    double final_elbo() const { return elbo_trace.empty() ? 0.0 : elbo_trace.back(); }
};

// Recomputes means, second moments and cross moments of a point from its
// shift/gain/cov chain.
void refresh_moments(LocalPoint& point, const Eigen::VectorXd& x);

// (1, E[a_k]) and E[(1, a_k)(1, a_k)^T].
Eigen::VectorXd augmented_mean(const ActivationMoments& m, int k);
Eigen::MatrixXd augmented_second(const ActivationMoments& m, int k);

std::pair<GlobalVariational, LocalVariational> initialize(const NetworkConfig& config, const Eigen::MatrixXd& X,
                                                          const Eigen::MatrixXd& Y, InitScheme scheme, Rng& rng);

// Deterministic forward pass with the current posterior means; used to seed
// local factors for new data (prediction, SVI minibatches).
LocalPoint forward_init(const GlobalVariational& global, const Eigen::VectorXd& x);

// Sanity checks: SPD covariances, rho in (0,1), valid GIG and noise params.
void check_invariants(const GlobalVariational& global);
void check_invariants(const LocalVariational& local);

}  // namespace vbnn
