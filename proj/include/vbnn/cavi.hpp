#pragma once

#include "vbnn/linalg.hpp"
#include "vbnn/model_state.hpp"

#include <Eigen/Dense>

#include <vector>

namespace vbnn {

struct CaviOptions {
    double elbo_tol = 1e-5;
    int max_sweeps = 5000;
    int consecutive_hits = 3;
    InitScheme init = InitScheme::Laplace;
};

// Expectations of one weight row: E[w~], E[w~ w~^T] (bias first), E[1/eta^2], E[log eta^2].
struct RowMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd second;
    double inv_noise = 0.0;
    double log_noise = 0.0;
};

struct LayerMoments {
    std::vector<RowMoments> rows;
    Eigen::MatrixXd weight_mean;  // rows x inputs, bias excluded
    Eigen::VectorXd bias_mean;
    Eigen::VectorXd inv_noise;
};

LayerMoments layer_moments(const WeightLayer& wl);
std::vector<LayerMoments> layer_moments(const GlobalVariational& g);

// --- global blocks -------------------------------------------------------

void update_tau(GlobalVariational& g, int k);
void update_psi(GlobalVariational& g, int k);

// Optimal q(eta^2_{k,d}) from the given local factors; sums over
// observations are multiplied by `scale` (N/|S| for minibatches).
InvGammaParams eta_target(const GlobalVariational& g, int k, int d, const LocalVariational& local,
                          const Eigen::MatrixXd& Y, double scale = 1.0);
void update_eta(GlobalVariational& g, int k, const LocalVariational& local, const Eigen::MatrixXd& Y);

// Natural parameters (B^{-1}, B^{-1} m) of the optimal q(w~_{k,d}).
struct GaussianNatural {
    Eigen::MatrixXd precision;
    Eigen::VectorXd shift;
};

GaussianNatural weight_target(const GlobalVariational& g, int k, int d, const LocalVariational& local,
                              const Eigen::MatrixXd& Y, double scale = 1.0);
void set_weight_row(WeightLayer& wl, int d, const GaussianNatural& nat);
void update_weights(GlobalVariational& g, int k, const LocalVariational& local, const Eigen::MatrixXd& Y);

// EM step on the global shrinkage hyperparameter (no-op for the general GIG family).
void em_update_global(GlobalVariational& g);
double em_delta_inverse_gamma(double nu_glob, const std::vector<GigParams>& tau_post);
double em_lambda_gamma(double nu_glob, const std::vector<GigParams>& tau_post);
double em_lambda_inverse_gaussian(double delta_glob, const std::vector<GigParams>& tau_post);

// --- local blocks (one observation) -------------------------------------

void update_omega(LocalPoint& p, const std::vector<LayerMoments>& lm, double T, int k);
void update_gamma(LocalPoint& p, const std::vector<LayerMoments>& lm, double T, int k);
// Backward recursion for q(a_n). Without a target (prediction) the output
// likelihood drops out.
void update_activations(LocalPoint& p, const std::vector<LayerMoments>& lm, const Eigen::VectorXd& x,
                        const Eigen::VectorXd* y, double T);

// One local coordinate pass: omega, activations, gamma for every layer.
void local_pass(LocalPoint& p, const std::vector<LayerMoments>& lm, const Eigen::VectorXd& x,
                const Eigen::VectorXd* y, double T);

// --- objective ------------------------------------------------------------

double elbo_global_terms(const GlobalVariational& g);
double elbo_local_terms(const std::vector<LayerMoments>& lm, const LocalPoint& p, const Eigen::VectorXd* y, double T);
double elbo(const GlobalVariational& g, const LocalVariational& local, const Eigen::MatrixXd& Y);

// --- driver ---------------------------------------------------------------

void cavi_sweep(GlobalVariational& g, LocalVariational& local, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y);

// True when the last `hits` relative changes of the trace are all below tol.
bool elbo_converged(const std::vector<double>& trace, double tol, int hits);

FitResult fit_cavi(const NetworkConfig& config, const Dataset& data, const CaviOptions& options, Rng& rng);

}  // namespace vbnn
