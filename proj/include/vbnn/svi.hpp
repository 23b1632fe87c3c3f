#pragma once

#include "vbnn/cavi.hpp"

#include <vector>

namespace vbnn {

struct SviOptions {
    int batch_size = 32;
    double forgetting_rate = 0.7;  // k in (0.5, 1]
    int max_iters = 2000;
    double tol = 1e-3;  // on the windowed mean of the noisy ELBO
    int window = 5;
    int consecutive_hits = 3;
    double local_tol = 1e-6;
    int local_max = 50;
    InitScheme init = InitScheme::Laplace;
};

// (1 + t)^(-k), t counted from 0. Options restrict k to (0.5, 1].
double learning_rate(int t, double k);

struct SviState {
    GlobalVariational global;
    int t = 0;
    std::vector<double> noisy_elbo;
};

struct SviStepResult {
    std::vector<int> batch;
    LocalVariational local;
    double rate = 0.0;
    double noisy_elbo = 0.0;
};

// Draws `size` distinct indices from [0, n).
std::vector<int> sample_batch(int n, int size, Rng& rng);

// Interpolates the noise and weight factors towards their minibatch targets.
// `scale` multiplies the minibatch sums (N/|S|), `n_total` fixes alpha on the
// first step.
void svi_global_update(GlobalVariational& g, const LocalVariational& local, const Eigen::MatrixXd& Y, double scale,
                       double rate, int n_total, bool first_step);

double noisy_elbo(const GlobalVariational& g, const LocalVariational& local, const Eigen::MatrixXd& Y, double scale);

// Coordinate ascent on the local factors of a minibatch until the local
// objective settles.
void fit_local_batch(const GlobalVariational& g, LocalVariational& local, const Eigen::MatrixXd& X,
                     const Eigen::MatrixXd& Y, double tol, int max_iter);

// One stochastic step. On the first call (state.global empty) the globals are
// initialized from the minibatch.
SviStepResult svi_step(SviState& state, const NetworkConfig& config, const Dataset& data, const SviOptions& options,
                       Rng& rng);

bool window_converged(const std::vector<double>& trace, int window, double tol, int hits);

FitResult fit_svi(const NetworkConfig& config, const Dataset& data, const SviOptions& options, Rng& rng);

}  // namespace vbnn
