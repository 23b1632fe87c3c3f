#include "vbnn/svi.hpp"

#include "vbnn/parallel.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vbnn {

double learning_rate(int t, double k) {
    if (t < 0) throw std::invalid_argument("learning_rate: t must be >= 0");
    if (!(k > 0.0)) throw std::invalid_argument("learning_rate: k must be positive");
    return std::pow(1.0 + t, -k);
}

std::vector<int> sample_batch(int n, int size, Rng& rng) {
    if (size < 1 || size > n) throw std::invalid_argument("batch size must lie in [1, N]");
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < size; ++i) {
        std::uniform_int_distribution<int> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(size);
    return idx;
}

void svi_global_update(GlobalVariational& g, const LocalVariational& local, const Eigen::MatrixXd& Y, double scale,
                       double rate, int n_total, bool first_step) {
    const int L = g.depth();
    for (int k = 0; k <= L; ++k) {
        WeightLayer& wl = g.layers[k];
        const InvGammaParams& prior = k == L ? g.hyper.noise_out : g.hyper.noise_hidden;
        for (int d = 0; d < wl.rows(); ++d) {
            const InvGammaParams target = eta_target(g, k, d, local, Y, scale);
            InvGammaParams& q = wl.noise[d];
            if (first_step) q.alpha = prior.alpha + 0.5 * n_total;
            q.beta = rate == 1.0 ? target.beta : 1.0 / ((1.0 - rate) / q.beta + rate / target.beta);
        }
    }
    for (int k = 0; k <= L; ++k) {
        WeightLayer& wl = g.layers[k];
        for (int d = 0; d < wl.rows(); ++d) {
            GaussianNatural nat = weight_target(g, k, d, local, Y, scale);
            if (rate != 1.0) {
                const SpdInverse old = spd_inverse(wl.cov[d], "weight covariance");
                nat.precision = (1.0 - rate) * old.inverse + rate * nat.precision;
                nat.shift = (1.0 - rate) * (old.inverse * wl.mean[d]) + rate * nat.shift;
            }
            set_weight_row(wl, d, nat);
        }
    }
}

double noisy_elbo(const GlobalVariational& g, const LocalVariational& local, const Eigen::MatrixXd& Y, double scale) {
    const auto lm = layer_moments(g);
    double s = 0.0;
    for (std::size_t n = 0; n < local.points.size(); ++n) {
        const Eigen::VectorXd y = Y.row(static_cast<Eigen::Index>(n)).transpose();
        s += elbo_local_terms(lm, local.points[n], &y, g.hyper.temperature);
    }
    return elbo_global_terms(g) + scale * s;
}

void fit_local_batch(const GlobalVariational& g, LocalVariational& local, const Eigen::MatrixXd& X,
                     const Eigen::MatrixXd& Y, double tol, int max_iter) {
    const auto lm = layer_moments(g);
    const double T = g.hyper.temperature;
    const int n = static_cast<int>(local.points.size());
    parallel_for(n, [&](int i) {
        const Eigen::VectorXd x = X.row(i).transpose();
        const Eigen::VectorXd y = Y.row(i).transpose();
        LocalPoint& p = local.points[i];
        double prev = elbo_local_terms(lm, p, &y, T);
        for (int it = 0; it < max_iter; ++it) {
            local_pass(p, lm, x, &y, T);
            const double cur = elbo_local_terms(lm, p, &y, T);
            const bool done = std::abs(cur - prev) <= tol * std::abs(prev);
            prev = cur;
            if (done) break;
        }
    });
}

SviStepResult svi_step(SviState& state, const NetworkConfig& config, const Dataset& data, const SviOptions& options,
                       Rng& rng) {
    if (!(options.forgetting_rate > 0.5 && options.forgetting_rate <= 1.0))
        throw std::invalid_argument("forgetting rate must lie in (0.5, 1]");
    const int N = data.size();
    SviStepResult out;
    out.batch = sample_batch(N, std::min(options.batch_size, N), rng);
    const int S = static_cast<int>(out.batch.size());
    Eigen::MatrixXd Xb(S, data.X.cols());
    Eigen::MatrixXd Yb(S, data.Y.cols());
    for (int i = 0; i < S; ++i) {
        Xb.row(i) = data.X.row(out.batch[i]);
        Yb.row(i) = data.Y.row(out.batch[i]);
    }
    const bool first = state.global.layers.empty();
    if (first) {
        auto init = initialize(config, Xb, Yb, options.init, rng);
        state.global = std::move(init.first);
        out.local = std::move(init.second);
    } else {
        out.local.points.resize(S);
        for (int i = 0; i < S; ++i) out.local.points[i] = forward_init(state.global, Xb.row(i).transpose());
    }

    GlobalVariational& g = state.global;
    out.rate = learning_rate(state.t, options.forgetting_rate);
    const double scale = static_cast<double>(N) / S;
    for (int k = 0; k <= g.depth(); ++k) {
        update_tau(g, k);
        update_psi(g, k);
    }
    fit_local_batch(g, out.local, Xb, Yb, options.local_tol, options.local_max);
    svi_global_update(g, out.local, Yb, scale, out.rate, N, first);
    em_update_global(g);

    out.noisy_elbo = noisy_elbo(g, out.local, Yb, scale);
    if (!std::isfinite(out.noisy_elbo)) throw NumericalError("noisy ELBO is not finite");
    state.noisy_elbo.push_back(out.noisy_elbo);
    ++state.t;
    return out;
}

bool window_converged(const std::vector<double>& trace, int window, double tol, int hits) {
    const int n = static_cast<int>(trace.size());
    if (n < 2 * window + hits - 1) return false;
    for (int h = 0; h < hits; ++h) {
        const int end = n - h;
        double cur = 0.0, prev = 0.0;
        for (int i = end - window; i < end; ++i) cur += trace[i];
        for (int i = end - 2 * window; i < end - window; ++i) prev += trace[i];
        if (!(std::abs(cur - prev) < tol * std::abs(prev))) return false;
    }
    return true;
}

FitResult fit_svi(const NetworkConfig& config, const Dataset& data, const SviOptions& options, Rng& rng) {
    const auto start = std::chrono::steady_clock::now();
    config.validate();
    SviState state;
    FitResult res;
    for (int it = 0; it < options.max_iters; ++it) {
        svi_step(state, config, data, options, rng);
        if (window_converged(state.noisy_elbo, options.window, options.tol, options.consecutive_hits)) {
            res.converged = true;
            break;
        }
    }
    res.config = config;
    res.seed = config.seed;
    res.global = std::move(state.global);
    res.elbo_trace = std::move(state.noisy_elbo);
    res.norm = data.norm;
    res.feature_names = data.feature_names;
    res.target_names = data.target_names;
    res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

}  // namespace vbnn
