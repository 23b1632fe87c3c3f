#include "vbnn/cavi.hpp"

#include "vbnn/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

namespace vbnn {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double sq(double x) { return x * x; }

double clamp_rho(double r) { return std::clamp(r, 1e-12, 1.0 - 1e-12); }

Eigen::VectorXd y_row(const Eigen::MatrixXd& Y, int n) { return Y.row(n).transpose(); }

// E[a_{k+1,d} (1, a_k)].
Eigen::VectorXd unit_cross(const ActivationMoments& m, int k, int d) {
    Eigen::VectorXd v(m.mean[k].size() + 1);
    v(0) = m.mean[k + 1](d);
    v.tail(m.mean[k].size()) = m.cross[k + 1].row(d).transpose();
    return v;
}

}  // namespace

LayerMoments layer_moments(const WeightLayer& wl) {
    LayerMoments lm;
    const int R = wl.rows();
    const int I = wl.inputs();
    lm.rows.resize(R);
    lm.weight_mean.resize(R, I);
    lm.bias_mean.resize(R);
    lm.inv_noise.resize(R);
    for (int d = 0; d < R; ++d) {
        RowMoments& r = lm.rows[d];
        r.mean = wl.mean[d];
        r.second = wl.cov[d] + wl.mean[d] * wl.mean[d].transpose();
        r.inv_noise = wl.noise[d].mean_inverse();
        r.log_noise = wl.noise[d].mean_log();
        lm.weight_mean.row(d) = wl.mean[d].tail(I).transpose();
        lm.bias_mean(d) = wl.mean[d](0);
        lm.inv_noise(d) = r.inv_noise;
    }
    return lm;
}

std::vector<LayerMoments> layer_moments(const GlobalVariational& g) {
    std::vector<LayerMoments> out;
    out.reserve(g.layers.size());
    for (const auto& wl : g.layers) out.push_back(layer_moments(wl));
    return out;
}

// ---------------------------------------------------------------------------
// Shrinkage factors

void update_tau(GlobalVariational& g, int k) {
    WeightLayer& wl = g.layers[k];
    const GigParams& prior = g.hyper.glob;
    double s = sq(prior.delta);
    for (int d = 0; d < wl.rows(); ++d)
        for (int j = 0; j < wl.inputs(); ++j) {
            const double ew2 = sq(wl.mean[d](j + 1)) + wl.cov[d](j + 1, j + 1);
            s += gig_moments(wl.psi(d, j)).inv_mean * ew2;
        }
    wl.tau = {prior.nu - 0.5 * wl.rows() * wl.inputs(), std::sqrt(s), prior.lam};
    validate(wl.tau);
}

void update_psi(GlobalVariational& g, int k) {
    WeightLayer& wl = g.layers[k];
    const GigParams& prior = g.hyper.loc[k];
    const double inv_tau = gig_moments(wl.tau).inv_mean;
    wl.psi_nu = prior.nu - 0.5;
    wl.psi_lam = prior.lam;
    for (int d = 0; d < wl.rows(); ++d)
        for (int j = 0; j < wl.inputs(); ++j) {
            const double ew2 = sq(wl.mean[d](j + 1)) + wl.cov[d](j + 1, j + 1);
            wl.psi_delta(d, j) = std::sqrt(inv_tau * ew2 + sq(prior.delta));
        }
}

// ---------------------------------------------------------------------------
// Noise variances

InvGammaParams eta_target(const GlobalVariational& g, int k, int d, const LocalVariational& local,
                          const Eigen::MatrixXd& Y, double scale) {
    const WeightLayer& wl = g.layers[k];
    const bool output = k == g.depth();
    const InvGammaParams& prior = output ? g.hyper.noise_out : g.hyper.noise_hidden;
    const Eigen::VectorXd& m = wl.mean[d];
    const Eigen::MatrixXd sec = wl.cov[d] + m * m.transpose();
    double ss = 0.0;
    const int N = static_cast<int>(local.points.size());
    for (int n = 0; n < N; ++n) {
        const ActivationMoments& mom = local.points[n].moments;
        const Eigen::VectorXd ea = augmented_mean(mom, k);
        const double ez2 = trace_product(sec, augmented_second(mom, k));
        if (output) {
            const double y = Y(n, d);
            ss += y * y - 2.0 * y * m.dot(ea) + ez2;
        } else {
            const double rho = local.points[n].layers[k].rho(d);
            const double ea2 = mom.second[k + 1](d, d);
            ss += ea2 - 2.0 * rho * m.dot(unit_cross(mom, k, d)) + rho * ez2;
        }
    }
    return {prior.alpha + 0.5 * scale * N, prior.beta + 0.5 * scale * ss};
}

void update_eta(GlobalVariational& g, int k, const LocalVariational& local, const Eigen::MatrixXd& Y) {
    for (int d = 0; d < g.layers[k].rows(); ++d) g.layers[k].noise[d] = eta_target(g, k, d, local, Y, 1.0);
}

// ---------------------------------------------------------------------------
// Weights

GaussianNatural weight_target(const GlobalVariational& g, int k, int d, const LocalVariational& local,
                              const Eigen::MatrixXd& Y, double scale) {
    const WeightLayer& wl = g.layers[k];
    const bool output = k == g.depth();
    const double T = g.hyper.temperature;
    const int K = wl.inputs() + 1;
    const double inv_tau = gig_moments(wl.tau).inv_mean;
    const double inv_noise = wl.noise[d].mean_inverse();

    GaussianNatural nat;
    nat.precision = Eigen::MatrixXd::Zero(K, K);
    nat.shift = Eigen::VectorXd::Zero(K);
    const int N = static_cast<int>(local.points.size());
    for (int n = 0; n < N; ++n) {
        const LocalPoint& p = local.points[n];
        const Eigen::VectorXd ea = augmented_mean(p.moments, k);
        const Eigen::MatrixXd aa = augmented_second(p.moments, k);
        if (output) {
            nat.precision += inv_noise * aa;
            nat.shift += inv_noise * Y(n, d) * ea;
        } else {
            const double rho = p.layers[k].rho(d);
            const double eomega = pg_mean(1.0, p.layers[k].pg_tilt(d));
            nat.precision += (eomega / (T * T) + inv_noise * rho) * aa;
            nat.shift += inv_noise * rho * unit_cross(p.moments, k, d) + (rho - 0.5) / T * ea;
        }
    }
    nat.precision *= scale;
    nat.shift *= scale;
    nat.precision(0, 0) += 1.0 / g.hyper.bias_var;
    for (int j = 0; j < wl.inputs(); ++j)
        nat.precision(j + 1, j + 1) += inv_tau * gig_moments(wl.psi(d, j)).inv_mean;
    return nat;
}

void set_weight_row(WeightLayer& wl, int d, const GaussianNatural& nat) {
    SpdInverse inv = spd_inverse(nat.precision, "weight precision");
    wl.mean[d] = inv.inverse * nat.shift;
    wl.cov[d] = std::move(inv.inverse);
}

void update_weights(GlobalVariational& g, int k, const LocalVariational& local, const Eigen::MatrixXd& Y) {
    for (int d = 0; d < g.layers[k].rows(); ++d) {
        const GaussianNatural nat = weight_target(g, k, d, local, Y, 1.0);
        set_weight_row(g.layers[k], d, nat);
    }
}

// ---------------------------------------------------------------------------
// EM on the global hyperparameter

double em_delta_inverse_gamma(double nu_glob, const std::vector<GigParams>& tau_post) {
    double s = 0.0;
    for (const auto& t : tau_post) s += gig_moments(t).inv_mean;
    return std::sqrt(-2.0 * nu_glob * static_cast<double>(tau_post.size()) / s);
}

double em_lambda_gamma(double nu_glob, const std::vector<GigParams>& tau_post) {
    double s = 0.0;
    for (const auto& t : tau_post) s += gig_moments(t).mean;
    return std::sqrt(2.0 * nu_glob * static_cast<double>(tau_post.size()) / s);
}

double em_lambda_inverse_gaussian(double delta_glob, const std::vector<GigParams>& tau_post) {
    double s = 0.0;
    for (const auto& t : tau_post) s += gig_moments(t).mean;
    return static_cast<double>(tau_post.size()) * delta_glob / s;
}

void em_update_global(GlobalVariational& g) {
    if (!g.hyper.em_enabled) return;
    std::vector<GigParams> taus;
    for (const auto& wl : g.layers) taus.push_back(wl.tau);
    GigParams& h = g.hyper.glob;
    switch (g.hyper.family) {
        case PriorFamily::InverseGamma: h.delta = em_delta_inverse_gamma(h.nu, taus); break;
        case PriorFamily::Gamma: h.lam = em_lambda_gamma(h.nu, taus); break;
        case PriorFamily::InverseGaussian: h.lam = em_lambda_inverse_gaussian(h.delta, taus); break;
        case PriorFamily::GeneralGig: break;
    }
    if (!is_valid(h)) throw NumericalError("EM produced invalid global hyperparameters");
}

// ---------------------------------------------------------------------------
// Local factors

void update_omega(LocalPoint& p, const std::vector<LayerMoments>& lm, double T, int k) {
    const Eigen::MatrixXd aa = augmented_second(p.moments, k);
    LocalLayer& f = p.layers[k];
    for (int d = 0; d < static_cast<int>(lm[k].rows.size()); ++d)
        f.pg_tilt(d) = std::sqrt(std::max(0.0, trace_product(lm[k].rows[d].second, aa))) / T;
}

void update_gamma(LocalPoint& p, const std::vector<LayerMoments>& lm, double T, int k) {
    const Eigen::VectorXd ea = augmented_mean(p.moments, k);
    const Eigen::MatrixXd aa = augmented_second(p.moments, k);
    LocalLayer& f = p.layers[k];
    for (int d = 0; d < static_cast<int>(lm[k].rows.size()); ++d) {
        const RowMoments& r = lm[k].rows[d];
        const double logit = -0.5 * r.inv_noise * trace_product(r.second, aa) +
                             r.inv_noise * r.mean.dot(unit_cross(p.moments, k, d)) + r.mean.dot(ea) / T;
        f.rho(d) = clamp_rho(sigmoid(logit));
    }
}

void update_activations(LocalPoint& p, const std::vector<LayerMoments>& lm, const Eigen::VectorXd& x,
                        const Eigen::VectorXd* y, double T) {
    const int L = static_cast<int>(p.layers.size());
    Eigen::MatrixXd prec_next;
    for (int j = L - 1; j >= 0; --j) {
        const LayerMoments& cur = lm[j];
        LocalLayer& f = p.layers[j];
        const int D = static_cast<int>(cur.rows.size());
        const Eigen::VectorXd gate = cur.inv_noise.cwiseProduct(f.rho);
        Eigen::MatrixXd P = cur.inv_noise.asDiagonal();
        Eigen::VectorXd h = gate.cwiseProduct(cur.bias_mean);
        const LayerMoments& up = lm[j + 1];
        if (j == L - 1) {
            if (y) {
                for (int d = 0; d < static_cast<int>(up.rows.size()); ++d) {
                    const RowMoments& r = up.rows[d];
                    P += r.inv_noise * r.second.bottomRightCorner(D, D);
                    h += r.inv_noise * ((*y)(d) * r.mean.tail(D) - r.second.block(1, 0, D, 1));
                }
            }
        } else {
            const LocalLayer& nx = p.layers[j + 1];
            P -= nx.gain.transpose() * prec_next * nx.gain;
            h += nx.gain.transpose() * (prec_next * nx.shift);
            for (int d = 0; d < static_cast<int>(up.rows.size()); ++d) {
                const RowMoments& r = up.rows[d];
                const double c = r.inv_noise * nx.rho(d) + pg_mean(1.0, nx.pg_tilt(d)) / (T * T);
                P += c * r.second.bottomRightCorner(D, D);
                h += (nx.rho(d) - 0.5) / T * r.mean.tail(D) - c * r.second.block(1, 0, D, 1);
            }
        }
        symmetrize(P);
        SpdInverse inv = spd_inverse(P, "activation precision");
        f.shift = inv.inverse * h;
        f.gain = inv.inverse * gate.asDiagonal() * cur.weight_mean;
        f.cov = std::move(inv.inverse);
        f.log_det_cov = -inv.log_det;
        prec_next = std::move(P);
    }
    refresh_moments(p, x);
}

void local_pass(LocalPoint& p, const std::vector<LayerMoments>& lm, const Eigen::VectorXd& x,
                const Eigen::VectorXd* y, double T) {
    const int L = static_cast<int>(p.layers.size());
    for (int k = 0; k < L; ++k) update_omega(p, lm, T, k);
    update_activations(p, lm, x, y, T);
    for (int k = 0; k < L; ++k) update_gamma(p, lm, T, k);
}

// ---------------------------------------------------------------------------
// ELBO

double elbo_global_terms(const GlobalVariational& g) {
    double out = 0.0;
    const double s0 = g.hyper.bias_var;
    const int L = g.depth();
    for (int k = 0; k <= L; ++k) {
        const WeightLayer& wl = g.layers[k];
        const InvGammaParams& noise_prior = k == L ? g.hyper.noise_out : g.hyper.noise_hidden;
        const GigParams& loc = g.hyper.loc[k];
        const GigMoments tau_m = gig_moments(wl.tau);
        const double tau_log = gig_mean_log(wl.tau);
        out += gig_expected_log_density(g.hyper.glob, wl.tau) + gig_entropy(wl.tau);
        const int K = wl.inputs() + 1;
        for (int d = 0; d < wl.rows(); ++d) {
            const Eigen::VectorXd& m = wl.mean[d];
            const Eigen::MatrixXd& B = wl.cov[d];
            out += -0.5 * std::log(2.0 * std::numbers::pi * s0) - 0.5 * (sq(m(0)) + B(0, 0)) / s0;
            for (int j = 0; j < wl.inputs(); ++j) {
                const GigParams psi = wl.psi(d, j);
                const double ew2 = sq(m(j + 1)) + B(j + 1, j + 1);
                out += -0.5 * kLog2Pi - 0.5 * tau_log - 0.5 * gig_mean_log(psi) -
                       0.5 * tau_m.inv_mean * gig_moments(psi).inv_mean * ew2;
                out += gig_expected_log_density(loc, psi) + gig_entropy(psi);
            }
            out += 0.5 * K * (1.0 + kLog2Pi) + 0.5 * log_det_spd(B, "weight covariance");
            out += inv_gamma_expected_log_density(noise_prior, wl.noise[d]) + inv_gamma_entropy(wl.noise[d]);
        }
    }
    return out;
}

double elbo_local_terms(const std::vector<LayerMoments>& lm, const LocalPoint& p, const Eigen::VectorXd* y, double T) {
    const int L = static_cast<int>(p.layers.size());
    const ActivationMoments& mom = p.moments;
    double out = 0.0;
    for (int k = 0; k < L; ++k) {
        const LocalLayer& f = p.layers[k];
        const Eigen::VectorXd ea = augmented_mean(mom, k);
        const Eigen::MatrixXd aa = augmented_second(mom, k);
        const int D = static_cast<int>(lm[k].rows.size());
        for (int d = 0; d < D; ++d) {
            const RowMoments& r = lm[k].rows[d];
            const double rho = f.rho(d);
            const double ez = r.mean.dot(ea);
            const double ez2 = trace_product(r.second, aa);
            const double eaz = r.mean.dot(unit_cross(mom, k, d));
            const double e_sq = mom.second[k + 1](d, d) - 2.0 * rho * eaz + rho * ez2;
            out += -0.5 * kLog2Pi - 0.5 * r.log_noise - 0.5 * r.inv_noise * e_sq;

            const double A = f.pg_tilt(d);
            const double eomega = pg_mean(1.0, A);
            out += -std::log(2.0) + (rho - 0.5) * ez / T - eomega * ez2 / (2.0 * T * T) + 0.5 * A * A * eomega -
                   log_cosh(0.5 * A);
            out -= rho * std::log(rho) + (1.0 - rho) * std::log1p(-rho);
        }
        out += 0.5 * D * (1.0 + kLog2Pi) + 0.5 * f.log_det_cov;
    }
    if (y) {
        const Eigen::VectorXd ea = augmented_mean(mom, L);
        const Eigen::MatrixXd aa = augmented_second(mom, L);
        for (int d = 0; d < static_cast<int>(lm[L].rows.size()); ++d) {
            const RowMoments& r = lm[L].rows[d];
            const double yd = (*y)(d);
            const double e_sq = yd * yd - 2.0 * yd * r.mean.dot(ea) + trace_product(r.second, aa);
            out += -0.5 * kLog2Pi - 0.5 * r.log_noise - 0.5 * r.inv_noise * e_sq;
        }
    }
    return out;
}

double elbo(const GlobalVariational& g, const LocalVariational& local, const Eigen::MatrixXd& Y) {
    const auto lm = layer_moments(g);
    const int N = static_cast<int>(local.points.size());
    std::vector<double> terms(N);
    parallel_for(N, [&](int n) {
        const Eigen::VectorXd y = y_row(Y, n);
        terms[n] = elbo_local_terms(lm, local.points[n], &y, g.hyper.temperature);
    });
    double out = elbo_global_terms(g);
    for (double t : terms) out += t;
    return out;
}

// ---------------------------------------------------------------------------
// Driver

void cavi_sweep(GlobalVariational& g, LocalVariational& local, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
    const int L = g.depth();
    const int N = static_cast<int>(local.points.size());
    const double T = g.hyper.temperature;

    for (int k = 0; k <= L; ++k) {
        update_tau(g, k);
        update_psi(g, k);
        update_eta(g, k, local, Y);
        if (k < L) {
            const auto lm = layer_moments(g);
            parallel_for(N, [&](int n) { update_omega(local.points[n], lm, T, k); });
        }
    }

    {
        const auto lm = layer_moments(g);
        parallel_for(N, [&](int n) {
            const Eigen::VectorXd y = y_row(Y, n);
            update_activations(local.points[n], lm, X.row(n).transpose(), &y, T);
        });
    }

    for (int k = 0; k < L; ++k) {
        update_weights(g, k, local, Y);
        const auto lm = layer_moments(g);
        parallel_for(N, [&](int n) { update_gamma(local.points[n], lm, T, k); });
    }
    update_weights(g, L, local, Y);
    em_update_global(g);
}

bool elbo_converged(const std::vector<double>& trace, double tol, int hits) {
    if (static_cast<int>(trace.size()) < hits + 1) return false;
    for (std::size_t i = trace.size() - hits; i < trace.size(); ++i) {
        const double rel = std::abs(trace[i] - trace[i - 1]) / std::max(std::abs(trace[i - 1]), 1e-300);
        if (!(rel < tol)) return false;
    }
    return true;
}

FitResult fit_cavi(const NetworkConfig& config, const Dataset& data, const CaviOptions& options, Rng& rng) {
    const auto start = std::chrono::steady_clock::now();
    auto [g, local] = initialize(config, data.X, data.Y, options.init, rng);

    FitResult res;
    res.config = config;
    res.seed = config.seed;
    res.norm = data.norm;
    res.feature_names = data.feature_names;
    res.target_names = data.target_names;
    res.elbo_trace.push_back(elbo(g, local, data.Y));
    for (int s = 0; s < options.max_sweeps; ++s) {
        cavi_sweep(g, local, data.X, data.Y);
        const double e = elbo(g, local, data.Y);
        if (!std::isfinite(e)) throw NumericalError("ELBO is not finite");
        res.elbo_trace.push_back(e);
        if (elbo_converged(res.elbo_trace, options.elbo_tol, options.consecutive_hits)) {
            res.converged = true;
            break;
        }
    }
    res.global = std::move(g);
    res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

}  // namespace vbnn
