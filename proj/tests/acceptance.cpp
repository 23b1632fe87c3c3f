// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include "oracles.hpp"
#include "vbnn/cavi.hpp"
#include "vbnn/data_io.hpp"
#include "vbnn/ensemble.hpp"
#include "vbnn/predictor.hpp"
#include "vbnn/sparsifier.hpp"
#include "vbnn/svi.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace vbnn;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Welford {
    long n = 0;
    double mean = 0.0, m2 = 0.0;
    void add(double x) {
        ++n;
        const double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    double var() const { return m2 / (n - 1); }
    double se() const { return std::sqrt(var() / n); }
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Eigen::MatrixXd gaussian(int r, int c, Rng& rng) {
    std::normal_distribution<double> n01;
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = n01(rng);
    return m;
}

NetworkConfig config_for(std::vector<int> dims, PriorFamily f = PriorFamily::InverseGamma) {
    NetworkConfig c;
    c.dims = std::move(dims);
    c.prior_family = f;
    c.glob_prior = c.loc_prior_base = default_prior(f);
    return c;
}

Dataset random_problem(int N, int D0, int Dy, Rng& rng) {
    const Eigen::MatrixXd X = gaussian(N, D0, rng);
    Eigen::MatrixXd Y = gaussian(N, Dy, rng) * 0.3;
    for (int n = 0; n < N; ++n) Y.row(n).array() += std::sin(2.0 * X(n, 0));
    return make_dataset(X, Y);
}

// Largest relative decrease between consecutive ELBO values.
double worst_drop(const std::vector<double>& trace) {
    double worst = 0.0;
    for (std::size_t i = 1; i < trace.size(); ++i)
        worst = std::max(worst, (trace[i - 1] - trace[i]) / std::abs(trace[i - 1]));
    return worst;
}

// --- 1 ---------------------------------------------------------------------

Outcome distribution_kernels() {
    Rng rng(101);
    std::uniform_real_distribution<double> unu(-8.0, 8.0), ul(std::log(0.05), std::log(20.0)), uc(-6.0, 6.0);
    double worst = 0.0;
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
        GigParams p{unu(rng), std::exp(ul(rng)), std::exp(ul(rng))};
        switch (i % 4) {
            case 0: p = {-std::abs(p.nu) - 1.05, p.delta, 0.0}; break;
            case 1: p = {std::abs(p.nu) + 1.05, 0.0, p.lam}; break;
            case 2: p.nu = -0.5; break;
            default: break;
        }
        const auto ref = oracle::gig(p.nu, p.delta, p.lam);
        const GigMoments m = gig_moments(p);
        worst = std::max({worst, std::abs(m.mean - ref.mean) / ref.mean, std::abs(m.inv_mean - ref.inv_mean) / ref.inv_mean});
        if (p.delta > 0 && p.lam > 0) {
            const GigMoments b = gig_moments_bessel(p);
            worst = std::max({worst, std::abs(b.mean - ref.mean) / ref.mean, std::abs(b.inv_mean - ref.inv_mean) / ref.inv_mean});
        }
        const double c = std::copysign(std::pow(10.0, uc(rng)), uc(rng));
        const double pg_ref = oracle::pg_mean(1.0, c);
        worst = std::max(worst, std::abs(pg_mean(1.0, c) - pg_ref) / pg_ref);
        ++checked;
    }
    return {worst <= 1e-8, fmt("%d draws, max relative error %.2e (limit 1e-8)", checked, worst)};
}

// --- 2 ---------------------------------------------------------------------

Outcome cavi_monotone() {
    Rng rng(202);
    double worst = 0.0;
    int sweeps = 0;
    const PriorFamily families[] = {PriorFamily::InverseGamma, PriorFamily::Gamma, PriorFamily::InverseGaussian};
    for (int i = 0; i < 20; ++i) {
        const int N = std::uniform_int_distribution<int>(10, 50)(rng);
        const int D0 = std::uniform_int_distribution<int>(1, 3)(rng);
        const int L = std::uniform_int_distribution<int>(1, 2)(rng);
        std::vector<int> dims{D0};
        for (int l = 0; l < L; ++l) dims.push_back(std::uniform_int_distribution<int>(1, 5)(rng));
        dims.push_back(1);
        const Dataset data = random_problem(N, D0, 1, rng);
        NetworkConfig c = config_for(dims, families[i % 3]);
        c.seed = 300 + i;
        CaviOptions o;
        o.init = i % 2 == 0 ? InitScheme::Laplace : InitScheme::SpikeSlab;
        Rng frng(c.seed);
        const FitResult fit = fit_cavi(c, data, o, frng);
        worst = std::max(worst, worst_drop(fit.elbo_trace));
        sweeps += static_cast<int>(fit.elbo_trace.size()) - 1;
    }
    Rng drng(7);
    const Dataset toy = simulate_toy(300, drng);
    Rng frng(8);
    const FitResult fit = fit_cavi(config_for({2, 20, 1}), toy, CaviOptions{}, frng);
    worst = std::max(worst, worst_drop(fit.elbo_trace));
    sweeps += static_cast<int>(fit.elbo_trace.size()) - 1;
    return {worst <= 1e-8, fmt("%d sweeps over 21 problems, worst relative drop %.2e (limit 1e-8)", sweeps, worst)};
}

// --- 3 ---------------------------------------------------------------------

Outcome ridge_conjugacy() {
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        Rng rng(400 + trial);
        const int N = 6 + trial, D = 1 + trial % 4;
        const Dataset data = random_problem(N, 2, 1, rng);
        auto [g, local] = initialize(config_for({2, D, 1}), data.X, data.Y, InitScheme::Laplace, rng);
        for (int s = 0; s < 3; ++s) cavi_sweep(g, local, data.X, data.Y);
        // freeze the activations at deterministic values
        Eigen::MatrixXd A(N, D + 1);
        for (int n = 0; n < N; ++n) {
            ActivationMoments& m = local.points[n].moments;
            m.mean[1] = gaussian(D, 1, rng);
            m.second[1] = m.mean[1] * m.mean[1].transpose();
            A(n, 0) = 1.0;
            A.row(n).tail(D) = m.mean[1].transpose();
        }
        const WeightLayer& wl = g.layers[1];
        const double inv_tau = oracle::gig(wl.tau.nu, wl.tau.delta, wl.tau.lam).inv_mean;
        Eigen::VectorXd prior_prec(D + 1);
        prior_prec(0) = 1.0 / g.hyper.bias_var;
        for (int j = 0; j < D; ++j)
            prior_prec(j + 1) = inv_tau * oracle::gig(wl.psi_nu, wl.psi_delta(0, j), wl.psi_lam).inv_mean;
        const double e = wl.noise[0].alpha / wl.noise[0].beta;
        const Eigen::MatrixXd prec = Eigen::MatrixXd(prior_prec.asDiagonal()) + e * A.transpose() * A;
        const Eigen::MatrixXd cov = prec.fullPivLu().inverse();
        const Eigen::VectorXd mean = cov * (e * A.transpose() * data.Y.col(0));
        update_weights(g, 1, local, data.Y);
        worst = std::max({worst, (g.layers[1].mean[0] - mean).cwiseAbs().maxCoeff(),
                          (g.layers[1].cov[0] - cov).cwiseAbs().maxCoeff()});
    }
    return {worst <= 1e-9, fmt("10 problems, max abs diff %.2e (limit 1e-9)", worst)};
}

// --- 4 ---------------------------------------------------------------------

// log density of GIG(nu, delta, lam) with its normalizer from quadrature.
struct GigLogPdf {
    GigParams p;
    double log_norm;
    explicit GigLogPdf(const GigParams& q) : p(q), log_norm(oracle::gig(q.nu, q.delta, q.lam).log_norm) {}
    double operator()(double x) const {
        return (p.nu - 1.0) * std::log(x) - 0.5 * (p.delta * p.delta / x + p.lam * p.lam * x) + log_norm;
    }
};

double inv_gamma_log_pdf(const InvGammaParams& p, double x) {
    return p.alpha * std::log(p.beta) - std::lgamma(p.alpha) - (p.alpha + 1.0) * std::log(x) - p.beta / x;
}

double normal_log_pdf(double x, double mean, double var) {
    return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * (x - mean) * (x - mean) / var;
}

// log N(x | m, S) and a draw from it.
struct Mvn {
    Eigen::VectorXd m;
    Eigen::MatrixXd chol;
    double log_det;
    Mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) : m(mean) {
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        chol = llt.matrixL();
        log_det = 2.0 * chol.diagonal().array().log().sum();
    }
    Eigen::VectorXd draw(Rng& rng) const {
        std::normal_distribution<double> n01;
        Eigen::VectorXd z(m.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = n01(rng);
        return m + chol * z;
    }
    double log_pdf(const Eigen::VectorXd& x) const {
        const Eigen::VectorXd u = chol.triangularView<Eigen::Lower>().solve(x - m);
        return -0.5 * m.size() * std::log(2.0 * std::numbers::pi) - 0.5 * log_det - 0.5 * u.squaredNorm();
    }
};

// Inverse gamma draw: scale / Gamma(shape, 1).
double draw_inverse_gamma(double shape, double scale, Rng& rng) {
    return scale / std::gamma_distribution<double>(shape, 1.0)(rng);
}

Outcome micro_elbo() {
    // one hidden unit, two observations, inverse-gamma shrinkage
    Eigen::MatrixXd X(2, 1), Y(2, 1);
    X << -0.8, 1.3;
    Y << 0.4, 1.9;
    const Dataset data = make_dataset(X, Y);
    NetworkConfig c = config_for({1, 1, 1});
    Rng init_rng(4);
    auto [g, local] = initialize(c, data.X, data.Y, InitScheme::Laplace, init_rng);
    for (int s = 0; s < 4; ++s) cavi_sweep(g, local, data.X, data.Y);
    const double closed = elbo(g, local, data.Y);

    const double T = g.hyper.temperature, s0 = g.hyper.bias_var;
    struct LayerQ {
        GigLogPdf tau_prior, tau_q, psi_prior, psi_q;
        Mvn w;
        InvGammaParams noise_prior, noise_q;
    };
    std::vector<LayerQ> lq;
    for (int k = 0; k < 2; ++k) {
        const WeightLayer& wl = g.layers[k];
        if (wl.tau.lam != 0.0 || wl.psi_lam != 0.0) return {false, "expected inverse-gamma factors"};
        lq.push_back({GigLogPdf(g.hyper.glob), GigLogPdf(wl.tau), GigLogPdf(g.hyper.loc[k]), GigLogPdf(wl.psi(0, 0)),
                      Mvn(wl.mean[0], wl.cov[0]), k == 1 ? g.hyper.noise_out : g.hyper.noise_hidden, wl.noise[0]});
    }
    struct PointQ {
        double x, y, rho, A, eomega;
        Mvn a;
    };
    std::vector<PointQ> pq;
    for (int n = 0; n < 2; ++n) {
        const LocalLayer& f = local.points[n].layers[0];
        const double x = data.X(n, 0);
        pq.push_back({x, data.Y(n, 0), f.rho(0), f.pg_tilt(0), oracle::pg_mean(1.0, f.pg_tilt(0)),
                      Mvn(f.shift + f.gain * data.X.row(n).transpose(), f.cov)});
    }

    Rng rng(44);
    std::uniform_real_distribution<double> u01;
    Welford acc;
    const long draws = 1000000;
    for (long j = 0; j < draws; ++j) {
        double lp = 0.0, lqv = 0.0;
        Eigen::Vector2d w[2];
        double eta[2];
        for (int k = 0; k < 2; ++k) {
            const LayerQ& L = lq[k];
            const double tau = draw_inverse_gamma(-L.tau_q.p.nu, 0.5 * L.tau_q.p.delta * L.tau_q.p.delta, rng);
            const double psi = draw_inverse_gamma(-L.psi_q.p.nu, 0.5 * L.psi_q.p.delta * L.psi_q.p.delta, rng);
            w[k] = L.w.draw(rng);
            eta[k] = draw_inverse_gamma(L.noise_q.alpha, L.noise_q.beta, rng);
            lp += L.tau_prior(tau) + L.psi_prior(psi) + normal_log_pdf(w[k](0), 0.0, s0) +
                  normal_log_pdf(w[k](1), 0.0, tau * psi) + inv_gamma_log_pdf(L.noise_prior, eta[k]);
            lqv += L.tau_q(tau) + L.psi_q(psi) + L.w.log_pdf(w[k]) + inv_gamma_log_pdf(L.noise_q, eta[k]);
        }
        for (const PointQ& P : pq) {
            const double gamma = u01(rng) < P.rho ? 1.0 : 0.0;
            const double a = P.a.draw(rng)(0);
            const double z = w[0](0) + w[0](1) * P.x;
            lp += normal_log_pdf(a, gamma * z, eta[0]);
            // gate prior with omega integrated against q(omega) = PG(1, A)
            lp += -std::log(2.0) + (gamma - 0.5) * z / T - 0.5 * P.eomega * (z * z / (T * T) - P.A * P.A) -
                  std::log(std::cosh(0.5 * P.A));
            lp += normal_log_pdf(P.y, w[1](0) + w[1](1) * a, eta[1]);
            lqv += gamma > 0 ? std::log(P.rho) : std::log1p(-P.rho);
            lqv += P.a.log_pdf(Eigen::VectorXd::Constant(1, a));
        }
        acc.add(lp - lqv);
    }
    const double z = std::abs(acc.mean - closed) / acc.se();
    return {z <= 4.0, fmt("closed form %.6f, MC %.6f +- %.6f (%.2f SE, limit 4)", closed, acc.mean, acc.se(), z)};
}

// --- 5 ---------------------------------------------------------------------

double max_abs_diff(const GlobalVariational& a, const GlobalVariational& b) {
    double m = std::max(std::abs(a.hyper.glob.delta - b.hyper.glob.delta), std::abs(a.hyper.glob.lam - b.hyper.glob.lam));
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
        const WeightLayer& x = a.layers[k];
        const WeightLayer& y = b.layers[k];
        m = std::max({m, std::abs(x.tau.delta - y.tau.delta), (x.psi_delta - y.psi_delta).cwiseAbs().maxCoeff()});
        for (int d = 0; d < x.rows(); ++d)
            m = std::max({m, (x.mean[d] - y.mean[d]).cwiseAbs().maxCoeff(), (x.cov[d] - y.cov[d]).cwiseAbs().maxCoeff(),
                          std::abs(x.noise[d].alpha - y.noise[d].alpha), std::abs(x.noise[d].beta - y.noise[d].beta)});
    }
    return m;
}

Outcome svi_equals_cavi() {
    Rng drng(2);
    const Dataset data = simulate_toy(25, drng);
    double worst_param = 0.0, worst_elbo = 0.0;
    for (auto f : {PriorFamily::InverseGamma, PriorFamily::Gamma, PriorFamily::InverseGaussian}) {
        const NetworkConfig c = config_for({2, 3, 2, 1}, f);
        Rng rng(3);
        auto [g0, local0] = initialize(c, data.X, data.Y, InitScheme::Laplace, rng);
        for (int s = 0; s < 3; ++s) cavi_sweep(g0, local0, data.X, data.Y);
        SviState state;
        state.global = g0;
        SviOptions o;
        o.batch_size = data.size();
        const SviStepResult step = svi_step(state, c, data, o, rng);
        if (step.rate != 1.0) return {false, "first step rate is not 1"};
        Eigen::MatrixXd Yb(step.batch.size(), data.Y.cols());
        for (std::size_t i = 0; i < step.batch.size(); ++i) Yb.row(i) = data.Y.row(step.batch[i]);
        GlobalVariational g = g0;
        for (int k = 0; k <= g.depth(); ++k) {
            update_tau(g, k);
            update_psi(g, k);
        }
        for (int k = 0; k <= g.depth(); ++k) update_eta(g, k, step.local, Yb);
        for (int k = 0; k <= g.depth(); ++k) update_weights(g, k, step.local, Yb);
        em_update_global(g);
        worst_param = std::max(worst_param, max_abs_diff(state.global, g));
        worst_elbo = std::max(worst_elbo, std::abs(step.noisy_elbo - elbo(state.global, step.local, Yb)));
    }
    return {worst_param <= 1e-10 && worst_elbo <= 1e-10,
            fmt("3 families, max global diff %.2e, |noisy - exact ELBO| %.2e (limits 1e-10)", worst_param, worst_elbo)};
}

// --- 6 ---------------------------------------------------------------------

Outcome predictive_moments_mc() {
    Rng drng(61);
    const Dataset all = simulate_toy(300, drng);
    auto [train, test] = split(all, 0.9, 62);
    Rng frng(63);
    const FitResult fit = fit_cavi(config_for({2, 20, 1}), train, CaviOptions{}, frng);
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) {
        const LocalPoint p = predictive_local_fit(fit.global, test.X.row(i).transpose(), PredictOptions{});
        const PredictiveSummary s = predictive_moments(fit.global, p);
        Rng rng(64 + i);
        const int J = 1000000;
        const Eigen::MatrixXd draws = sample_predictive(fit.global, p, J, rng);
        const Eigen::ArrayXd y = draws.col(0).array();
        const double mean = y.mean();
        const double var = (y - mean).square().sum() / (J - 1);
        const double fourth = (y - mean).pow(4).mean();
        worst = std::max({worst, std::abs(mean - s.mean(0)) / std::sqrt(var / J),
                          std::abs(var - s.variance(0)) / std::sqrt((fourth - var * var) / J)});
    }
    return {worst <= 4.0, fmt("3 test points x 1e6 draws, worst deviation %.2f SE (limit 4)", worst)};
}

// --- 7 ---------------------------------------------------------------------

Outcome simulated_example() {
    Rng drng(71);
    const Dataset all = simulate_toy(300, drng);
    double max_rmse = 0.0, ec = 0.0, min_pruned = 1.0;
    for (int s = 0; s < 10; ++s) {
        auto [train, test] = split(all, 0.9, 700 + s);
        NetworkConfig c = config_for({2, 20, 1});
        c.seed = 800 + s;
        Rng frng(c.seed);
        const FitResult fit = fit_cavi(c, train, CaviOptions{}, frng);
        const Metrics m = evaluate(predict(fit.global, test.X, PredictOptions{}), test.Y);
        const SparseMask mask = select_nodes(fit.global, 0.01);
        max_rmse = std::max(max_rmse, m.rmse);
        ec += m.coverage / 10.0;
        min_pruned = std::min(min_pruned, 1.0 - static_cast<double>(mask.kept_edges()) / mask.total_edges());
    }
    const bool ok = max_rmse <= 2.0 && ec >= 0.85 && ec <= 1.0 && min_pruned >= 0.25;
    return {ok, fmt("10 splits: max RMSE %.3f (<= 2), mean EC %.3f ([0.85, 1]), min pruned %.0f%% (>= 25%%)", max_rmse,
                    ec, 100.0 * min_pruned)};
}

// --- 8 ---------------------------------------------------------------------

Outcome diabetes() {
    const Dataset all = load_dataset(std::string(VBNN_DATA_DIR) + "/diabetes.csv", {"y"});
    double rmse = 0.0, nll = 0.0, ec = 0.0;
    for (int s = 0; s < 10; ++s) {
        auto [train, test] = split(all, 0.9, 900 + s);
        NetworkConfig c = config_for({static_cast<int>(train.X.cols()), 20, 1});
        c.seed = 950 + s;
        Rng frng(c.seed);
        const FitResult fit = fit_cavi(c, train, CaviOptions{}, frng);
        const Metrics m = evaluate(predict(fit.global, test.X, PredictOptions{}), test.Y);
        rmse += m.rmse / 10.0;
        nll += m.nll / 10.0;
        ec += m.coverage / 10.0;
    }
    const bool ok = rmse >= 47.0 && rmse <= 62.0 && nll >= 5.0 && nll <= 5.9 && ec >= 0.88 && ec <= 1.0;
    return {ok, fmt("10 splits: mean RMSE %.2f ([47, 62]), mean NLL %.3f ([5.0, 5.9]), mean EC %.3f ([0.88, 1])", rmse,
                    nll, ec)};
}

// --- 9 ---------------------------------------------------------------------

Outcome sparsifier_properties() {
    Rng rng(91);
    std::uniform_real_distribution<double> u01(0.0, 1.0), ua(0.001, 0.3);
    std::uniform_int_distribution<int> width(1, 6);
    int fdr_bad = 0, idem_bad = 0, nest_bad = 0, nonempty = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> dims{width(rng)};
        const int L = 1 + trial % 3;
        for (int l = 0; l < L; ++l) dims.push_back(width(rng));
        dims.push_back(1);
        std::vector<Eigen::MatrixXd> scores;
        std::vector<double> flat;
        for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
            Eigen::MatrixXd m(dims[k + 1], dims[k]);
            for (Eigen::Index i = 0; i < m.size(); ++i) {
                double q = 1.0 - 0.5 * std::pow(u01(rng), 3.0);
                if (trial % 2 == 0) q = std::round(q * 200.0) / 200.0;
                m.data()[i] = std::min(q, 1.0 - 1e-6);
            }
            scores.push_back(m);
            flat.insert(flat.end(), m.data(), m.data() + m.size());
        }
        const double alpha = ua(rng);
        const Threshold t = select_threshold(flat, alpha);
        if (!t.empty) {
            ++nonempty;
            if (!(fdr_estimate(flat, t.kappa) < alpha)) ++fdr_bad;
        }
        const SparseMask m = select_from_scores(scores, alpha);
        SparseMask again = m;
        structural_prune(again);
        bool same = again.node_alive == m.node_alive;
        for (std::size_t k = 0; k < m.keep.size(); ++k) same = same && (again.keep[k] == m.keep[k]).all();
        if (!same) ++idem_bad;
        // kept sets shrink along a decreasing alpha path
        SparseMask prev = m;
        for (double a = alpha * 0.7; a > 1e-4; a *= 0.7) {
            const SparseMask next = select_from_scores(scores, a);
            for (std::size_t k = 0; k < next.keep.size(); ++k)
                if (!(next.keep[k] <= prev.keep[k]).all()) {
                    ++nest_bad;
                    break;
                }
            prev = next;
        }
    }
    const bool ok = fdr_bad == 0 && idem_bad == 0 && nest_bad == 0 && nonempty > 0;
    return {ok, fmt("100 configurations (%d non-empty): FDR violations %d, non-idempotent %d, nesting violations %d",
                    nonempty, fdr_bad, idem_bad, nest_bad)};
}

// --- 10 --------------------------------------------------------------------

Outcome ensemble_properties() {
    Rng rng(101);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> uv(0.1, 3.0);
    double simplex_err = 0.0, shift_err = 0.0, mix_err = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> e(1 + trial % 7);
        for (double& v : e) v = 1e4 * n01(rng);
        const Eigen::VectorXd w = ensemble_weights(e, 0.05);
        simplex_err = std::max({simplex_err, std::abs(w.sum() - 1.0), std::max(0.0, -w.minCoeff())});
        std::vector<double> shifted(e);
        for (double& v : shifted) v += 1e5 * n01(rng);
        for (std::size_t k = 0; k < e.size(); ++k) shifted[k] = shifted[0] - e[0] + e[k];
        shift_err = std::max(shift_err, (ensemble_weights(shifted, 0.05) - w).cwiseAbs().maxCoeff());

        std::vector<PredictiveSummary> parts;
        std::vector<double> le;
        for (int k = 0; k < 4; ++k) {
            PredictiveSummary s;
            s.mean = Eigen::VectorXd::Constant(1, 3.0 * n01(rng));
            s.variance = Eigen::VectorXd::Constant(1, uv(rng));
            s.signal_variance = 0.5 * s.variance;
            parts.push_back(s);
            le.push_back(20.0 * n01(rng));
        }
        const Eigen::VectorXd mw = ensemble_weights(le, 0.1);
        const PredictiveSummary mix = combine_predictions(parts, mw);
        long double m = 0.0L, s2 = 0.0L;
        for (int k = 0; k < 4; ++k) {
            m += mw(k) * static_cast<long double>(parts[k].mean(0));
            s2 += mw(k) * (static_cast<long double>(parts[k].variance(0)) + static_cast<long double>(parts[k].mean(0)) * parts[k].mean(0));
        }
        mix_err = std::max({mix_err, std::abs(mix.mean(0) - static_cast<double>(m)),
                            std::abs(mix.variance(0) - static_cast<double>(s2 - m * m))});
    }

    Rng drng(102);
    const Dataset all = simulate_toy(103, drng);
    int wins = 0;
    std::ostringstream gaps;
    for (int s = 0; s < 10; ++s) {
        auto [train, test] = split(all, 0.9, 1000 + s);
        CaviOptions o;
        const EnsembleModel ens = fit_ensemble(config_for({2, 10, 1}), train, 4, 0.05, o, 1100 + 10 * s);
        const Metrics me = evaluate(ensemble_predict(ens, test.X, PredictOptions{}), test.Y);
        Eigen::Index best;
        ens.weights.maxCoeff(&best);
        const Metrics mb = evaluate(predict(ens.members[best].global, test.X, PredictOptions{}), test.Y);
        if (me.nll <= mb.nll + 0.1) ++wins;
        gaps << (s ? " " : "") << fmt("%+.2f", me.nll - mb.nll);
    }
    const bool ok = simplex_err <= 1e-12 && shift_err <= 1e-12 && mix_err <= 1e-12 && wins >= 7;
    return {ok, fmt("simplex err %.1e, shift err %.1e, mixture err %.1e (limits 1e-12); NLL within 0.1 of the "
                    "top-weight member in %d/10 splits (>= 7), gaps [%s]",
                    simplex_err, shift_err, mix_err, wins, gaps.str().c_str())};
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* name;
        double limit_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> all = {
        {1, "distribution kernels vs quadrature and series oracles", 10.0, distribution_kernels},
        {2, "CAVI ELBO monotone", 300.0, cavi_monotone},
        {3, "output weights equal the ridge posterior", 0.0, ridge_conjugacy},
        {4, "micro-model ELBO vs Monte Carlo", 0.0, micro_elbo},
        {5, "full-batch SVI step equals CAVI", 0.0, svi_equals_cavi},
        {6, "predictive moments vs samples", 0.0, predictive_moments_mc},
        {7, "simulated example", 600.0, simulated_example},
        {8, "diabetes", 1800.0, diabetes},
        {9, "sparsifier properties", 10.0, sparsifier_properties},
        {10, "ensemble properties", 0.0, ensemble_properties},
    };
    // optional list of criterion numbers to run
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

    int failed = 0;
    for (const Criterion& c : all) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::string timing = fmt("%.1f s", secs);
        if (c.limit_s > 0.0) {
            timing += fmt(", limit %.0f s", c.limit_s);
            if (secs > c.limit_s) out.pass = false;
        }
        if (!out.pass) ++failed;
        std::printf("criterion %2d %s: %s -- %s [%s]\n", c.id, out.pass ? "PASS" : "FAIL", c.name, out.detail.c_str(),
                    timing.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
