#include "vbnn/predictor.hpp"

#include "vbnn/parallel.hpp"
#include "vbnn/sparsifier.hpp"

#include <cmath>
#include <stdexcept>

namespace vbnn {

LocalPoint predictive_local_fit(const GlobalVariational& g, const Eigen::VectorXd& x, const PredictOptions& options,
                                std::vector<double>* trace) {
    if (x.size() != g.layers.front().inputs()) throw std::invalid_argument("input has the wrong dimension");
    const auto lm = layer_moments(g);
    const double T = g.hyper.temperature;
    LocalPoint p = forward_init(g, x);
    std::vector<double> local_trace{elbo_local_terms(lm, p, nullptr, T)};
    for (int it = 0; it < options.max_iters; ++it) {
        local_pass(p, lm, x, nullptr, T);
        local_trace.push_back(elbo_local_terms(lm, p, nullptr, T));
        if (elbo_converged(local_trace, options.tol, options.consecutive_hits)) break;
    }
    if (trace) *trace = std::move(local_trace);
    return p;
}

PredictiveSummary predictive_moments(const GlobalVariational& g, const LocalPoint& p) {
    const int L = g.depth();
    const WeightLayer& out = g.layers[L];
    const Eigen::VectorXd ea = augmented_mean(p.moments, L);
    const Eigen::MatrixXd aa = augmented_second(p.moments, L);
    PredictiveSummary s;
    s.mean.resize(out.rows());
    s.variance.resize(out.rows());
    s.signal_variance.resize(out.rows());
    for (int d = 0; d < out.rows(); ++d) {
        const Eigen::VectorXd& m = out.mean[d];
        const double mu = m.dot(ea);
        const double second = trace_product(out.cov[d] + m * m.transpose(), aa);
        const double noise = out.noise[d].mean();
        if (!std::isfinite(noise)) throw NumericalError("output noise has no finite mean (alpha <= 1)");
        s.mean(d) = mu;
        s.signal_variance(d) = std::max(0.0, second - mu * mu);
        s.variance(d) = s.signal_variance(d) + noise;
    }
    return s;
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& A) {
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Eigen::MatrixXd sample_predictive(const GlobalVariational& g, const LocalPoint& p, int J, Rng& rng) {
    if (J < 1) throw std::invalid_argument("sample_predictive: J must be positive");
    const int L = g.depth();
    std::vector<Eigen::MatrixXd> act_chol;
    for (const auto& f : p.layers) act_chol.push_back(psd_factor(f.cov));
    const WeightLayer& out = g.layers[L];
    std::vector<Eigen::MatrixXd> w_chol;
    for (int d = 0; d < out.rows(); ++d) w_chol.push_back(psd_factor(out.cov[d]));

    std::normal_distribution<double> n01;
    auto gauss = [&](Eigen::Index n) {
        Eigen::VectorXd z(n);
        for (Eigen::Index i = 0; i < n; ++i) z(i) = n01(rng);
        return z;
    };
    Eigen::MatrixXd draws(J, out.rows());
    for (int j = 0; j < J; ++j) {
        Eigen::VectorXd a = p.moments.mean[0];
        for (int k = 0; k < L; ++k) {
            const LocalLayer& f = p.layers[k];
            a = (f.shift + f.gain * a + act_chol[k] * gauss(f.shift.size())).eval();
        }
        Eigen::VectorXd at(a.size() + 1);
        at << 1.0, a;
        for (int d = 0; d < out.rows(); ++d) {
            const Eigen::VectorXd w = out.mean[d] + w_chol[d] * gauss(out.mean[d].size());
            const double eta2 = sample_inv_gamma(out.noise[d], rng);
            draws(j, d) = w.dot(at) + std::sqrt(eta2) * n01(rng);
        }
    }
    return draws;
}

PredictiveSummary predict_point(const GlobalVariational& g, const Eigen::VectorXd& x, const PredictOptions& options) {
    return predictive_moments(g, predictive_local_fit(g, x, options));
}

std::vector<PredictiveSummary> predict(const GlobalVariational& g, const Eigen::MatrixXd& X,
                                       const PredictOptions& options) {
    const int n = static_cast<int>(X.rows());
    std::vector<PredictiveSummary> out(n);
    parallel_for(n, [&](int i) { out[i] = predict_point(g, X.row(i).transpose(), options); });
    return out;
}

namespace {

// Output layer reduced to its bias when a hidden layer has no surviving nodes.
PredictiveSummary bias_only(const GlobalVariational& g) {
    const WeightLayer& out = g.layers.back();
    PredictiveSummary s;
    s.mean.resize(out.rows());
    s.variance.resize(out.rows());
    s.signal_variance.resize(out.rows());
    for (int d = 0; d < out.rows(); ++d) {
        s.mean(d) = out.mean[d](0);
        s.signal_variance(d) = out.cov[d](0, 0);
        s.variance(d) = s.signal_variance(d) + out.noise[d].mean();
    }
    return s;
}

}  // namespace

PredictiveSummary sparse_predict(const GlobalVariational& g, const SparseMask& mask, const Eigen::VectorXd& x,
                                 const PredictOptions& options) {
    return sparse_predict(g, mask, Eigen::MatrixXd(x.transpose()), options).front();
}

std::vector<PredictiveSummary> sparse_predict(const GlobalVariational& g, const SparseMask& mask,
                                              const Eigen::MatrixXd& X, const PredictOptions& options) {
    const auto alive = alive_nodes(mask);
    for (const auto& layer : alive)
        if (layer.empty()) return std::vector<PredictiveSummary>(X.rows(), bias_only(apply_mask(g, mask, false)));
    const GlobalVariational reduced = apply_mask(g, mask, true);
    return predict(reduced, X, options);
}

Interval credible_interval(const PredictiveSummary& s, double level) {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("credible level must lie in (0, 1)");
    const double z = normal_quantile(0.5 + 0.5 * level);
    const Eigen::VectorXd sd = s.variance.cwiseSqrt();
    return {s.mean - z * sd, s.mean + z * sd};
}

}  // namespace vbnn
