#include "vbnn/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace vbnn {

Eigen::VectorXd ensemble_weights(const std::vector<double>& elbos, double zeta) {
    if (elbos.empty()) throw std::invalid_argument("ensemble needs at least one member");
    if (!(zeta >= 0.0)) throw std::invalid_argument("zeta must be non-negative");
    Eigen::VectorXd logw(elbos.size());
    for (std::size_t k = 0; k < elbos.size(); ++k) {
        if (!std::isfinite(elbos[k])) throw std::invalid_argument("member ELBO is not finite");
        logw(k) = zeta * elbos[k];
    }
    const double mx = logw.maxCoeff();
    Eigen::VectorXd w = (logw.array() - mx).exp();
    return w / w.sum();
}

PredictiveSummary combine_predictions(const std::vector<PredictiveSummary>& parts, const Eigen::VectorXd& w) {
    if (parts.empty() || static_cast<Eigen::Index>(parts.size()) != w.size())
        throw std::invalid_argument("combine_predictions: size mismatch");
    const Eigen::Index D = parts.front().mean.size();
    PredictiveSummary out;
    out.mean = Eigen::VectorXd::Zero(D);
    for (std::size_t k = 0; k < parts.size(); ++k) out.mean += w(k) * parts[k].mean;
    // between-member spread taken around the mixture mean, which avoids cancellation
    out.variance = Eigen::VectorXd::Zero(D);
    out.signal_variance = Eigen::VectorXd::Zero(D);
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Eigen::VectorXd between = (parts[k].mean - out.mean).cwiseAbs2();
        out.variance += w(k) * (parts[k].variance + between);
        out.signal_variance += w(k) * (parts[k].signal_variance + between);
    }
    return out;
}

EnsembleModel fit_ensemble(const NetworkConfig& config, const Dataset& data, int members, double zeta,
                           const CaviOptions& options, std::uint64_t seed) {
    if (members < 1) throw std::invalid_argument("ensemble needs at least one member");
    EnsembleModel model;
    model.zeta = zeta;
    model.members.resize(members);
    std::vector<std::exception_ptr> errors(members);
    auto fit_one = [&](int k) {
        try {
            NetworkConfig c = config;
            c.seed = seed + k;
            CaviOptions o = options;
            o.init = k % 2 == 0 ? InitScheme::Laplace : InitScheme::SpikeSlab;
            Rng rng(c.seed);
            model.members[k] = fit_cavi(c, data, o, rng);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    };
    const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (hw <= 1) {
        for (int k = 0; k < members; ++k) fit_one(k);
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < members; ++k) pool.emplace_back(fit_one, k);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<double> elbos;
    for (const auto& m : model.members) elbos.push_back(m.final_elbo());
    model.weights = ensemble_weights(elbos, zeta);
    return model;
}

PredictiveSummary ensemble_predict(const EnsembleModel& model, const Eigen::VectorXd& x, const PredictOptions& options) {
    std::vector<PredictiveSummary> parts;
    for (const auto& m : model.members) parts.push_back(predict_point(m.global, x, options));
    return combine_predictions(parts, model.weights);
}

std::vector<PredictiveSummary> ensemble_predict(const EnsembleModel& model, const Eigen::MatrixXd& X,
                                                const PredictOptions& options) {
    std::vector<std::vector<PredictiveSummary>> per_member;
    for (const auto& m : model.members) per_member.push_back(predict(m.global, X, options));
    std::vector<PredictiveSummary> out;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        std::vector<PredictiveSummary> parts;
        for (const auto& pm : per_member) parts.push_back(pm[i]);
        out.push_back(combine_predictions(parts, model.weights));
    }
    return out;
}

}  // namespace vbnn
