#include "vbnn/model_state.hpp"

#include "vbnn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vbnn {

std::string to_string(PriorFamily f) {
    switch (f) {
        case PriorFamily::InverseGamma: return "ig";
        case PriorFamily::Gamma: return "gamma";
        case PriorFamily::InverseGaussian: return "igauss";
        case PriorFamily::GeneralGig: return "gig";
    }
    return "ig";
}

PriorFamily prior_family_from_string(const std::string& s) {
    if (s == "ig") return PriorFamily::InverseGamma;
    if (s == "gamma") return PriorFamily::Gamma;
    if (s == "igauss") return PriorFamily::InverseGaussian;
    if (s == "gig") return PriorFamily::GeneralGig;
    throw std::invalid_argument("unknown prior family '" + s + "'");
}

std::string to_string(InitScheme s) { return s == InitScheme::Laplace ? "laplace" : "spike_slab"; }

InitScheme init_scheme_from_string(const std::string& s) {
    if (s == "laplace") return InitScheme::Laplace;
    if (s == "spike_slab" || s == "spike-slab") return InitScheme::SpikeSlab;
    throw std::invalid_argument("unknown init scheme '" + s + "'");
}

GigParams default_prior(PriorFamily f) {
    switch (f) {
        case PriorFamily::InverseGamma: return {-1.5, 1.0, 0.0};
        case PriorFamily::Gamma: return {1.0, 0.0, 1.0};
        case PriorFamily::InverseGaussian: return {-0.5, 1.0, 1.0};
        case PriorFamily::GeneralGig: return {-1.0, 1.0, 1.0};
    }
    return {-1.5, 1.0, 0.0};
}

namespace {

void check_family(PriorFamily f, const GigParams& p, const char* which) {
    validate(p);
    const std::string name(which);
    switch (f) {
        case PriorFamily::InverseGamma:
            if (p.lam != 0.0) throw std::invalid_argument(name + ": inverse gamma prior needs lambda = 0");
            break;
        case PriorFamily::Gamma:
            if (p.delta != 0.0) throw std::invalid_argument(name + ": gamma prior needs delta = 0");
            break;
        case PriorFamily::InverseGaussian:
            if (p.nu != -0.5) throw std::invalid_argument(name + ": inverse Gaussian prior needs nu = -1/2");
            break;
        case PriorFamily::GeneralGig:
            if (p.delta == 0.0 || p.lam == 0.0)
                throw std::invalid_argument(name + ": general GIG prior needs delta > 0 and lambda > 0");
            break;
    }
}

// Multiplies the prior variance scale by 1/s.
GigParams shrink(GigParams p, double s) {
    p.delta /= std::sqrt(s);
    p.lam *= std::sqrt(s);
    return p;
}

double sq(double x) { return x * x; }

}  // namespace

void NetworkConfig::validate() const {
    if (dims.size() < 3) throw std::invalid_argument("network needs inputs, at least one hidden layer and outputs");
    for (int d : dims)
        if (d < 1) throw std::invalid_argument("layer widths must be positive");
    if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
    if (!(bias_var > 0.0)) throw std::invalid_argument("bias variance must be positive");
    vbnn::validate(noise_prior_out);
    vbnn::validate(noise_prior_hidden);
    check_family(prior_family, glob_prior, "global prior");
    check_family(prior_family, loc_prior_base, "local prior");
}

Hyperparameters scale_hyperparameters(const NetworkConfig& config) {
    config.validate();
    Hyperparameters h;
    h.family = config.prior_family;
    h.temperature = config.temperature;
    h.bias_var = config.bias_var;
    h.noise_out = config.noise_prior_out;
    h.noise_hidden = config.noise_prior_hidden;
    h.em_enabled = config.em_enabled && config.prior_family != PriorFamily::GeneralGig;
    h.glob = shrink(config.glob_prior, config.depth());
    for (int k = 0; k < config.num_weight_layers(); ++k) h.loc.push_back(shrink(config.loc_prior_base, config.dims[k]));
    return h;
}

std::vector<int> GlobalVariational::dims() const {
    std::vector<int> d;
    if (layers.empty()) return d;
    d.push_back(layers.front().inputs());
    for (const auto& l : layers) d.push_back(l.rows());
    return d;
}

Eigen::VectorXd augmented_mean(const ActivationMoments& m, int k) {
    Eigen::VectorXd v(m.mean[k].size() + 1);
    v << 1.0, m.mean[k];
    return v;
}

Eigen::MatrixXd augmented_second(const ActivationMoments& m, int k) {
    const Eigen::Index n = m.mean[k].size();
    Eigen::MatrixXd S(n + 1, n + 1);
    S(0, 0) = 1.0;
    S.block(1, 0, n, 1) = m.mean[k];
    S.block(0, 1, 1, n) = m.mean[k].transpose();
    S.block(1, 1, n, n) = m.second[k];
    return S;
}

void refresh_moments(LocalPoint& point, const Eigen::VectorXd& x) {
    const std::size_t L = point.layers.size();
    auto& mom = point.moments;
    mom.mean.resize(L + 1);
    mom.second.resize(L + 1);
    mom.cross.resize(L + 1);
    mom.mean[0] = x;
    mom.second[0] = x * x.transpose();
    mom.cross[0].resize(0, 0);
    for (std::size_t k = 1; k <= L; ++k) {
        const LocalLayer& f = point.layers[k - 1];
        const Eigen::VectorXd gm = f.gain * mom.mean[k - 1];
        mom.mean[k] = f.shift + gm;
        Eigen::MatrixXd s = f.cov + f.shift * f.shift.transpose() + f.shift * gm.transpose() + gm * f.shift.transpose() +
                            f.gain * mom.second[k - 1] * f.gain.transpose();
        symmetrize(s);
        mom.second[k] = std::move(s);
        mom.cross[k] = f.shift * mom.mean[k - 1].transpose() + f.gain * mom.second[k - 1];
    }
}

namespace {

double laplace_draw(double scale, Rng& rng) {
    std::exponential_distribution<double> ex(1.0);
    std::bernoulli_distribution sign(0.5);
    return (sign(rng) ? 1.0 : -1.0) * scale * ex(rng);
}

// Optimal PG tilt given current moments.
void set_pg_tilt(LocalPoint& p, const GlobalVariational& g) {
    const double T = g.hyper.temperature;
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        const WeightLayer& wl = g.layers[k];
        const Eigen::MatrixXd aa = augmented_second(p.moments, static_cast<int>(k));
        auto& f = p.layers[k];
        f.pg_tilt.resize(wl.rows());
        for (int d = 0; d < wl.rows(); ++d) {
            const Eigen::MatrixXd ww = wl.cov[d] + wl.mean[d] * wl.mean[d].transpose();
            f.pg_tilt(d) = std::sqrt(std::max(0.0, trace_product(ww, aa))) / T;
        }
    }
}

// Variational GIG scale whose mean (or inverse mean, when the mean is
// infinite) matches a draw from the prior.
double draw_gig_delta(const GigParams& prior, Rng& rng) {
    const double a = -prior.nu;
    const double x = sample_inv_gamma({a, 0.5 * sq(prior.delta)}, rng);
    return a > 1.0 ? std::sqrt(2.0 * (a - 1.0) * x) : std::sqrt(2.0 * a * x);
}

}  // namespace

std::pair<GlobalVariational, LocalVariational> initialize(const NetworkConfig& config, const Eigen::MatrixXd& X,
                                                          const Eigen::MatrixXd& Y, InitScheme scheme, Rng& rng) {
    config.validate();
    const int N = static_cast<int>(X.rows());
    const int L = config.depth();
    if (N < 1) throw std::invalid_argument("initialize: empty data");
    if (X.cols() != config.dims.front() || Y.cols() != config.dims.back() || Y.rows() != N)
        throw std::invalid_argument("initialize: data shape does not match network dims");

    GlobalVariational g;
    g.hyper = scale_hyperparameters(config);
    const double T = g.hyper.temperature;
    g.layers.resize(L + 1);

    LocalVariational local;
    local.points.resize(N);
    for (auto& p : local.points) p.layers.resize(L);

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> n01;

    Eigen::MatrixXd z = X;
    for (int k = 0; k <= L; ++k) {
        const int din = config.dims[k];
        const int dout = config.dims[k + 1];
        WeightLayer& wl = g.layers[k];
        wl.mean.assign(dout, Eigen::VectorXd::Zero(din + 1));
        wl.cov.assign(dout, 0.01 * Eigen::MatrixXd::Identity(din + 1, din + 1));
        wl.noise.assign(dout, k < L ? g.hyper.noise_hidden : g.hyper.noise_out);

        if (k < L) {
            const Eigen::RowVectorXd lo = z.colwise().minCoeff();
            const Eigen::RowVectorXd hi = z.colwise().maxCoeff();
            const double lap_scale = std::sqrt(2.0 / din);
            const double slab_sd = std::sqrt(2.0 / std::sqrt(static_cast<double>(din)));
            const double slab_p = 1.0 / (1.0 + std::sqrt(static_cast<double>(din)));
            for (int d = 0; d < dout; ++d) {
                Eigen::VectorXd w(din);
                for (int j = 0; j < din; ++j) {
                    if (scheme == InitScheme::Laplace) {
                        w(j) = laplace_draw(lap_scale, rng);
                    } else {
                        w(j) = unif(rng) < slab_p ? slab_sd * n01(rng) : 0.0;
                    }
                }
                double b = 0.0;
                for (int j = 0; j < din; ++j) {
                    double pad = 0.05 * (hi(j) - lo(j));
                    if (!(pad > 0.0)) pad = 1.0;
                    const double s = lo(j) - pad + (hi(j) - lo(j) + 2.0 * pad) * unif(rng);
                    b -= w(j) * s;
                }
                wl.mean[d](0) = b;
                wl.mean[d].tail(din) = w;
            }
            Eigen::MatrixXd W(dout, din);
            Eigen::VectorXd bias(dout);
            for (int d = 0; d < dout; ++d) {
                bias(d) = wl.mean[d](0);
                W.row(d) = wl.mean[d].tail(din).transpose();
            }
            Eigen::MatrixXd znext(N, dout);
            for (int n = 0; n < N; ++n) {
                LocalLayer& f = local.points[n].layers[k];
                const Eigen::VectorXd pre = bias + W * z.row(n).transpose();
                f.rho = pre.unaryExpr([T](double v) { return std::clamp(sigmoid(v / T), 1e-12, 1.0 - 1e-12); });
                f.gain = f.rho.asDiagonal() * W;
                f.shift = f.rho.cwiseProduct(bias);
                f.cov = 0.01 * Eigen::MatrixXd::Identity(dout, dout);
                f.log_det_cov = dout * std::log(0.01);
                znext.row(n) = (f.gain * z.row(n).transpose() + f.shift).transpose();
            }
            z = std::move(znext);
        } else {
            // Ridge regression of the targets on the last hidden layer.
            Eigen::MatrixXd Z(N, din + 1);
            Z.col(0).setOnes();
            Z.rightCols(din) = z;
            Eigen::MatrixXd G = Z.transpose() * Z;
            G.diagonal().tail(din).array() += 1.0;
            const Eigen::MatrixXd coef = robust_cholesky(G, "ridge init").solve(Z.transpose() * Y);
            for (int d = 0; d < dout; ++d) wl.mean[d] = coef.col(d);
        }

        // Shrinkage factors.
        const GigParams& loc = g.hyper.loc[k];
        const GigParams& glob = g.hyper.glob;
        wl.psi_delta.resize(dout, din);
        if (g.hyper.family == PriorFamily::InverseGamma) {
            wl.tau = {glob.nu, draw_gig_delta(glob, rng), 0.0};
            wl.psi_nu = loc.nu;
            wl.psi_lam = 0.0;
            for (int d = 0; d < dout; ++d)
                for (int j = 0; j < din; ++j) wl.psi_delta(d, j) = draw_gig_delta(loc, rng);
        } else {
            double ssq = 0.0;
            wl.psi_nu = loc.nu - 0.5;
            wl.psi_lam = loc.lam;
            for (int d = 0; d < dout; ++d)
                for (int j = 0; j < din; ++j) {
                    const double ew2 = sq(wl.mean[d](j + 1)) + wl.cov[d](j + 1, j + 1);
                    wl.psi_delta(d, j) = std::sqrt(sq(loc.delta) + ew2);
                    ssq += ew2;
                }
            wl.tau = {glob.nu - 0.5 * din * dout, std::sqrt(sq(glob.delta) + ssq), glob.lam};
        }
    }

    for (int n = 0; n < N; ++n) {
        refresh_moments(local.points[n], X.row(n).transpose());
        set_pg_tilt(local.points[n], g);
    }
    return {std::move(g), std::move(local)};
}

LocalPoint forward_init(const GlobalVariational& g, const Eigen::VectorXd& x) {
    const int L = g.depth();
    const double T = g.hyper.temperature;
    LocalPoint p;
    p.layers.resize(L);
    Eigen::VectorXd z = x;
    for (int k = 0; k < L; ++k) {
        const WeightLayer& wl = g.layers[k];
        const int dout = wl.rows();
        const int din = wl.inputs();
        Eigen::MatrixXd W(dout, din);
        Eigen::VectorXd bias(dout);
        Eigen::VectorXd noise(dout);
        for (int d = 0; d < dout; ++d) {
            bias(d) = wl.mean[d](0);
            W.row(d) = wl.mean[d].tail(din).transpose();
            noise(d) = 1.0 / wl.noise[d].mean_inverse();
        }
        LocalLayer& f = p.layers[k];
        const Eigen::VectorXd pre = bias + W * z;
        f.rho = pre.unaryExpr([T](double v) { return std::clamp(sigmoid(v / T), 1e-12, 1.0 - 1e-12); });
        f.gain = f.rho.asDiagonal() * W;
        f.shift = f.rho.cwiseProduct(bias);
        f.cov = noise.asDiagonal();
        f.log_det_cov = noise.array().log().sum();
        z = f.gain * z + f.shift;
    }
    refresh_moments(p, x);
    set_pg_tilt(p, g);
    return p;
}

void check_invariants(const GlobalVariational& g) {
    for (const auto& wl : g.layers) {
        for (int d = 0; d < wl.rows(); ++d) {
            if (!is_spd(wl.cov[d])) throw NumericalError("weight covariance is not SPD");
            if (!wl.mean[d].allFinite()) throw NumericalError("weight mean is not finite");
            validate(wl.noise[d]);
            for (int j = 0; j < wl.inputs(); ++j) validate(wl.psi(d, j));
        }
        validate(wl.tau);
    }
}

void check_invariants(const LocalVariational& local) {
    for (const auto& p : local.points)
        for (const auto& f : p.layers) {
            if (!is_spd(f.cov)) throw NumericalError("activation covariance is not SPD");
            if ((f.rho.array() <= 0.0).any() || (f.rho.array() >= 1.0).any())
                throw NumericalError("rho outside (0, 1)");
            if (!f.pg_tilt.allFinite() || (f.pg_tilt.array() < 0.0).any()) throw NumericalError("invalid PG tilt");
        }
}

}  // namespace vbnn
