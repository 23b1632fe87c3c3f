#include "vbnn/distributions.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/digamma.hpp>

#include <array>
#include <numbers>
#include <string>

namespace vbnn {

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 100000;

// Power series of 1/Gamma(1+z) around z = 0.
constexpr std::array<double, 26> kRecipGamma = {
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
};

// gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu), gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2.
void temme_gammas(double mu, double& gam1, double& gam2, double& gampl, double& gammi) {
    gam1 = 0.0;
    gam2 = 0.0;
    double pw = 1.0;  // mu^(2i)
    for (std::size_t j = 0; j < kRecipGamma.size(); j += 2) {
        gam2 += kRecipGamma[j] * pw;
        if (j + 1 < kRecipGamma.size()) gam1 -= kRecipGamma[j + 1] * pw;
        pw *= mu * mu;
    }
    gampl = gam2 - mu * gam1;
    gammi = gam2 + mu * gam1;
}

struct ScaledK {
    double log_scaled;  // log(e^x K_nu(x))
    double ratio;       // K_{nu+1}(x) / K_nu(x)
};

// Temme series for x <= 2, Steed continued fraction otherwise, then upward
// recurrence carried as ratios so that nothing overflows.
ScaledK bessel_k_scaled(double nu, double x) {
    const int nl = static_cast<int>(nu + 0.5);
    const double mu = nu - nl;
    const double mu2 = mu * mu;
    double k_mu = 0.0;
    double k_mu1 = 0.0;
    double log_k_mu = 0.0;

    if (x <= 2.0) {
        const double x2 = 0.5 * x;
        const double pimu = std::numbers::pi * mu;
        const double fact = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
        double d = -std::log(x2);
        double e = mu * d;
        const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
        double gam1, gam2, gampl, gammi;
        temme_gammas(mu, gam1, gam2, gampl, gammi);
        double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
        double sum = ff;
        e = std::exp(e);
        double p = 0.5 * e / gampl;
        double q = 0.5 / (e * gammi);
        double c = 1.0;
        d = x2 * x2;
        double sum1 = p;
        int i = 1;
        for (; i <= kMaxIter; ++i) {
            ff = (i * ff + p + q) / (i * static_cast<double>(i) - mu2);
            c *= d / i;
            p /= (i - mu);
            q /= (i + mu);
            const double del = c * ff;
            sum += del;
            sum1 += c * (p - i * ff);
            if (std::abs(del) < std::abs(sum) * kEps) break;
        }
        if (i > kMaxIter) throw std::runtime_error("log_bessel_k: series did not converge");
        k_mu = sum;
        k_mu1 = sum1 * 2.0 / x;
        log_k_mu = std::log(k_mu) + x;
    } else {
        double b = 2.0 * (1.0 + x);
        double d = 1.0 / b;
        double h = d;
        double delh = d;
        double q1 = 0.0;
        double q2 = 1.0;
        const double a1 = 0.25 - mu2;
        double q = a1;
        double c = a1;
        double a = -a1;
        double s = 1.0 + q * delh;
        int i = 2;
        for (; i <= kMaxIter; ++i) {
            a -= 2 * (i - 1);
            c = -a * c / i;
            const double qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            const double dels = q * delh;
            s += dels;
            if (std::abs(dels / s) < kEps) break;
        }
        if (i > kMaxIter) throw std::runtime_error("log_bessel_k: continued fraction did not converge");
        h = a1 * h;
        k_mu = std::sqrt(std::numbers::pi / (2.0 * x)) / s;
        k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
        log_k_mu = std::log(k_mu);
    }

    double log_k = log_k_mu;
    double r = k_mu1 / k_mu;
    for (int i = 0; i < nl; ++i) {
        log_k += std::log(r);
        r = 2.0 * (mu + i + 1) / x + 1.0 / r;
    }
    return {log_k, r};
}

void check_bessel_args(double nu, double x) {
    if (!std::isfinite(nu) || !std::isfinite(x) || x <= 0.0)
        throw std::domain_error("bessel K requires finite nu and x > 0");
}

double scaled_log_k(double nu, double x) { return bessel_k_scaled(std::abs(nu), x).log_scaled; }

// d/dnu log K_nu(x), five-point stencil.
double dlog_bessel_k_dnu(double nu, double x) {
    const double h = 1e-3;
    const double fp1 = scaled_log_k(nu + h, x);
    const double fm1 = scaled_log_k(nu - h, x);
    const double fp2 = scaled_log_k(nu + 2 * h, x);
    const double fm2 = scaled_log_k(nu - 2 * h, x);
    return (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
}

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

}  // namespace

bool is_valid(const GigParams& p) noexcept {
    if (!std::isfinite(p.nu) || !std::isfinite(p.delta) || !std::isfinite(p.lam)) return false;
    if (p.delta < 0.0 || p.lam < 0.0) return false;
    if (p.delta == 0.0) return p.lam > 0.0 && p.nu > 0.0;
    if (p.lam == 0.0) return p.nu < 0.0;
    return true;
}

void validate(const GigParams& p) {
    if (!is_valid(p))
        throw std::domain_error("invalid GIG parameters (nu=" + std::to_string(p.nu) +
                                ", delta=" + std::to_string(p.delta) + ", lambda=" + std::to_string(p.lam) + ")");
}

GigKind classify(const GigParams& p) {
    validate(p);
    if (p.lam == 0.0) return GigKind::InverseGamma;
    if (p.delta == 0.0) return GigKind::Gamma;
    if (p.nu == -0.5) return GigKind::InverseGaussian;
    return GigKind::General;
}

double InvGammaParams::mean() const { return alpha > 1.0 ? beta / (alpha - 1.0) : kInf; }

double InvGammaParams::mean_log() const { return std::log(beta) - boost::math::digamma(alpha); }

void validate(const InvGammaParams& p) {
    if (!(p.alpha > 0.0) || !(p.beta > 0.0) || !std::isfinite(p.alpha) || !std::isfinite(p.beta))
        throw std::domain_error("inverse gamma requires alpha > 0 and beta > 0");
}

double log_bessel_k(double nu, double x) {
    check_bessel_args(nu, x);
    return bessel_k_scaled(std::abs(nu), x).log_scaled - x;
}

double bessel_k_ratio(double nu, double x) {
    check_bessel_args(nu, x);
    if (nu >= 0.0) return bessel_k_scaled(nu, x).ratio;
    if (nu <= -1.0) return 1.0 / bessel_k_scaled(-nu - 1.0, x).ratio;
    return std::exp(bessel_k_scaled(nu + 1.0, x).log_scaled - bessel_k_scaled(-nu, x).log_scaled);
}

GigMoments gig_moments_bessel(const GigParams& p) {
    if (!(p.delta > 0.0) || !(p.lam > 0.0)) throw std::domain_error("Bessel path needs delta > 0 and lambda > 0");
    const double z = p.lam * p.delta;
    GigMoments m;
    m.mean = p.delta / p.lam * bessel_k_ratio(p.nu, z);
    // K_{nu-1}/K_nu avoids the cancellation in lam K_{nu+1}/(delta K_nu) - 2 nu/delta^2.
    m.inv_mean = p.lam / p.delta / bessel_k_ratio(p.nu - 1.0, z);
    return m;
}

GigMoments gig_moments(const GigParams& p) {
    GigMoments m;
    switch (classify(p)) {
        case GigKind::InverseGamma:
            m.mean = p.nu < -1.0 ? -p.delta * p.delta / (2.0 * p.nu + 2.0) : kInf;
            m.inv_mean = -2.0 * p.nu / (p.delta * p.delta);
            break;
        case GigKind::Gamma:
            m.mean = 2.0 * p.nu / (p.lam * p.lam);
            m.inv_mean = p.nu > 1.0 ? p.lam * p.lam / (2.0 * (p.nu - 1.0)) : kInf;
            break;
        case GigKind::InverseGaussian:
            m.mean = p.delta / p.lam;
            m.inv_mean = p.lam / p.delta + 1.0 / (p.delta * p.delta);
            break;
        case GigKind::General:
            m = gig_moments_bessel(p);
            break;
    }
    return m;
}

double gig_mean_log(const GigParams& p) {
    switch (classify(p)) {
        case GigKind::InverseGamma:
            return std::log(0.5 * p.delta * p.delta) - boost::math::digamma(-p.nu);
        case GigKind::Gamma:
            return boost::math::digamma(p.nu) - std::log(0.5 * p.lam * p.lam);
        default:
            return std::log(p.delta / p.lam) + dlog_bessel_k_dnu(p.nu, p.lam * p.delta);
    }
}

double gig_log_normalizer(const GigParams& p) {
    switch (classify(p)) {
        case GigKind::InverseGamma:
            return -p.nu * std::log(0.5 * p.delta * p.delta) - std::lgamma(-p.nu);
        case GigKind::Gamma:
            return p.nu * std::log(0.5 * p.lam * p.lam) - std::lgamma(p.nu);
        default:
            return p.nu * std::log(p.lam / p.delta) - std::log(2.0) - log_bessel_k(p.nu, p.lam * p.delta);
    }
}

double gig_expected_log_density(const GigParams& density, const GigParams& q) {
    const GigMoments mq = gig_moments(q);
    double out = gig_log_normalizer(density) + (density.nu - 1.0) * gig_mean_log(q);
    if (density.delta != 0.0) out -= 0.5 * density.delta * density.delta * mq.inv_mean;
    if (density.lam != 0.0) out -= 0.5 * density.lam * density.lam * mq.mean;
    return out;
}

double gig_entropy(const GigParams& q) { return -gig_expected_log_density(q, q); }

double inv_gamma_expected_log_density(const InvGammaParams& density, const InvGammaParams& q) {
    return density.alpha * std::log(density.beta) - std::lgamma(density.alpha) -
           (density.alpha + 1.0) * q.mean_log() - density.beta * q.mean_inverse();
}

double inv_gamma_entropy(const InvGammaParams& q) { return -inv_gamma_expected_log_density(q, q); }

double pg_mean(double b, double c) {
    if (!(b > 0.0) || !std::isfinite(c)) throw std::domain_error("pg_mean requires b > 0 and finite c");
    c = std::abs(c);
    if (c < 1e-4) return b * (0.25 - c * c / 48.0);
    return b / (2.0 * c) * std::tanh(0.5 * c);
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log_cosh(double x) {
    x = std::abs(x);
    return x + std::log1p(std::exp(-2.0 * x)) - std::log(2.0);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile requires 0 < p < 1");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov_chol, Rng& rng) {
    if (cov_chol.rows() != mean.size() || cov_chol.cols() != mean.size())
        throw std::invalid_argument("sample_mvn: dimension mismatch");
    std::normal_distribution<double> n01;
    Eigen::VectorXd z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = n01(rng);
    return mean + cov_chol.triangularView<Eigen::Lower>() * z;
}

double sample_inv_gamma(const InvGammaParams& p, Rng& rng) {
    validate(p);
    std::gamma_distribution<double> g(p.alpha, 1.0 / p.beta);
    return 1.0 / g(rng);
}

}  // namespace vbnn
