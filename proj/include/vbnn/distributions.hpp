#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>

namespace vbnn {

using Rng = std::mt19937_64;

// Generalized inverse Gaussian, density proportional to
// x^(nu-1) exp(-(delta^2/x + lam^2 x)/2) on x > 0.
struct GigParams {
    double nu = -1.5;
    double delta = 1.0;
    double lam = 0.0;
};

enum class GigKind { InverseGamma, Gamma, InverseGaussian, General };

bool is_valid(const GigParams& p) noexcept;
void validate(const GigParams& p);  // throws std::domain_error
GigKind classify(const GigParams& p);

// Infinite moments are reported as +inf, never NaN.
struct GigMoments {
    double mean = 0.0;
    double inv_mean = 0.0;
    bool mean_finite() const { return std::isfinite(mean); }
    bool inv_mean_finite() const { return std::isfinite(inv_mean); }
};

// Inverse gamma with shape alpha and scale beta.
struct InvGammaParams {
    double alpha = 2.0;
    double beta = 1.0;
    double mean() const;
    double mean_inverse() const { return alpha / beta; }
    double mean_log() const;
};

void validate(const InvGammaParams& p);

double log_bessel_k(double nu, double x);
// K_{nu+1}(x) / K_nu(x).
double bessel_k_ratio(double nu, double x);

GigMoments gig_moments(const GigParams& p);
// Bessel-ratio path only; requires delta > 0 and lam > 0.
GigMoments gig_moments_bessel(const GigParams& p);
double gig_mean_log(const GigParams& p);
double gig_log_normalizer(const GigParams& p);
// E_q[log GIG(x | density)].
double gig_expected_log_density(const GigParams& density, const GigParams& q);
double gig_entropy(const GigParams& q);

double inv_gamma_expected_log_density(const InvGammaParams& density, const InvGammaParams& q);
double inv_gamma_entropy(const InvGammaParams& q);

// Mean of PG(b, c).
double pg_mean(double b, double c);

double sigmoid(double x);
double log_cosh(double x);
double normal_cdf(double x);
double normal_quantile(double p);

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov_chol, Rng& rng);
double sample_inv_gamma(const InvGammaParams& p, Rng& rng);

}  // namespace vbnn
