#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace vbnn {

// Raised when a factorization fails even after the jitter ladder.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Cholesky of a symmetric matrix, retrying with diagonal jitter of
// 1e-9, 1e-6, 1e-3 (relative to the mean diagonal magnitude).
Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& A, const std::string& what);

struct SpdInverse {
    Eigen::MatrixXd inverse;
    double log_det = 0.0;  // log det of the input matrix
};

SpdInverse spd_inverse(const Eigen::MatrixXd& A, const std::string& what);

double log_det_spd(const Eigen::MatrixXd& A, const std::string& what);

inline double trace_product(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    return A.cwiseProduct(B.transpose()).sum();
}

inline void symmetrize(Eigen::MatrixXd& A) { A = 0.5 * (A + A.transpose()).eval(); }

bool is_spd(const Eigen::MatrixXd& A);

}  // namespace vbnn
