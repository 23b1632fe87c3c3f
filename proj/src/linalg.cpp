#include "vbnn/linalg.hpp"

#include <array>
#include <cmath>

namespace vbnn {

Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& A, const std::string& what) {
    if (!A.allFinite()) throw NumericalError(what + ": non-finite matrix");
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) return llt;
    const double scale = std::max(1.0, A.diagonal().cwiseAbs().mean());
    constexpr std::array<double, 3> ladder = {1e-9, 1e-6, 1e-3};
    for (double j : ladder) {
        Eigen::MatrixXd B = A;
        B.diagonal().array() += j * scale;
        llt.compute(B);
        if (llt.info() == Eigen::Success) return llt;
    }
    throw NumericalError(what + ": matrix not positive definite after jitter");
}

SpdInverse spd_inverse(const Eigen::MatrixXd& A, const std::string& what) {
    const auto llt = robust_cholesky(A, what);
    SpdInverse out;
    out.inverse = llt.solve(Eigen::MatrixXd::Identity(A.rows(), A.cols()));
    symmetrize(out.inverse);
    out.log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return out;
}

double log_det_spd(const Eigen::MatrixXd& A, const std::string& what) {
    const auto llt = robust_cholesky(A, what);
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

bool is_spd(const Eigen::MatrixXd& A) {
    if (A.rows() != A.cols() || !A.allFinite()) return false;
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, A.cwiseAbs().maxCoeff())) return false;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    return llt.info() == Eigen::Success;
}

}  // namespace vbnn
