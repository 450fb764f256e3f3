#include "latree/transforms.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "latree/errors.hpp"

namespace latree {

namespace {

constexpr double kProbabilityTolerance = 1e-9;

Eigen::MatrixXd inverse_sqrt_spd(const Eigen::MatrixXd& m, const char* name) {
    if (m.rows() != m.cols() || m.rows() == 0) throw InvalidArgument(std::string(name) + " must be square");
    if (!m.isApprox(m.transpose(), 1e-12)) throw NotPositiveDefinite(std::string(name) + " is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    if (eig.info() != Eigen::Success) throw NotPositiveDefinite(std::string(name) + ": eigen decomposition failed");
    const Eigen::VectorXd values = eig.eigenvalues();
    if (values.minCoeff() <= 0.0) throw NotPositiveDefinite(std::string(name) + " is not positive definite");
    return eig.eigenvectors() * values.cwiseSqrt().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

} // namespace

double corr_to_distance(double rho) {
    if (!std::isfinite(rho) || std::abs(rho) > 1.0) {
        throw InvalidCorrelation("correlation " + std::to_string(rho) + " is outside [-1, 1]");
    }
    if (rho == 0.0) throw InfiniteDistance("zero correlation has infinite distance");
    return 0.0 - std::log(std::abs(rho));  // 0.0 - keeps log(1) at +0
}

double tau_to_distance(double tau) {
    if (!std::isfinite(tau)) throw InvalidCorrelation("tau is not finite");
    if (tau == 0.0) throw InfiniteDistance("zero tau has infinite distance");
    return 0.0 - std::log(std::abs(tau));
}

double kendall_to_distance(double kappa) {
    if (!std::isfinite(kappa) || std::abs(kappa) > 1.0) {
        throw InvalidCorrelation("Kendall tau " + std::to_string(kappa) + " is outside [-1, 1]");
    }
    const double rho = std::sin(std::numbers::pi / 2.0 * kappa);
    if (kappa == 0.0 || rho == 0.0) throw InfiniteDistance("zero Kendall tau has infinite distance");
    return 0.0 - std::log(std::abs(rho));
}

double gmm_tau(const Eigen::MatrixXd& joint, const Eigen::VectorXd& marginal_u, const Eigen::VectorXd& marginal_v) {
    const auto d = joint.rows();
    if (d == 0 || joint.cols() != d || marginal_u.size() != d || marginal_v.size() != d) {
        throw InvalidArgument("joint table must be d x d with marginals of length d");
    }
    if (joint.minCoeff() < 0.0) throw InvalidArgument("joint probabilities must be nonnegative");
    if (std::abs(joint.sum() - 1.0) > kProbabilityTolerance) throw InvalidArgument("joint probabilities must sum to 1");
    if (!joint.rowwise().sum().isApprox(marginal_u, kProbabilityTolerance) ||
        !joint.colwise().sum().transpose().isApprox(marginal_v, kProbabilityTolerance)) {
        throw InvalidArgument("marginals are inconsistent with the joint table");
    }
    if (marginal_u.minCoeff() <= 0.0 || marginal_v.minCoeff() <= 0.0) {
        throw SingularMarginal("a marginal probability is zero");
    }
    // Determinants of the diagonal marginal matrices are the products of the marginals.
    return joint.determinant() / std::sqrt(marginal_u.prod() * marginal_v.prod());
}

double gmm_tau(const Eigen::MatrixXd& joint) {
    if (joint.rows() != joint.cols()) throw InvalidArgument("joint table must be square");
    return gmm_tau(joint, joint.rowwise().sum(), joint.colwise().sum().transpose());
}

double linear_tau(const Eigen::MatrixXd& sigma_uu, const Eigen::MatrixXd& sigma_uv, const Eigen::MatrixXd& sigma_vv) {
    if (sigma_uv.rows() != sigma_uu.rows() || sigma_uv.cols() != sigma_vv.rows()) {
        throw InvalidArgument("cross-covariance shape does not match the marginal blocks");
    }
    if (sigma_uv.rows() != sigma_uv.cols()) throw InvalidArgument("cross-covariance must be square");
    const Eigen::MatrixXd left = inverse_sqrt_spd(sigma_uu, "Sigma_uu");
    const Eigen::MatrixXd right = inverse_sqrt_spd(sigma_vv, "Sigma_vv");
    return (left * sigma_uv * right).determinant();
}

} // namespace latree
