#pragma once

#include <Eigen/Dense>

namespace latree {

/// -log|rho|. Throws InfiniteDistance for rho == 0 and InvalidCorrelation for |rho| > 1.
double corr_to_distance(double rho);

/// -log|sin(pi * kappa / 2)|, mapping a Kendall tau to the underlying Gaussian
/// correlation before taking the distance.
double kendall_to_distance(double kappa);

/// -log|tau| for a general dependence measure tau in [-1, 1].
double tau_to_distance(double tau);

/*
 * det(P_uv) / sqrt(det(diag(p_u)) det(diag(p_v))) for a d x d joint
 * probability table with row marginals p_u and column marginals p_v.
 * Throws SingularMarginal when a marginal probability is zero.
 */
double gmm_tau(const Eigen::MatrixXd& joint, const Eigen::VectorXd& marginal_u, const Eigen::VectorXd& marginal_v);
/// Same, with the marginals taken from the row and column sums of the table.
double gmm_tau(const Eigen::MatrixXd& joint);

/// det(S_uu^{-1/2} S_uv S_vv^{-1/2}); S_uu and S_vv must be symmetric positive definite.
double linear_tau(const Eigen::MatrixXd& sigma_uu, const Eigen::MatrixXd& sigma_uv, const Eigen::MatrixXd& sigma_vv);

} // namespace latree
