#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace rddpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/**
 * @brief Singular-value cutoff used for every numerical rank decision.
 *
 * tau = max(rows, cols) * sigma_max * eps * kRankEpsScale. The scale factor
 * absorbs round-off accumulated by simulating 600 steps of the plant: on
 * noise-free benchmark data the spurious singular values sit near 1e-14 of
 * sigma_max while genuine ones stay above 1e-4, so anything in 1e2..1e6 works.
 */
inline constexpr double kRankEpsScale = 1e4;

double rank_tolerance(double sigma_max, Index rows, Index cols);

/// Thin SVD truncated at rank_tolerance.
struct TruncatedSvd
{
  MatrixXd U;       ///< rows x r
  VectorXd sigma;   ///< r
  MatrixXd V;       ///< cols x r
  Index rank() const { return sigma.size(); }
};

/**
 * @param reference_sigma lower bound on the scale used for the cutoff, so a
 *        matrix that is round-off relative to some other quantity comes out
 *        with rank zero.
 */
TruncatedSvd truncated_svd(const MatrixXd & A, double reference_sigma = 0.0);

/// All singular values, descending.
VectorXd singular_values(const MatrixXd & A);

Index numerical_rank(const MatrixXd & A);

/// Moore-Penrose pseudo-inverse with the rank cutoff above.
MatrixXd pinv(const MatrixXd & A);

/// Orthonormal basis of the right nullspace of A (cols(A) x (cols - rank)).
MatrixXd null_basis(const MatrixXd & A);

/// I - pinv(A) * A, formed as V_null V_null^T so that it is exactly symmetric.
MatrixXd nullspace_projector(const MatrixXd & A);

/// I_n kron W.
MatrixXd block_diag_repeat(const MatrixXd & W, Index n);

/// Largest singular value (induced 2-norm); 0 for empty matrices.
double spectral_norm(const MatrixXd & A);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const MatrixXd & S);

bool is_symmetric(const MatrixXd & A, double tol = 1e-12);

/// Throws std::invalid_argument unless W is symmetric positive definite.
void require_positive_definite(const MatrixXd & W, const std::string & what);

/// Inverse of a symmetric positive definite matrix through its Cholesky factor.
MatrixXd spd_inverse(const MatrixXd & W);

/// Stack column vectors vertically.
VectorXd vcat(const std::vector<VectorXd> & parts);

}  // namespace rddpc
