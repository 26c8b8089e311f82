#pragma once

/**
 * @file
 * @brief Hankel-matrix data model: block Hankel construction, past/future
 * partitioning, the subspace predictor and its nullspace complement, and the
 * SVD-compressed twin used by the small LMIs.
 */

#include "rddpc/linalg.hpp"
#include "rddpc/lti_sim.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rddpc {

/// Block Hankel matrix of depth L built from the columns of `seq` (d x N); result is dL x (N-L+1).
MatrixXd build_hankel(const MatrixXd & seq, Index depth);

/// True iff the depth-`order` Hankel matrix of `seq` has full row rank.
bool is_persistently_exciting(const MatrixXd & seq, Index order);

struct DataDims
{
  Index nu{0};
  Index ny{0};
  Index Lp{0};
  Index Lf{0};
  Index N{0};  ///< samples in the recorded trajectory (Nbar + L - 1 when built from blocks)

  Index L() const { return Lp + Lf; }
  Index Nbar() const { return N - L() + 1; }
  Index rows_up() const { return nu * Lp; }
  Index rows_uf() const { return nu * Lf; }
  Index rows_yp() const { return ny * Lp; }
  Index rows_yf() const { return ny * Lf; }
  /// Rows of the stacked data matrix col(U_p, U_f, Y_p).
  Index rows_phi() const { return nu * L() + ny * Lp; }
  /// Length of col(u_p, y_p).
  Index rows_past() const { return (nu + ny) * Lp; }
};

/**
 * @brief Partitioned offline data and every full-size matrix derived from it.
 *
 * The predictor P = Y_f pinv(Phi) maps col(u_p, u_f, y_p) to the output
 * prediction. Mf and Mp are its columns regrouped so that
 * P col(u_p, u_f, y_p) = Mf u_f + Mp col(u_p, y_p):
 *   Mf = P[:, nu Lp : nu L),  Mp = [P[:, 0 : nu Lp), P[:, nu L : nu L + ny Lp)].
 */
struct BehavioralData
{
  DataDims dims;
  MatrixXd Up, Uf, Yp, Yf;
  MatrixXd Phi;       ///< col(Up, Uf, Yp)
  MatrixXd PhiPinv;   ///< Nbar x rows_phi
  MatrixXd PhiPerp;   ///< I - pinv(Phi) Phi, Nbar x Nbar
  MatrixXd M;         ///< Yf PhiPerp
  MatrixXd Predictor; ///< Yf pinv(Phi)
  MatrixXd Mf, Mp;
  Index phi_rank{0};
  std::vector<std::string> warnings;

  /// Y_f pinv(Phi) col(u_p, u_f, y_p); throws std::invalid_argument on length mismatch.
  VectorXd predict(const VectorXd & u_p, const VectorXd & u_f, const VectorXd & y_p) const;
};

/**
 * @brief Partition a recorded trajectory with horizons (Lp, Lf).
 *
 * When `nx` is given, persistency of excitation of order L + nx is checked and
 * a failure is reported in `warnings` rather than thrown.
 */
BehavioralData partition(const sim::Trajectory & data, Index Lp, Index Lf, std::optional<Index> nx = std::nullopt);

/// Build from explicit Hankel blocks (synthetic instances, tests).
BehavioralData from_blocks(
  const MatrixXd & Up, const MatrixXd & Uf, const MatrixXd & Yp, const MatrixXd & Yf, Index nu, Index ny);

/**
 * @brief SVD-compressed data: col(Phi, Y_f) = Wt V1^T with Wt = U Sigma.
 *
 * All (nu + ny) L singular directions are kept so the compressed LMIs have a
 * fixed size; directions below the rank cutoff are set to exact zero columns.
 */
struct ReducedData
{
  DataDims dims;
  MatrixXd W1t;       ///< rows_phi x (nu+ny)L
  MatrixXd W2t;       ///< rows_yf x (nu+ny)L
  MatrixXd PhiPerpT;  ///< I - pinv(W1t) W1t
  MatrixXd Mt;        ///< W2t PhiPerpT
  MatrixXd Predictor; ///< W2t pinv(W1t), equal to Yf pinv(Phi)
  MatrixXd MfT, MpT;
  MatrixXd V1;        ///< Nbar x (nu+ny)L, kept only for identity checks
  Index stacked_rank{0};

  VectorXd predict(const VectorXd & u_p, const VectorXd & u_f, const VectorXd & y_p) const;
};

/// Throws std::runtime_error when the data matrix is degenerate (all zero).
ReducedData svd_reduce(const BehavioralData & data);

/// Output prediction Y_f pinv(Phi) col(u_p, u_f, y_p).
VectorXd spc_predict(const BehavioralData & data, const VectorXd & u_p, const VectorXd & u_f, const VectorXd & y_p);
VectorXd spc_predict(const ReducedData & data, const VectorXd & u_p, const VectorXd & u_f, const VectorXd & y_p);

/**
 * @brief Minimal description of the deviation set {M w : ||PhiPerp w||^2 <= Lambda}.
 *
 * With M = U S V^T (rank r) the set equals {D t : ||t||^2 <= Lambda} where
 * D = U S; `row_basis` = V maps t back to a deviation coefficient w = V t that
 * lies in the range of PhiPerp. Valid whenever the rows of M lie in that range.
 */
struct DeviationFactor
{
  MatrixXd D;          ///< rows(M) x r
  MatrixXd row_basis;  ///< cols(M) x r
  Index rank() const { return D.cols(); }
};

/// `reference_sigma` sets the rank cutoff scale (pass ||Y_f|| so round-off M gets rank 0).
DeviationFactor deviation_factor(const MatrixXd & M, double reference_sigma = 0.0);

/// Column permutation helpers for the (u_p, u_f, y_p) ordering.
MatrixXd split_future(const MatrixXd & predictor, const DataDims & dims);
MatrixXd split_past(const MatrixXd & predictor, const DataDims & dims);

/// Debug CSV: first line "# rows,cols", then one comma-separated row per line.
void write_matrix_csv(const MatrixXd & A, const std::string & path);
MatrixXd read_matrix_csv(const std::string & path);

}  // namespace rddpc
