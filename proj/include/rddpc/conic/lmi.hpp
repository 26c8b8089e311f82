#pragma once

#include "rddpc/conic/program.hpp"

#include <string>
#include <vector>

namespace rddpc::conic {

/// One bordered row group of a Schur-complement LMI with weight W.
struct SchurBorder
{
  AffineExpr head;  ///< m x 1
  AffineExpr body;  ///< m x k
  MatrixXd weight;  ///< m x m, symmetric positive definite
};

/**
 * @brief Bordered LMI
 *
 *   [ corner      cross^T      (F_1 head_1)^T ... ]
 *   [ cross       center       (F_1 body_1)^T ... ]
 *   [ F_1 head_1  F_1 body_1   I                 ]
 *   [ ...                          ...           ]  >= 0,
 *
 * with W_i = F_i^T F_i (Cholesky), equivalent to
 * [[corner, cross^T], [cross, center]] - sum_i [head_i body_i]^T W_i [head_i body_i] >= 0.
 * A non-PD weight throws std::invalid_argument. `center` may have zero size (k = 0).
 */
LmiConstraint schur_lmi(
  const AffineExpr & corner,
  const AffineExpr & cross,
  const AffineExpr & center,
  const std::vector<SchurBorder> & borders,
  std::string label);

/// s >= v^T W v as a bordered LMI.
LmiConstraint schur_lmi(const AffineExpr & s, const AffineExpr & v, const MatrixXd & weight, std::string label);

/**
 * @brief Robust version of ||center + spread w||^2 <= 1 for all w with
 * w^T P w <= Lambda.
 *
 * With w = sqrt(Lambda) w~, declares nu = mu Lambda >= 0 and adds
 *   [ 1 - nu                  0      center^T                 ]
 *   [ 0                       nu P   sqrt(Lambda) spread^T    ]
 *   [ center   sqrt(Lambda) spread   I                        ] >= 0.
 * Returns the id of nu (divide by Lambda for mu). Requires Lambda > 0.
 */
VarId slemma_pair(
  ConicProgram & program,
  const MatrixXd & uncertainty_weight,
  double Lambda,
  const AffineExpr & center,
  const AffineExpr & spread,
  const std::string & label);

}  // namespace rddpc::conic
