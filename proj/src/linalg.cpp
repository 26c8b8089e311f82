#include "rddpc/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace rddpc {

double rank_tolerance(double sigma_max, Index rows, Index cols)
{
  return static_cast<double>(std::max(rows, cols)) * sigma_max
       * std::numeric_limits<double>::epsilon() * kRankEpsScale;
}

TruncatedSvd truncated_svd(const MatrixXd & A, double reference_sigma)
{
  TruncatedSvd out;
  if (A.size() == 0) {
    out.U.resize(A.rows(), 0);
    out.V.resize(A.cols(), 0);
    return out;
  }
  Eigen::BDCSVD<MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd & s = svd.singularValues();
  const double tol   = rank_tolerance(std::max(s(0), reference_sigma), A.rows(), A.cols());
  Index r            = 0;
  while (r < s.size() && s(r) > tol) { ++r; }
  out.U     = svd.matrixU().leftCols(r);
  out.sigma = s.head(r);
  out.V     = svd.matrixV().leftCols(r);
  return out;
}

VectorXd singular_values(const MatrixXd & A)
{
  if (A.size() == 0) { return VectorXd(0); }
  return Eigen::BDCSVD<MatrixXd>(A).singularValues();
}

Index numerical_rank(const MatrixXd & A) { return truncated_svd(A).rank(); }

MatrixXd pinv(const MatrixXd & A)
{
  const TruncatedSvd svd = truncated_svd(A);
  return svd.V * svd.sigma.cwiseInverse().asDiagonal() * svd.U.transpose();
}

MatrixXd null_basis(const MatrixXd & A)
{
  const Index n = A.cols();
  if (n == 0) { return MatrixXd(0, 0); }
  if (A.rows() == 0) { return MatrixXd::Identity(n, n); }
  // Full V is needed for the complement; n stays below a few thousand here.
  Eigen::JacobiSVD<MatrixXd> svd(A, Eigen::ComputeFullV);
  const VectorXd & s = svd.singularValues();
  const double tol   = s.size() > 0 ? rank_tolerance(s(0), A.rows(), A.cols()) : 0.0;
  Index r            = 0;
  while (r < s.size() && s(r) > tol) { ++r; }
  return svd.matrixV().rightCols(n - r);
}

MatrixXd nullspace_projector(const MatrixXd & A)
{
  const Index n = A.cols();
  // I - V_r V_r^T, with V_r the retained right singular vectors.
  const TruncatedSvd svd = truncated_svd(A);
  MatrixXd P             = MatrixXd::Identity(n, n);
  P.noalias() -= svd.V * svd.V.transpose();
  return 0.5 * (P + P.transpose());
}

MatrixXd block_diag_repeat(const MatrixXd & W, Index n)
{
  MatrixXd out = MatrixXd::Zero(W.rows() * n, W.cols() * n);
  for (Index k = 0; k < n; ++k) { out.block(k * W.rows(), k * W.cols(), W.rows(), W.cols()) = W; }
  return out;
}

double spectral_norm(const MatrixXd & A)
{
  if (A.size() == 0) { return 0.0; }
  return singular_values(A)(0);
}

double min_eigenvalue(const MatrixXd & S)
{
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

bool is_symmetric(const MatrixXd & A, double tol)
{
  if (A.rows() != A.cols()) { return false; }
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  return (A - A.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

void require_positive_definite(const MatrixXd & W, const std::string & what)
{
  if (W.rows() != W.cols() || W.size() == 0) {
    throw std::invalid_argument(what + " must be a non-empty square matrix");
  }
  if (!is_symmetric(W, 1e-10)) { throw std::invalid_argument(what + " must be symmetric"); }
  Eigen::LLT<MatrixXd> llt(W);
  if (llt.info() != Eigen::Success || min_eigenvalue(W) <= 0.0) {
    throw std::invalid_argument(what + " must be positive definite");
  }
}

MatrixXd spd_inverse(const MatrixXd & W)
{
  Eigen::LLT<MatrixXd> llt(W);
  if (llt.info() != Eigen::Success) { throw std::invalid_argument("matrix is not positive definite"); }
  MatrixXd inv = llt.solve(MatrixXd::Identity(W.rows(), W.cols()));
  return 0.5 * (inv + inv.transpose());
}

VectorXd vcat(const std::vector<VectorXd> & parts)
{
  Index n = 0;
  for (const auto & p : parts) { n += p.size(); }
  VectorXd out(n);
  Index k = 0;
  for (const auto & p : parts) {
    out.segment(k, p.size()) = p;
    k += p.size();
  }
  return out;
}

}  // namespace rddpc
