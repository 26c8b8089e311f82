#include "rddpc/conic/lmi.hpp"

#include <cmath>

#include <stdexcept>

namespace rddpc::conic {

LmiConstraint schur_lmi(
  const AffineExpr & corner,
  const AffineExpr & cross,
  const AffineExpr & center,
  const std::vector<SchurBorder> & borders,
  std::string label)
{
  if (corner.rows() != 1 || corner.cols() != 1) { throw std::invalid_argument("Schur corner must be scalar"); }
  const Index k = center.rows();
  if (center.cols() != k || cross.rows() != k || cross.cols() != 1) {
    throw std::invalid_argument("Schur centre/cross blocks have inconsistent shapes");
  }
  std::vector<Index> sizes{1, k};
  for (const auto & b : borders) { sizes.push_back(b.head.rows()); }
  LmiBuilder builder(sizes);
  builder.set(0, 0, corner);
  if (k > 0) {
    builder.set(1, 0, cross);
    builder.set(1, 1, center);
  }
  for (std::size_t i = 0; i < borders.size(); ++i) {
    const auto & b = borders[i];
    const Index m  = b.head.rows();
    if (b.head.cols() != 1 || b.body.rows() != m || b.body.cols() != k) {
      throw std::invalid_argument("Schur border blocks have inconsistent shapes");
    }
    require_positive_definite(b.weight, "Schur weight");
    // W = F^T F; the border [F head, F body, I] avoids W^{-1}, which is badly scaled for small weights.
    const Eigen::LLT<MatrixXd> llt(0.5 * (b.weight + b.weight.transpose()));
    const MatrixXd F = llt.matrixU();
    const auto row   = static_cast<Index>(i) + 2;
    builder.set(row, 0, F * b.head);
    if (k > 0) { builder.set(row, 1, F * b.body); }
    builder.set(row, row, AffineExpr(MatrixXd(MatrixXd::Identity(m, m))));
  }
  return builder.build(std::move(label));
}

LmiConstraint schur_lmi(const AffineExpr & s, const AffineExpr & v, const MatrixXd & weight, std::string label)
{
  return schur_lmi(s, AffineExpr(0, 1), AffineExpr(0, 0), {{v, AffineExpr(v.rows(), 0), weight}}, std::move(label));
}

VarId slemma_pair(
  ConicProgram & program,
  const MatrixXd & uncertainty_weight,
  double Lambda,
  const AffineExpr & center,
  const AffineExpr & spread,
  const std::string & label)
{
  if (!(Lambda > 0.0)) { throw std::invalid_argument("S-lemma pair needs Lambda > 0"); }
  const Index k = uncertainty_weight.rows();
  const Index m = center.rows();
  if (uncertainty_weight.cols() != k || center.cols() != 1 || spread.rows() != m || spread.cols() != k) {
    throw std::invalid_argument("S-lemma blocks have inconsistent shapes");
  }
  const VarId mu_id   = program.add_variable("mu[" + label + "]", 1);
  const AffineExpr nu = program.expr(mu_id);
  program.add_nonnegative(nu, label + ".mu>=0");

  // w = sqrt(Lambda) w~ keeps the multiplier O(1) when Lambda is tiny.
  LmiBuilder b({1, k, m});
  b.set(0, 0, AffineExpr::scalar(1.0) - nu);
  b.set(1, 1, AffineExpr::scalar_times(nu, uncertainty_weight));
  b.set(2, 0, center);
  b.set(2, 1, std::sqrt(Lambda) * spread);
  b.set(2, 2, AffineExpr(MatrixXd(MatrixXd::Identity(m, m))));
  program.add_lmi(b.build(label));
  return mu_id;
}

}  // namespace rddpc::conic
