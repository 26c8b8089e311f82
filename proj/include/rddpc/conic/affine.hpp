#pragma once

#include "rddpc/linalg.hpp"

#include <map>
#include <vector>

namespace rddpc::conic {

/**
 * @brief Matrix-valued expression affine in the scalar decision vector x:
 *   E(x) = C + sum_k x_k A_k.
 * Coefficients are keyed by the scalar variable index.
 */
class AffineExpr
{
public:
  using TermMap = std::map<Index, MatrixXd>;

  AffineExpr() = default;
  /// Zero expression of the given shape.
  AffineExpr(Index rows, Index cols);
  /// Constant expression.
  explicit AffineExpr(MatrixXd constant);

  static AffineExpr scalar(double value);
  /// x_index as a 1 x 1 expression.
  static AffineExpr scalar_variable(Index index);

  Index rows() const { return constant_.rows(); }
  Index cols() const { return constant_.cols(); }
  const MatrixXd & constant() const { return constant_; }
  const TermMap & terms() const { return terms_; }
  bool is_constant() const { return terms_.empty(); }

  /// Adds coeff * x_index; coeff must match the shape.
  void add_term(Index index, const MatrixXd & coeff);
  void add_constant(const MatrixXd & c);

  AffineExpr transpose() const;
  MatrixXd evaluate(const VectorXd & x) const;
  /// Largest variable index referenced, or -1.
  Index max_index() const;

  AffineExpr & operator+=(const AffineExpr & rhs);
  AffineExpr & operator-=(const AffineExpr & rhs);
  AffineExpr & operator*=(double s);

  friend AffineExpr operator+(AffineExpr lhs, const AffineExpr & rhs) { return lhs += rhs; }
  friend AffineExpr operator-(AffineExpr lhs, const AffineExpr & rhs) { return lhs -= rhs; }
  friend AffineExpr operator-(AffineExpr e) { return e *= -1.0; }
  friend AffineExpr operator*(double s, AffineExpr e) { return e *= s; }
  friend AffineExpr operator*(const MatrixXd & A, const AffineExpr & e);
  friend AffineExpr operator*(const AffineExpr & e, const MatrixXd & B);
  friend AffineExpr operator+(AffineExpr lhs, const MatrixXd & c)
  {
    lhs.add_constant(c);
    return lhs;
  }

  /// s(x) * A for a 1 x 1 expression s.
  static AffineExpr scalar_times(const AffineExpr & s, const MatrixXd & A);

  /// Vertical concatenation; all parts must share the column count.
  static AffineExpr vstack(const std::vector<AffineExpr> & parts);

private:
  MatrixXd constant_;
  TermMap terms_;
};

}  // namespace rddpc::conic
