#include "rddpc/conic/affine.hpp"

#include <stdexcept>

namespace rddpc::conic {

AffineExpr::AffineExpr(Index rows, Index cols) : constant_(MatrixXd::Zero(rows, cols)) {}

AffineExpr::AffineExpr(MatrixXd constant) : constant_(std::move(constant)) {}

AffineExpr AffineExpr::scalar(double value) { return AffineExpr(MatrixXd::Constant(1, 1, value)); }

AffineExpr AffineExpr::scalar_variable(Index index)
{
  AffineExpr e(1, 1);
  e.add_term(index, MatrixXd::Ones(1, 1));
  return e;
}

void AffineExpr::add_term(Index index, const MatrixXd & coeff)
{
  if (index < 0) { throw std::invalid_argument("negative variable index"); }
  if (coeff.rows() != rows() || coeff.cols() != cols()) {
    throw std::invalid_argument("affine term shape does not match the expression");
  }
  auto it = terms_.find(index);
  if (it == terms_.end()) {
    terms_.emplace(index, coeff);
  } else {
    it->second += coeff;
  }
}

void AffineExpr::add_constant(const MatrixXd & c)
{
  if (c.rows() != rows() || c.cols() != cols()) { throw std::invalid_argument("constant shape mismatch"); }
  constant_ += c;
}

AffineExpr AffineExpr::transpose() const
{
  AffineExpr out(MatrixXd(constant_.transpose()));
  for (const auto & [k, A] : terms_) { out.terms_.emplace(k, A.transpose()); }
  return out;
}

MatrixXd AffineExpr::evaluate(const VectorXd & x) const
{
  MatrixXd out = constant_;
  for (const auto & [k, A] : terms_) {
    if (k >= x.size()) { throw std::out_of_range("variable index beyond the point dimension"); }
    out += x(k) * A;
  }
  return out;
}

Index AffineExpr::max_index() const { return terms_.empty() ? -1 : terms_.rbegin()->first; }

AffineExpr & AffineExpr::operator+=(const AffineExpr & rhs)
{
  add_constant(rhs.constant_);
  for (const auto & [k, A] : rhs.terms_) { add_term(k, A); }
  return *this;
}

AffineExpr & AffineExpr::operator-=(const AffineExpr & rhs)
{
  add_constant(-rhs.constant_);
  for (const auto & [k, A] : rhs.terms_) { add_term(k, -A); }
  return *this;
}

AffineExpr & AffineExpr::operator*=(double s)
{
  constant_ *= s;
  for (auto & [k, A] : terms_) { A *= s; }
  return *this;
}

AffineExpr operator*(const MatrixXd & A, const AffineExpr & e)
{
  if (A.cols() != e.rows()) { throw std::invalid_argument("left factor has incompatible columns"); }
  AffineExpr out(MatrixXd(A * e.constant_));
  for (const auto & [k, C] : e.terms_) { out.terms_.emplace(k, A * C); }
  return out;
}

AffineExpr operator*(const AffineExpr & e, const MatrixXd & B)
{
  if (e.cols() != B.rows()) { throw std::invalid_argument("right factor has incompatible rows"); }
  AffineExpr out(MatrixXd(e.constant_ * B));
  for (const auto & [k, C] : e.terms_) { out.terms_.emplace(k, C * B); }
  return out;
}

AffineExpr AffineExpr::scalar_times(const AffineExpr & s, const MatrixXd & A)
{
  if (s.rows() != 1 || s.cols() != 1) { throw std::invalid_argument("scalar_times needs a 1 x 1 expression"); }
  AffineExpr out(MatrixXd(s.constant_(0, 0) * A));
  for (const auto & [k, c] : s.terms_) { out.terms_.emplace(k, c(0, 0) * A); }
  return out;
}

AffineExpr AffineExpr::vstack(const std::vector<AffineExpr> & parts)
{
  if (parts.empty()) { return AffineExpr(0, 0); }
  const Index cols = parts.front().cols();
  Index rows       = 0;
  for (const auto & p : parts) {
    if (p.cols() != cols) { throw std::invalid_argument("vstack parts differ in column count"); }
    rows += p.rows();
  }
  AffineExpr out(rows, cols);
  Index r = 0;
  for (const auto & p : parts) {
    out.constant_.middleRows(r, p.rows()) = p.constant_;
    for (const auto & [k, A] : p.terms_) {
      MatrixXd full                 = MatrixXd::Zero(rows, cols);
      full.middleRows(r, p.rows()) = A;
      out.add_term(k, full);
    }
    r += p.rows();
  }
  return out;
}

}  // namespace rddpc::conic
