#include "rddpc/conic/program.hpp"

#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rddpc::conic {

Index Variable::free_count() const
{
  Index n = 0;
  for (Index k : index_map) { n += k >= 0 ? 1 : 0; }
  return n;
}

AffineExpr Variable::expr() const
{
  AffineExpr e(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      const Index k = index(i, j);
      if (k < 0) { continue; }
      MatrixXd unit = MatrixXd::Zero(rows, cols);
      unit(i, j)    = 1.0;
      e.add_term(k, unit);
    }
  }
  return e;
}

MatrixXd Variable::value(const VectorXd & x) const
{
  MatrixXd out = MatrixXd::Zero(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      const Index k = index(i, j);
      if (k >= 0) { out(i, j) = x(k); }
    }
  }
  return out;
}

Index LmiConstraint::dim() const { return std::accumulate(block_sizes.begin(), block_sizes.end(), Index{0}); }

Index LmiConstraint::block_offset(Index b) const
{
  return std::accumulate(block_sizes.begin(), block_sizes.begin() + b, Index{0});
}

MatrixXd LmiConstraint::evaluate(const VectorXd & x) const
{
  const Index n = dim();
  MatrixXd F   = MatrixXd::Zero(n, n);
  for (const auto & e : entries) {
    const MatrixXd v = e.expr.evaluate(x);
    const Index r0   = block_offset(e.row);
    const Index c0   = block_offset(e.col);
    F.block(r0, c0, v.rows(), v.cols()) = v;
    if (e.row != e.col) { F.block(c0, r0, v.cols(), v.rows()) = v.transpose(); }
  }
  return F;
}

LmiBuilder::LmiBuilder(std::vector<Index> block_sizes) : sizes_(std::move(block_sizes))
{
  for (Index s : sizes_) {
    if (s < 0) { throw std::invalid_argument("negative LMI block size"); }
  }
}

LmiBuilder & LmiBuilder::set(Index row, Index col, const AffineExpr & expr)
{
  const auto nb = static_cast<Index>(sizes_.size());
  if (row < 0 || col < 0 || row >= nb || col >= nb) { throw std::out_of_range("LMI block index out of range"); }
  if (row < col) { return set(col, row, expr.transpose()); }
  if (expr.rows() != sizes_[static_cast<std::size_t>(row)] || expr.cols() != sizes_[static_cast<std::size_t>(col)]) {
    throw std::invalid_argument("LMI block has the wrong shape");
  }
  if (row == col) {
    bool sym = is_symmetric(expr.constant(), 1e-9);
    for (const auto & [k, A] : expr.terms()) { sym = sym && is_symmetric(A, 1e-9); }
    if (!sym) { throw std::invalid_argument("diagonal LMI block is not symmetric"); }
  }
  for (auto & e : entries_) {
    if (e.row == row && e.col == col) {
      e.expr = expr;
      return *this;
    }
  }
  entries_.push_back({row, col, expr});
  return *this;
}

LmiConstraint LmiBuilder::build(std::string label) const { return {std::move(label), sizes_, entries_}; }

VarId ConicProgram::add_variable(std::string name, Index rows, Index cols)
{
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> all(rows, cols);
  all.setConstant(true);
  return add_structured_variable(std::move(name), all);
}

VarId ConicProgram::add_structured_variable(
  std::string name, const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> & free)
{
  Variable v;
  v.name = std::move(name);
  v.rows = free.rows();
  v.cols = free.cols();
  v.index_map.assign(static_cast<std::size_t>(v.rows * v.cols), -1);
  for (Index j = 0; j < v.cols; ++j) {
    for (Index i = 0; i < v.rows; ++i) {
      if (free(i, j)) { v.index_map[static_cast<std::size_t>(i + j * v.rows)] = n_++; }
    }
  }
  vars_.push_back(std::move(v));
  return static_cast<VarId>(vars_.size()) - 1;
}

void ConicProgram::check_indices(const AffineExpr & e, const std::string & where) const
{
  if (e.max_index() >= n_) { throw std::invalid_argument(where + " references an undeclared variable"); }
}

void ConicProgram::add_linear_objective(const AffineExpr & e)
{
  if (e.rows() != 1 || e.cols() != 1) { throw std::invalid_argument("linear objective term must be scalar"); }
  check_indices(e, "objective");
  linear_ += e;
}

void ConicProgram::add_squared_norm_objective(const AffineExpr & v, const MatrixXd & weight)
{
  if (v.cols() != 1 || weight.rows() != v.rows() || weight.cols() != v.rows()) {
    throw std::invalid_argument("squared-norm objective term has inconsistent shapes");
  }
  if (!is_symmetric(weight, 1e-10) || (weight.size() > 0 && min_eigenvalue(weight) < -1e-12)) {
    throw std::invalid_argument("squared-norm weight must be symmetric positive semidefinite");
  }
  check_indices(v, "objective");
  squares_.push_back({v, weight});
}

void ConicProgram::add_equality(const AffineExpr & e, std::string label)
{
  check_indices(e, label);
  equalities_.push_back({std::move(label), e});
}

void ConicProgram::add_quadratic(const AffineExpr & v, std::string label)
{
  if (v.cols() != 1) { throw std::invalid_argument("quadratic constraint needs a column vector"); }
  check_indices(v, label);
  quadratics_.push_back({std::move(label), v});
}

void ConicProgram::add_nonnegative(const AffineExpr & s, std::string label)
{
  if (s.rows() != 1 || s.cols() != 1) { throw std::invalid_argument("nonnegativity needs a scalar"); }
  check_indices(s, label);
  nonnegatives_.push_back({std::move(label), s});
}

void ConicProgram::add_lmi(LmiConstraint lmi)
{
  for (const auto & e : lmi.entries) { check_indices(e.expr, lmi.label); }
  lmis_.push_back(std::move(lmi));
}

double ConicProgram::objective_value(const VectorXd & x) const
{
  double val = linear_.evaluate(x)(0, 0);
  for (const auto & t : squares_) {
    const VectorXd v = t.vec.evaluate(x);
    val += v.dot(t.weight * v);
  }
  return val;
}

void ConicProgram::validate() const
{
  check_indices(linear_, "objective");
  for (const auto & t : squares_) { check_indices(t.vec, "objective"); }
  for (const auto & e : equalities_) { check_indices(e.expr, e.label); }
  for (const auto & q : quadratics_) { check_indices(q.vec, q.label); }
  for (const auto & s : nonnegatives_) { check_indices(s.expr, s.label); }
  for (const auto & l : lmis_) {
    const auto nb = static_cast<Index>(l.block_sizes.size());
    for (const auto & e : l.entries) {
      if (e.row < e.col || e.row >= nb) { throw std::invalid_argument(l.label + ": entry outside the lower triangle"); }
      if (e.expr.rows() != l.block_sizes[static_cast<std::size_t>(e.row)]
          || e.expr.cols() != l.block_sizes[static_cast<std::size_t>(e.col)]) {
        throw std::invalid_argument(l.label + ": block shape mismatch");
      }
      check_indices(e.expr, l.label);
    }
  }
}

std::string ConicProgram::dump() const
{
  std::ostringstream os;
  os << "variables (" << n_ << " scalars)\n";
  for (const auto & v : vars_) {
    os << "  " << v.name << " : " << v.rows << "x" << v.cols << ", " << v.free_count() << " free\n";
  }
  os << "objective: linear terms " << linear_.terms().size() << ", squared-norm terms " << squares_.size() << '\n';
  os << "equalities (" << equalities_.size() << ")\n";
  for (const auto & e : equalities_) { os << "  " << e.label << " : " << e.expr.rows() << " rows\n"; }
  os << "quadratic constraints (" << quadratics_.size() << ")\n";
  for (const auto & q : quadratics_) { os << "  " << q.label << " : ||v||^2 <= 1, v in R^" << q.vec.rows() << '\n'; }
  os << "nonnegativity constraints (" << nonnegatives_.size() << ")\n";
  for (const auto & s : nonnegatives_) { os << "  " << s.label << " >= 0\n"; }
  os << "LMIs (" << lmis_.size() << ")\n";
  for (const auto & l : lmis_) {
    os << "  " << l.label << " : " << l.dim() << "x" << l.dim() << " blocks [";
    for (std::size_t i = 0; i < l.block_sizes.size(); ++i) { os << (i ? "," : "") << l.block_sizes[i]; }
    os << "]\n";
  }
  return os.str();
}

}  // namespace rddpc::conic
