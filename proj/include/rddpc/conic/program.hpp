#pragma once

/**
 * @file
 * @brief Solver-independent representation of a convex program with a convex
 * quadratic objective, affine equalities, ||v(x)||^2 <= 1 constraints and
 * linear matrix inequalities affine in the decision variables.
 */

#include "rddpc/conic/affine.hpp"

#include <string>
#include <vector>

namespace rddpc::conic {

using VarId = Index;

/// A named block of scalar decision variables; structural zeros carry index -1.
struct Variable
{
  std::string name;
  Index rows{0};
  Index cols{0};
  std::vector<Index> index_map;  ///< column-major, -1 for structural zeros

  Index index(Index i, Index j) const { return index_map[static_cast<std::size_t>(i + j * rows)]; }
  Index free_count() const;
  AffineExpr expr() const;
  MatrixXd value(const VectorXd & x) const;
};

/// Symmetric block matrix, stored as its lower block triangle.
struct LmiConstraint
{
  struct Entry
  {
    Index row{0};
    Index col{0};
    AffineExpr expr;
  };

  std::string label;
  std::vector<Index> block_sizes;
  std::vector<Entry> entries;  ///< row >= col

  Index dim() const;
  Index block_offset(Index b) const;
  MatrixXd evaluate(const VectorXd & x) const;
};

/// Collects the blocks of one LMI; upper-triangle blocks are stored transposed.
class LmiBuilder
{
public:
  explicit LmiBuilder(std::vector<Index> block_sizes);

  /// Throws if the shape is wrong or a diagonal block is not symmetric.
  LmiBuilder & set(Index row, Index col, const AffineExpr & expr);
  LmiConstraint build(std::string label) const;

private:
  std::vector<Index> sizes_;
  std::vector<LmiConstraint::Entry> entries_;
};

struct QuadraticConstraint
{
  std::string label;
  AffineExpr vec;  ///< ||vec(x)||^2 <= 1
};

struct EqualityConstraint
{
  std::string label;
  AffineExpr expr;  ///< expr(x) = 0
};

struct SquaredNormTerm
{
  AffineExpr vec;
  MatrixXd weight;  ///< symmetric PSD
};

class ConicProgram
{
public:
  VarId add_variable(std::string name, Index rows, Index cols = 1);
  /// Only entries with free(i, j) true become decision variables.
  VarId add_structured_variable(std::string name, const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> & free);

  const Variable & variable(VarId id) const { return vars_.at(static_cast<std::size_t>(id)); }
  AffineExpr expr(VarId id) const { return variable(id).expr(); }
  const std::vector<Variable> & variables() const { return vars_; }
  Index num_scalars() const { return n_; }

  /// Adds a 1 x 1 affine term to the objective.
  void add_linear_objective(const AffineExpr & e);
  /// Adds ||v||^2_W to the objective.
  void add_squared_norm_objective(const AffineExpr & v, const MatrixXd & weight);

  void add_equality(const AffineExpr & e, std::string label);
  void add_quadratic(const AffineExpr & v, std::string label);
  /// Scalar expression >= 0.
  void add_nonnegative(const AffineExpr & s, std::string label);
  void add_lmi(LmiConstraint lmi);

  const AffineExpr & linear_objective() const { return linear_; }
  const std::vector<SquaredNormTerm> & squared_terms() const { return squares_; }
  const std::vector<EqualityConstraint> & equalities() const { return equalities_; }
  const std::vector<QuadraticConstraint> & quadratics() const { return quadratics_; }
  const std::vector<EqualityConstraint> & nonnegatives() const { return nonnegatives_; }
  const std::vector<LmiConstraint> & lmis() const { return lmis_; }

  double objective_value(const VectorXd & x) const;

  /// Throws std::invalid_argument on undeclared variables or malformed blocks.
  void validate() const;

  /// Variable table followed by the constraint list.
  std::string dump() const;

private:
  void check_indices(const AffineExpr & e, const std::string & where) const;

  std::vector<Variable> vars_;
  Index n_{0};
  AffineExpr linear_{1, 1};
  std::vector<SquaredNormTerm> squares_;
  std::vector<EqualityConstraint> equalities_;
  std::vector<QuadraticConstraint> quadratics_;
  std::vector<EqualityConstraint> nonnegatives_;  ///< expr(x) >= 0
  std::vector<LmiConstraint> lmis_;
};

}  // namespace rddpc::conic
