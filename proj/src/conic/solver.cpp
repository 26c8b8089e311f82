#include "rddpc/conic/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rddpc::conic {

std::string to_string(SolveStatus s)
{
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::numerical_failure: return "numerical_failure";
    case SolveStatus::max_iterations: return "max_iterations";
  }
  return "unknown";
}

MatrixXd SolveResult::value(const ConicProgram & program, VarId id) const
{
  if (!x) { throw std::logic_error("no primal values: solve status is " + to_string(status)); }
  return program.variable(id).value(*x);
}

namespace {

constexpr double kInf           = std::numeric_limits<double>::infinity();
constexpr double kFactorRelTol  = 1e-12;
constexpr double kFacialRelTol  = 1e-10;
constexpr double kPhaseOneSlack = 1e-7;

MatrixXd sym(const MatrixXd & A) { return 0.5 * (A + A.transpose()); }

// One LMI block F0 + sum_a x[col_var[a]] d[a] U[:, a] U[:, a]^T >= 0.
struct Block
{
  Index dim{0};
  MatrixXd F0;
  MatrixXd U;
  VectorXd d;
  std::vector<Index> col_var;
};

// min x^T P x / 2 + q^T x + c0 s.t. A x = b and every block F0 + sum x_i F_i >= 0.
struct StandardForm
{
  Index n{0};
  MatrixXd P;  ///< symmetric PSD, n x n
  VectorXd q;
  double c0{0.0};
  MatrixXd A;
  VectorXd b;
  std::vector<Block> blocks;
};

struct Piece
{
  Index var;
  MatrixXd U;
  VectorXd d;
};

void append_symmetric_factor(const MatrixXd & A, Index offset, Index dim, Index var, std::vector<Piece> & out)
{
  const Index s = A.rows();
  MatrixXd off  = A;
  off.diagonal().setZero();
  if (off.cwiseAbs().maxCoeff() == 0.0) {
    std::vector<Index> nz;
    for (Index i = 0; i < s; ++i) {
      if (A(i, i) != 0.0) { nz.push_back(i); }
    }
    if (nz.empty()) { return; }
    Piece p{var, MatrixXd::Zero(dim, static_cast<Index>(nz.size())), VectorXd(static_cast<Index>(nz.size()))};
    for (std::size_t k = 0; k < nz.size(); ++k) {
      p.U(offset + nz[k], static_cast<Index>(k)) = 1.0;
      p.d(static_cast<Index>(k))                 = A(nz[k], nz[k]);
    }
    out.push_back(std::move(p));
    return;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (A + A.transpose()));
  const VectorXd & lam = es.eigenvalues();
  const double cut     = kFactorRelTol * lam.cwiseAbs().maxCoeff();
  std::vector<Index> keep;
  for (Index i = 0; i < s; ++i) {
    if (std::abs(lam(i)) > cut) { keep.push_back(i); }
  }
  Piece p{var, MatrixXd::Zero(dim, static_cast<Index>(keep.size())), VectorXd(static_cast<Index>(keep.size()))};
  for (std::size_t k = 0; k < keep.size(); ++k) {
    p.U.col(static_cast<Index>(k)).segment(offset, s) = es.eigenvectors().col(keep[k]);
    p.d(static_cast<Index>(k))                        = lam(keep[k]);
  }
  out.push_back(std::move(p));
}

// Term placed at (roff, coff) and mirrored: E_r A E_c^T + E_c A^T E_r^T.
void append_cross_factor(const MatrixXd & A, Index roff, Index coff, Index dim, Index var, std::vector<Piece> & out)
{
  if (A.size() == 0 || A.cwiseAbs().maxCoeff() == 0.0) { return; }
  Eigen::BDCSVD<MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd & sig = svd.singularValues();
  const double cut     = kFactorRelTol * sig(0);
  Index r              = 0;
  while (r < sig.size() && sig(r) > cut) { ++r; }
  Piece p{var, MatrixXd::Zero(dim, 2 * r), VectorXd(2 * r)};
  const double h = std::sqrt(0.5);
  for (Index k = 0; k < r; ++k) {
    p.U.col(2 * k).segment(roff, A.rows())     = h * svd.matrixU().col(k);
    p.U.col(2 * k).segment(coff, A.cols())     = h * svd.matrixV().col(k);
    p.U.col(2 * k + 1).segment(roff, A.rows()) = h * svd.matrixU().col(k);
    p.U.col(2 * k + 1).segment(coff, A.cols()) = -h * svd.matrixV().col(k);
    p.d(2 * k)                                 = sig(k);
    p.d(2 * k + 1)                             = -sig(k);
  }
  out.push_back(std::move(p));
}

Block make_block(const LmiConstraint & lmi)
{
  Block B;
  B.dim = lmi.dim();
  B.F0  = MatrixXd::Zero(B.dim, B.dim);
  std::vector<Piece> pieces;
  for (const auto & e : lmi.entries) {
    const Index ro   = lmi.block_offset(e.row);
    const Index co   = lmi.block_offset(e.col);
    const MatrixXd & C = e.expr.constant();
    if (e.row == e.col) {
      B.F0.block(ro, ro, C.rows(), C.cols()) += 0.5 * (C + C.transpose());
      for (const auto & [k, A] : e.expr.terms()) { append_symmetric_factor(A, ro, B.dim, k, pieces); }
    } else {
      B.F0.block(ro, co, C.rows(), C.cols()) += C;
      B.F0.block(co, ro, C.cols(), C.rows()) += C.transpose();
      for (const auto & [k, A] : e.expr.terms()) { append_cross_factor(A, ro, co, B.dim, k, pieces); }
    }
  }
  std::stable_sort(pieces.begin(), pieces.end(), [](const Piece & a, const Piece & b) { return a.var < b.var; });
  Index R = 0;
  for (const auto & p : pieces) { R += p.U.cols(); }
  B.U.resize(B.dim, R);
  B.d.resize(R);
  B.col_var.reserve(static_cast<std::size_t>(R));
  Index c = 0;
  for (const auto & p : pieces) {
    B.U.middleCols(c, p.U.cols()) = p.U;
    B.d.segment(c, p.d.size())    = p.d;
    for (Index k = 0; k < p.U.cols(); ++k) { B.col_var.push_back(p.var); }
    c += p.U.cols();
  }
  return B;
}

LmiConstraint quadratic_as_lmi(const QuadraticConstraint & q)
{
  const Index m = q.vec.rows();
  LmiBuilder b({1, m});
  b.set(0, 0, AffineExpr::scalar(1.0));
  b.set(1, 0, q.vec);
  b.set(1, 1, AffineExpr(MatrixXd(MatrixXd::Identity(m, m))));
  return b.build(q.label);
}

// Removes the common nullspace of F0 and all coefficient matrices.
void facial_reduce(Block & B)
{
  if (B.dim <= 1) { return; }
  std::vector<Index> f0cols;
  for (Index j = 0; j < B.dim; ++j) {
    if (B.F0.col(j).cwiseAbs().maxCoeff() > 0.0) { f0cols.push_back(j); }
  }
  MatrixXd C(B.dim, static_cast<Index>(f0cols.size()) + B.U.cols());
  Index c = 0;
  for (Index j : f0cols) { C.col(c++) = B.F0.col(j).normalized(); }
  for (Index a = 0; a < B.U.cols(); ++a) {
    const double nrm = B.U.col(a).norm();
    C.col(c++)       = nrm > 0.0 ? VectorXd(B.U.col(a) / nrm) : VectorXd::Zero(B.dim);
  }
  if (C.cols() == 0) {
    B.dim = 0;
    B.F0.resize(0, 0);
    B.U.resize(0, B.U.cols());
    return;
  }
  const MatrixXd G = C * C.transpose();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(G);
  const VectorXd & lam = es.eigenvalues();
  const double cut     = kFacialRelTol * lam.maxCoeff();
  Index first          = 0;
  while (first < lam.size() && lam(first) <= cut) { ++first; }
  if (first == 0) { return; }
  const MatrixXd T = es.eigenvectors().rightCols(B.dim - first);
  B.F0             = T.transpose() * B.F0 * T;
  B.F0             = 0.5 * (B.F0 + B.F0.transpose()).eval();
  B.U              = T.transpose() * B.U;
  B.dim            = T.cols();
}

// Symmetric diagonal (Ruiz) scaling of one block; a congruence, so the
// feasible set is unchanged.
void equilibrate(Block & B)
{
  if (B.dim == 0) { return; }
  for (int it = 0; it < 8; ++it) {
    VectorXd rn = B.F0.cwiseAbs().rowwise().maxCoeff();
    for (Index a = 0; a < B.U.cols(); ++a) {
      const double w = std::abs(B.d(a)) * B.U.col(a).cwiseAbs().maxCoeff();
      rn             = rn.cwiseMax(w * B.U.col(a).cwiseAbs());
    }
    VectorXd s(B.dim);
    bool done = true;
    for (Index r = 0; r < B.dim; ++r) {
      s(r) = rn(r) > 0.0 ? 1.0 / std::sqrt(rn(r)) : 1.0;
      done = done && std::abs(s(r) - 1.0) < 0.1;
    }
    B.F0 = s.asDiagonal() * B.F0 * s.asDiagonal();
    B.U  = s.asDiagonal() * B.U;
    if (done) { break; }
  }
}

StandardForm build_standard_form(const ConicProgram & prog, std::vector<Index> & kept)
{
  const Index n = prog.num_scalars();
  StandardForm sf;
  sf.P  = MatrixXd::Zero(n, n);
  sf.q  = VectorXd::Zero(n);
  sf.c0 = prog.linear_objective().constant()(0, 0);
  for (const auto & [k, A] : prog.linear_objective().terms()) { sf.q(k) += A(0, 0); }
  // ||G x + g||^2_W per column of the term.
  for (const auto & t : prog.squared_terms()) {
    const MatrixXd W = sym(t.weight);
    for (Index c = 0; c < t.vec.cols(); ++c) {
      MatrixXd G       = MatrixXd::Zero(t.vec.rows(), n);
      const VectorXd g = t.vec.constant().col(c);
      for (const auto & [k, A] : t.vec.terms()) { G.col(k) += A.col(c); }
      const MatrixXd WG = W * G;
      sf.P += 2.0 * G.transpose() * WG;
      sf.q += 2.0 * WG.transpose() * g;
      sf.c0 += g.dot(W * g);
    }
  }
  sf.P = sym(sf.P);
  Index m = 0;
  for (const auto & e : prog.equalities()) { m += e.expr.constant().size(); }
  sf.A = MatrixXd::Zero(m, n);
  sf.b = VectorXd::Zero(m);
  Index r = 0;
  for (const auto & e : prog.equalities()) {
    const Index sz = e.expr.constant().size();
    sf.b.segment(r, sz) = -e.expr.constant().reshaped();
    for (const auto & [k, A] : e.expr.terms()) { sf.A.col(k).segment(r, sz) += A.reshaped(); }
    r += sz;
  }
  for (const auto & q : prog.quadratics()) { sf.blocks.push_back(make_block(quadratic_as_lmi(q))); }
  for (const auto & s : prog.nonnegatives()) {
    LmiBuilder nb({1});
    nb.set(0, 0, s.expr);
    sf.blocks.push_back(make_block(nb.build(s.label)));
  }
  for (const auto & l : prog.lmis()) { sf.blocks.push_back(make_block(l)); }

  // Variables that appear nowhere are fixed at zero.
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (Index j = 0; j < n; ++j) {
    used[static_cast<std::size_t>(j)] = sf.q(j) != 0.0 || (n > 0 && sf.P.col(j).cwiseAbs().maxCoeff() > 0.0)
                                        || (m > 0 && sf.A.col(j).cwiseAbs().maxCoeff() > 0.0);
  }
  for (const auto & B : sf.blocks) {
    for (Index v : B.col_var) { used[static_cast<std::size_t>(v)] = true; }
  }
  std::vector<Index> remap(static_cast<std::size_t>(n), -1);
  kept.clear();
  for (Index j = 0; j < n; ++j) {
    if (used[static_cast<std::size_t>(j)]) {
      remap[static_cast<std::size_t>(j)] = static_cast<Index>(kept.size());
      kept.push_back(j);
    }
  }
  const auto nk = static_cast<Index>(kept.size());
  StandardForm red;
  red.n  = nk;
  red.c0 = sf.c0;
  red.q.resize(nk);
  red.P.resize(nk, nk);
  red.A.resize(m, nk);
  red.b = sf.b;
  for (Index i = 0; i < nk; ++i) {
    red.q(i)     = sf.q(kept[static_cast<std::size_t>(i)]);
    red.A.col(i) = sf.A.col(kept[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < nk; ++j) { red.P(i, j) = sf.P(kept[static_cast<std::size_t>(i)], kept[static_cast<std::size_t>(j)]); }
  }
  for (auto & B : sf.blocks) {
    for (auto & v : B.col_var) { v = remap[static_cast<std::size_t>(v)]; }
    facial_reduce(B);
    if (B.dim == 0) { continue; }
    equilibrate(B);
    red.blocks.push_back(std::move(B));
  }
  return red;
}

// A(dx) for one block.
MatrixXd apply_op(const Block & B, const VectorXd & dx)
{
  VectorXd w(B.U.cols());
  for (Index a = 0; a < B.U.cols(); ++a) { w(a) = B.d(a) * dx(B.col_var[static_cast<std::size_t>(a)]); }
  MatrixXd out = B.U * w.asDiagonal() * B.U.transpose();
  return out;
}

// out_i += tr(F_i W) for one block.
void add_adjoint(const Block & B, const MatrixXd & W, VectorXd & out)
{
  if (B.U.cols() == 0) { return; }
  const MatrixXd WU = W * B.U;
  for (Index a = 0; a < B.U.cols(); ++a) {
    out(B.col_var[static_cast<std::size_t>(a)]) += B.d(a) * B.U.col(a).dot(WU.col(a));
  }
}

double max_step(const MatrixXd & X, const MatrixXd & dX)
{
  if (X.rows() == 1) { return dX(0, 0) < 0.0 ? -X(0, 0) / dX(0, 0) : kInf; }
  Eigen::LLT<MatrixXd> llt(X);
  if (llt.info() != Eigen::Success) { return 0.0; }
  const MatrixXd W  = llt.matrixL().solve(dX);
  const MatrixXd Mt = llt.matrixL().solve(W.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (Mt + Mt.transpose()), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  return lmin < 0.0 ? -1.0 / lmin : kInf;
}

struct IpmOutcome
{
  SolveStatus status{SolveStatus::numerical_failure};
  VectorXd x;
  int iterations{0};
  double pres{0.0}, dres{0.0}, gap{0.0};
  double pobj{0.0};
  bool stalled{false};
  bool reduced_accuracy{false};
};

// Upper bound on ||F_i||_F per variable, over one block.
VectorXd coefficient_norms(const Block & B, Index n)
{
  VectorXd out = VectorXd::Zero(n);
  for (Index a = 0; a < B.U.cols(); ++a) {
    out(B.col_var[static_cast<std::size_t>(a)]) += std::abs(B.d(a)) * B.U.col(a).squaredNorm();
  }
  return out;
}

/*
 * Infeasible-start primal-dual path following with the HKM direction and a
 * Mehrotra predictor-corrector. Primal: min x'Px/2 + q'x s.t.
 * S_k = F0_k + sum x_i F_ik >= 0, A x = b. Dual: max b'y - sum <F0_k, Z_k> - x'Px/2
 * s.t. sum <F_ik, Z_k> + A'y = q + P x, Z_k >= 0. Step lengths are independent
 * unless P is nonzero.
 */
IpmOutcome run_ipm(const StandardForm & sf, const SolveSettings & set)
{
  const Index n  = sf.n;
  const Index m  = sf.A.rows();
  const auto nb  = sf.blocks.size();
  Index nu_total = 0;
  double f0norm  = 0.0;
  for (const auto & B : sf.blocks) {
    nu_total += B.dim;
    f0norm += B.F0.squaredNorm();
  }
  f0norm             = std::sqrt(f0norm);
  const double bnorm = sf.b.norm();
  const double qnorm = sf.q.norm();
  const bool has_P   = sf.P.size() > 0 && sf.P.cwiseAbs().maxCoeff() > 0.0;

  // Equalities are eliminated: x = x0 + N z with A N = 0, so A x = b holds to
  // rounding on every iterate and the reduced Newton matrix N'HN is definite.
  MatrixXd N = MatrixXd::Identity(n, n);
  VectorXd x = VectorXd::Zero(n);
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> at_cod;
  if (m > 0) {
    at_cod.compute(sf.A.transpose());
    const Index r = at_cod.rank();
    const MatrixXd Qf = at_cod.householderQ();
    N = Qf.rightCols(n - r);
    x = Eigen::CompleteOrthogonalDecomposition<MatrixXd>(sf.A).solve(sf.b);
  }
  VectorXd y = VectorXd::Zero(m);
  std::vector<MatrixXd> S(nb), Z(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    const Block & B     = sf.blocks[k];
    const VectorXd fn   = coefficient_norms(B, n);
    const double rootd  = std::sqrt(static_cast<double>(B.dim));
    double ratio        = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (fn(i) > 0.0) { ratio = std::max(ratio, (1.0 + std::abs(sf.q(i))) / (1.0 + fn(i))); }
    }
    const double xi_s = std::max({10.0, rootd, B.F0.norm(), fn.size() ? fn.maxCoeff() : 0.0});
    const double xi_z = std::max({10.0, rootd, static_cast<double>(B.dim) * ratio});
    S[k]              = xi_s * MatrixXd::Identity(B.dim, B.dim);
    Z[k]              = xi_z * MatrixXd::Identity(B.dim, B.dim);
  }

  IpmOutcome out;
  IpmOutcome best;
  double best_score = kInf;
  // Ends the run: keeps the best iterate when it is accurate enough.
  auto finish = [&](SolveStatus status) {
    if (best_score <= set.stall_accept_tol) {
      best.status           = SolveStatus::optimal;
      best.reduced_accuracy = true;
      return best;
    }
    out.status = status;
    return out;
  };
  std::vector<MatrixXd> rp(nb), Sinv(nb), dS(nb), dZ(nb), dSa(nb), dZa(nb), Rk(nb);
  int small_steps = 0;
  for (int it = 0; it <= set.max_iterations; ++it) {
    double rp2    = 0.0;
    double gapc   = 0.0;
    double f0z    = 0.0;
    VectorXd adjZ = VectorXd::Zero(n);
    for (std::size_t k = 0; k < nb; ++k) {
      const Block & B = sf.blocks[k];
      rp[k]           = B.F0 + apply_op(B, x) - S[k];
      rp2 += rp[k].squaredNorm();
      gapc += (S[k].cwiseProduct(Z[k])).sum();
      f0z += (B.F0.cwiseProduct(Z[k])).sum();
      add_adjoint(B, Z[k], adjZ);
    }
    const VectorXd req = sf.A * x - sf.b;
    const VectorXd Px  = has_P ? VectorXd(sf.P * x) : VectorXd::Zero(n);
    const double xPx   = x.dot(Px);
    const VectorXd rd  = sf.q + Px - sf.A.transpose() * y - adjZ;
    const double pobj  = sf.q.dot(x) + 0.5 * xPx + sf.c0;
    const double dobj  = sf.b.dot(y) - f0z - 0.5 * xPx + sf.c0;
    const double mu    = nu_total > 0 ? gapc / static_cast<double>(nu_total) : 0.0;
    out.pres           = (std::sqrt(rp2) + req.norm()) / (1.0 + f0norm + bnorm);
    out.dres           = rd.norm() / (1.0 + qnorm);
    out.gap            = std::max(std::abs(gapc), std::abs(pobj - dobj)) / (1.0 + std::abs(pobj) + std::abs(dobj));
    out.pobj           = pobj;
    out.iterations     = it;
    out.x              = x;
    if (set.verbose) {
      std::cerr << "ipm " << it << " pobj " << pobj << " dobj " << dobj << " pres " << out.pres << " dres "
                << out.dres << " gap " << out.gap << " mu " << mu << '\n';
    }
    if (out.pres <= set.feasibility_tol && out.dres <= set.feasibility_tol && out.gap <= set.gap_tol) {
      out.status = SolveStatus::optimal;
      return out;
    }
    if (!std::isfinite(pobj) || !std::isfinite(dobj)) { return finish(SolveStatus::numerical_failure); }
    const double score = std::max({out.pres, out.dres, out.gap});
    if (score < best_score) {
      best_score = score;
      best       = out;
    }
    // Primal infeasibility certificate from diverging dual iterates.
    const double cert = sf.b.dot(y) - f0z;
    if (cert > 0.0 && (adjZ + sf.A.transpose() * y).norm() <= 1e-8 * cert && out.pres > set.feasibility_tol) {
      out.status = SolveStatus::infeasible;
      return out;
    }
    // Primal ray: feasible iterates with an objective running off to -inf.
    if (out.pres <= set.feasibility_tol && pobj < -1e12 && x.norm() > 1e10) {
      out.status = SolveStatus::unbounded;
      return out;
    }
    if (it == set.max_iterations) { break; }

    // Schur complement H_ij = <F_i, S^-1 F_j Z> of the Newton system.
    MatrixXd H = MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < nb; ++k) {
      const Block & B = sf.blocks[k];
      Eigen::LLT<MatrixXd> llt(S[k]);
      if (llt.info() != Eigen::Success) { return finish(SolveStatus::numerical_failure); }
      // Gram forms keep X and Y positive semidefinite in floating point near the boundary.
      const MatrixXd Linv = llt.matrixL().solve(MatrixXd::Identity(B.dim, B.dim));
      Sinv[k]             = Linv.transpose() * Linv;
      if (B.U.cols() == 0) { continue; }
      Eigen::LLT<MatrixXd> zllt(Z[k]);
      if (zllt.info() != Eigen::Success) { return finish(SolveStatus::numerical_failure); }
      const MatrixXd GS = Linv * B.U;
      const MatrixXd GZ = zllt.matrixU() * B.U;
      const MatrixXd X  = GS.transpose() * GS;
      const MatrixXd Y  = GZ.transpose() * GZ;
      const Index R    = B.U.cols();
      for (Index b = 0; b < R; ++b) {
        const Index vb  = B.col_var[static_cast<std::size_t>(b)];
        const double db = B.d(b);
        for (Index a = 0; a < R; ++a) {
          H(B.col_var[static_cast<std::size_t>(a)], vb) += B.d(a) * db * X(a, b) * Y(a, b);
        }
      }
    }
    H = sym(H);
    if (has_P) { H += sf.P; }
    const MatrixXd Hz   = sym(N.transpose() * H * N);
    const double hscale = Hz.size() ? std::max(1.0, Hz.diagonal().cwiseAbs().maxCoeff()) : 1.0;
    MatrixXd K          = Hz;
    K.diagonal().array() += 1e-14 * hscale;
    Eigen::LLT<MatrixXd> hllt(K);
    if (hllt.info() != Eigen::Success) {
      K.diagonal().array() += 1e-10 * hscale;
      hllt.compute(K);
      if (hllt.info() != Eigen::Success) { return finish(SolveStatus::numerical_failure); }
    }
    // Newton step restricted to the null space of A, with one refinement pass.
    auto solve_kkt = [&](const VectorXd & rhs) -> VectorXd {
      const VectorXd rz = N.transpose() * rhs;
      VectorXd dz       = hllt.solve(rz);
      dz += hllt.solve(VectorXd(rz - Hz * dz));
      return N * dz;
    };
    auto direction = [&](double sigma_mu, bool corrector, VectorXd & dx, VectorXd & dy) {
      VectorXd g = VectorXd::Zero(n);
      for (std::size_t k = 0; k < nb; ++k) {
        Rk[k] = -Z[k] - Sinv[k] * rp[k] * Z[k];
        if (sigma_mu > 0.0) { Rk[k] += sigma_mu * Sinv[k]; }
        if (corrector) { Rk[k] -= Sinv[k] * dSa[k] * dZa[k]; }
        Rk[k] = sym(Rk[k]);
        add_adjoint(sf.blocks[k], Rk[k], g);
      }
      const VectorXd rhs = g - rd;
      dx                 = solve_kkt(rhs);
      dy                 = m > 0 ? VectorXd(at_cod.solve(VectorXd(H * dx - rhs))) : VectorXd();
      for (std::size_t k = 0; k < nb; ++k) {
        const MatrixXd Adx = apply_op(sf.blocks[k], dx);
        dS[k]              = sym(Adx + rp[k]);
        dZ[k]              = sym(Rk[k] - Sinv[k] * Adx * Z[k]);
      }
    };
    auto step_lengths = [&](double & ap, double & ad) {
      ap = kInf;
      ad = kInf;
      for (std::size_t k = 0; k < nb; ++k) {
        ap = std::min(ap, max_step(S[k], dS[k]));
        ad = std::min(ad, max_step(Z[k], dZ[k]));
      }
    };

    VectorXd dx, dy;
    direction(0.0, false, dx, dy);
    double ap = 0.0, ad = 0.0;
    step_lengths(ap, ad);
    ap            = std::min(1.0, ap);
    ad            = std::min(1.0, ad);
    double mu_aff = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
      mu_aff += ((S[k] + ap * dS[k]).cwiseProduct(Z[k] + ad * dZ[k])).sum();
      dSa[k] = dS[k];
      dZa[k] = dZ[k];
    }
    mu_aff /= std::max<double>(1.0, static_cast<double>(nu_total));
    const double expon = std::max(1.0, 3.0 * std::min(ap, ad) * std::min(ap, ad));
    const double sigma = mu > 0.0 ? std::clamp(std::pow(std::max(0.0, mu_aff) / mu, expon), 0.0, 1.0) : 0.0;
    direction(sigma * mu, true, dx, dy);
    step_lengths(ap, ad);
    const double frac = std::max(set.step_fraction, 0.9 + 0.09 * std::min({1.0, ap, ad}));
    ap                = std::min(1.0, std::min(frac, set.step_fraction) * ap);
    ad                = std::min(1.0, std::min(frac, set.step_fraction) * ad);
    // The quadratic term couples the primal step into dual feasibility.
    if (has_P) { ap = ad = std::min(ap, ad); }
    if (!std::isfinite(ap) || !std::isfinite(ad) || ap <= 0.0 || ad <= 0.0) {
      out.stalled = true;
      return finish(SolveStatus::numerical_failure);
    }
    if (set.verbose) { std::cerr << "    step p " << ap << " d " << ad << " sigma " << sigma << '\n'; }
    x += ap * dx;
    y += ad * dy;
    for (std::size_t k = 0; k < nb; ++k) {
      S[k] = sym(S[k] + ap * dS[k]);
      Z[k] = sym(Z[k] + ad * dZ[k]);
    }
    small_steps = std::max(ap, ad) < 1e-7 ? small_steps + 1 : 0;
    if (small_steps >= 5) {
      out.stalled = true;
      return finish(SolveStatus::numerical_failure);
    }
  }
  return finish(SolveStatus::max_iterations);
}

// max s s.t. F_k(x) - s I >= 0, s <= 1. A clearly negative optimum certifies
// that the original LMIs have no feasible point.
bool phase_one_infeasible(const StandardForm & sf, const SolveSettings & set)
{
  StandardForm p1;
  const Index n    = sf.n;
  p1.n             = n + 1;
  p1.P             = MatrixXd::Zero(n + 1, n + 1);
  p1.q             = VectorXd::Zero(n + 1);
  p1.q(n)          = -1.0;
  p1.A             = MatrixXd::Zero(sf.A.rows(), n + 1);
  p1.A.leftCols(n) = sf.A;
  p1.b             = sf.b;
  for (const auto & B : sf.blocks) {
    Block C = B;
    C.U.conservativeResize(B.dim, B.U.cols() + B.dim);
    C.U.rightCols(B.dim) = MatrixXd::Identity(B.dim, B.dim);
    C.d.conservativeResize(B.U.cols() + B.dim);
    C.d.tail(B.dim).setConstant(-1.0);
    for (Index i = 0; i < B.dim; ++i) { C.col_var.push_back(n); }
    p1.blocks.push_back(std::move(C));
  }
  Block cap;
  cap.dim = 1;
  cap.F0  = MatrixXd::Ones(1, 1);
  cap.U   = MatrixXd::Ones(1, 1);
  cap.d   = -VectorXd::Ones(1);
  cap.col_var.push_back(n);
  p1.blocks.push_back(std::move(cap));
  SolveSettings s1   = set;
  s1.verbose         = false;
  const IpmOutcome o = run_ipm(p1, s1);
  const bool usable  = o.status == SolveStatus::optimal || (o.pres < 1e-6 && o.dres < 1e-6 && o.gap < 1e-6);
  return usable && o.x(n) < -kPhaseOneSlack;
}

}  // namespace

SolveResult solve(const ConicProgram & program, const SolveSettings & settings)
{
  const auto t0 = std::chrono::steady_clock::now();
  program.validate();
  SolveResult res;
  std::vector<Index> kept;
  const StandardForm sf = build_standard_form(program, kept);
  IpmOutcome o          = run_ipm(sf, settings);
  if (o.status != SolveStatus::optimal && o.status != SolveStatus::unbounded && o.status != SolveStatus::infeasible
      && o.pres > settings.feasibility_tol && phase_one_infeasible(sf, settings)) {
    o.status = SolveStatus::infeasible;
  }
  res.status          = o.status;
  res.iterations      = o.iterations;
  res.primal_residual = o.pres;
  res.dual_residual   = o.dres;
  res.relative_gap    = o.gap;
  res.reduced_accuracy = o.reduced_accuracy;
  if (o.status == SolveStatus::optimal) {
    VectorXd x = VectorXd::Zero(program.num_scalars());
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (kept[i] < program.num_scalars()) { x(kept[i]) = o.x(static_cast<Index>(i)); }
    }
    res.objective = program.objective_value(x);
    res.x         = std::move(x);
  } else {
    res.objective = std::numeric_limits<double>::quiet_NaN();
  }
  res.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace rddpc::conic
