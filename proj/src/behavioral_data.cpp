#include "rddpc/behavioral_data.hpp"

#include <Eigen/SVD>

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace rddpc {

MatrixXd build_hankel(const MatrixXd & seq, Index depth)
{
  const Index d = seq.rows();
  const Index N = seq.cols();
  if (depth < 1) { throw std::invalid_argument("Hankel depth must be at least 1"); }
  if (N < depth) { throw std::invalid_argument("sequence shorter than the Hankel depth"); }
  const Index cols = N - depth + 1;
  MatrixXd H(d * depth, cols);
  for (Index i = 0; i < depth; ++i) { H.middleRows(i * d, d) = seq.middleCols(i, cols); }
  return H;
}

bool is_persistently_exciting(const MatrixXd & seq, Index order)
{
  if (order < 1 || seq.cols() < order) { return false; }
  const MatrixXd H = build_hankel(seq, order);
  if (H.rows() > H.cols()) { return false; }
  return numerical_rank(H) == H.rows();
}

MatrixXd split_future(const MatrixXd & predictor, const DataDims & dims)
{
  return predictor.middleCols(dims.rows_up(), dims.rows_uf());
}

MatrixXd split_past(const MatrixXd & predictor, const DataDims & dims)
{
  MatrixXd out(predictor.rows(), dims.rows_past());
  out.leftCols(dims.rows_up())  = predictor.leftCols(dims.rows_up());
  out.rightCols(dims.rows_yp()) = predictor.middleCols(dims.rows_up() + dims.rows_uf(), dims.rows_yp());
  return out;
}

namespace {

void check_window(const DataDims & dims, const VectorXd & u_p, const VectorXd & u_f, const VectorXd & y_p)
{
  if (u_p.size() != dims.rows_up() || u_f.size() != dims.rows_uf() || y_p.size() != dims.rows_yp()) {
    throw std::invalid_argument("past/future window lengths do not match the data dimensions");
  }
}

VectorXd stack_window(const VectorXd & u_p, const VectorXd & u_f, const VectorXd & y_p)
{
  return vcat({u_p, u_f, y_p});
}

}  // namespace

VectorXd BehavioralData::predict(const VectorXd & u_p, const VectorXd & u_f, const VectorXd & y_p) const
{
  check_window(dims, u_p, u_f, y_p);
  return Predictor * stack_window(u_p, u_f, y_p);
}

VectorXd ReducedData::predict(const VectorXd & u_p, const VectorXd & u_f, const VectorXd & y_p) const
{
  check_window(dims, u_p, u_f, y_p);
  return Predictor * stack_window(u_p, u_f, y_p);
}

BehavioralData from_blocks(
  const MatrixXd & Up, const MatrixXd & Uf, const MatrixXd & Yp, const MatrixXd & Yf, Index nu, Index ny)
{
  if (nu < 1 || ny < 1) { throw std::invalid_argument("n_u and n_y must be positive"); }
  const Index cols = Uf.cols();
  if (Up.cols() != cols || Yp.cols() != cols || Yf.cols() != cols || cols == 0) {
    throw std::invalid_argument("Hankel blocks must share a nonzero column count");
  }
  if (Up.rows() % nu != 0 || Uf.rows() % nu != 0 || Yp.rows() % ny != 0 || Yf.rows() % ny != 0) {
    throw std::invalid_argument("block row counts must be multiples of n_u / n_y");
  }
  BehavioralData d;
  d.dims.nu = nu;
  d.dims.ny = ny;
  d.dims.Lp = Up.rows() / nu;
  d.dims.Lf = Uf.rows() / nu;
  if (Yp.rows() / ny != d.dims.Lp || Yf.rows() / ny != d.dims.Lf || d.dims.Lf < 1) {
    throw std::invalid_argument("input and output block horizons disagree");
  }
  d.dims.N = cols + d.dims.L() - 1;
  d.Up     = Up;
  d.Uf     = Uf;
  d.Yp     = Yp;
  d.Yf     = Yf;
  d.Phi.resize(d.dims.rows_phi(), cols);
  d.Phi << Up, Uf, Yp;

  const TruncatedSvd svd = truncated_svd(d.Phi);
  d.phi_rank             = svd.rank();
  d.PhiPinv              = svd.V * svd.sigma.cwiseInverse().asDiagonal() * svd.U.transpose();
  d.PhiPerp              = MatrixXd::Identity(cols, cols);
  d.PhiPerp.noalias() -= svd.V * svd.V.transpose();
  d.PhiPerp   = 0.5 * (d.PhiPerp + d.PhiPerp.transpose()).eval();
  d.M         = Yf * d.PhiPerp;
  d.Predictor = Yf * d.PhiPinv;
  d.Mf        = split_future(d.Predictor, d.dims);
  d.Mp        = split_past(d.Predictor, d.dims);
  return d;
}

BehavioralData partition(const sim::Trajectory & data, Index Lp, Index Lf, std::optional<Index> nx)
{
  if (Lp < 0 || Lf < 1) { throw std::invalid_argument("horizons must satisfy Lp >= 0, Lf >= 1"); }
  const Index L = Lp + Lf;
  const Index N = data.length();
  if (N < L) { throw std::invalid_argument("trajectory shorter than Lp + Lf"); }
  if (data.outputs.cols() != N) { throw std::invalid_argument("input and output sequences differ in length"); }
  const Index nu = data.nu();
  const Index ny = data.ny();
  const MatrixXd Ud = build_hankel(data.inputs, L);
  const MatrixXd Yd = build_hankel(data.outputs, L);
  BehavioralData d  = from_blocks(
    Ud.topRows(nu * Lp), Ud.bottomRows(nu * Lf), Yd.topRows(ny * Lp), Yd.bottomRows(ny * Lf), nu, ny);
  d.dims.N = N;
  const Index order = L + nx.value_or(0);
  if (!is_persistently_exciting(data.inputs, order)) {
    d.warnings.push_back("input is not persistently exciting of order " + std::to_string(order));
  }
  return d;
}

ReducedData svd_reduce(const BehavioralData & data)
{
  const DataDims & dims = data.dims;
  const Index k         = dims.rows_phi() + dims.rows_yf();
  const Index cols      = data.Phi.cols();
  MatrixXd stacked(k, cols);
  stacked << data.Phi, data.Yf;
  if (stacked.cwiseAbs().maxCoeff() == 0.0) { throw std::runtime_error("stacked data matrix is identically zero"); }

  Eigen::BDCSVD<MatrixXd> svd(stacked, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) { throw std::runtime_error("SVD of the stacked data matrix failed"); }
  const VectorXd & s = svd.singularValues();
  const double tol   = rank_tolerance(s(0), k, cols);
  Index r            = 0;
  while (r < s.size() && s(r) > tol) { ++r; }

  ReducedData out;
  out.dims         = dims;
  out.stacked_rank = r;
  MatrixXd Wt      = MatrixXd::Zero(k, k);
  Wt.leftCols(r)   = svd.matrixU().leftCols(r) * s.head(r).asDiagonal();
  out.V1           = MatrixXd::Zero(cols, k);
  out.V1.leftCols(r) = svd.matrixV().leftCols(r);
  out.W1t            = Wt.topRows(dims.rows_phi());
  out.W2t            = Wt.bottomRows(dims.rows_yf());

  // The zeroed directions are exact nullspace directions of W1t, so the
  // projector is block diagonal: the kept part from the retained columns and
  // an identity on the rest. This keeps Mt exactly zero on noise-free data.
  const MatrixXd W1r    = out.W1t.leftCols(r);
  const MatrixXd nullr  = null_basis(W1r);
  out.PhiPerpT          = MatrixXd::Zero(k, k);
  out.PhiPerpT.topLeftCorner(r, r) = nullr * nullr.transpose();
  out.PhiPerpT.bottomRightCorner(k - r, k - r).setIdentity();
  out.Mt = out.W2t * out.PhiPerpT;

  out.Predictor = out.W2t.leftCols(r) * pinv(W1r);
  out.MfT       = split_future(out.Predictor, dims);
  out.MpT       = split_past(out.Predictor, dims);
  return out;
}

VectorXd spc_predict(const BehavioralData & data, const VectorXd & u_p, const VectorXd & u_f, const VectorXd & y_p)
{
  return data.predict(u_p, u_f, y_p);
}

VectorXd spc_predict(const ReducedData & data, const VectorXd & u_p, const VectorXd & u_f, const VectorXd & y_p)
{
  return data.predict(u_p, u_f, y_p);
}

DeviationFactor deviation_factor(const MatrixXd & M, double reference_sigma)
{
  const TruncatedSvd svd = truncated_svd(M, reference_sigma);
  return {svd.U * svd.sigma.asDiagonal(), svd.V};
}

void write_matrix_csv(const MatrixXd & A, const std::string & path)
{
  std::ofstream os(path);
  if (!os) { throw std::runtime_error("cannot write " + path); }
  os << "# " << A.rows() << ',' << A.cols() << '\n' << std::setprecision(17);
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < A.cols(); ++j) { os << (j ? "," : "") << A(i, j); }
    os << '\n';
  }
}

MatrixXd read_matrix_csv(const std::string & path)
{
  std::ifstream in(path);
  if (!in) { throw std::runtime_error("cannot open " + path); }
  std::string line;
  Index rows = 0, cols = 0;
  char hash = 0, comma = 0;
  if (!std::getline(in, line)) { throw std::runtime_error(path + ": missing shape header"); }
  std::istringstream hs(line);
  if (!(hs >> hash >> rows >> comma >> cols) || hash != '#' || comma != ',') {
    throw std::runtime_error(path + ": malformed shape header");
  }
  MatrixXd A(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) { throw std::runtime_error(path + ": truncated matrix"); }
    std::stringstream ss(line);
    std::string cell;
    for (Index j = 0; j < cols; ++j) {
      if (!std::getline(ss, cell, ',')) { throw std::runtime_error(path + ": short row"); }
      A(i, j) = std::stod(cell);
    }
  }
  return A;
}

}  // namespace rddpc
