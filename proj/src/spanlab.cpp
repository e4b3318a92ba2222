#include "lsn/spanlab.hpp"

#include <Eigen/SVD>
#include <stdexcept>

namespace lsn::spanlab {

void VectorStack::append(const Eigen::VectorXd& v, const std::string& label) {
  if (cols() > 0 && v.size() != vectors.rows())
    throw std::invalid_argument("VectorStack: vector length " + std::to_string(v.size()) +
                                " does not match stack rows " + std::to_string(vectors.rows()));
  vectors.conservativeResize(v.size(), vectors.cols() + 1);
  vectors.col(vectors.cols() - 1) = v;
  labels.push_back(label);
}

VectorStack VectorStack::hstack(const std::vector<VectorStack>& stacks) {
  VectorStack out;
  for (const auto& s : stacks)
    for (int j = 0; j < s.cols(); ++j) out.append(s.vectors.col(j), s.labels[j]);
  return out;
}

LeastSquaresResult least_squares(const VectorStack& stack, const Eigen::VectorXd& y) {
  LeastSquaresResult r;
  if (stack.cols() == 0) {
    r.residual = y.norm();
    return r;
  }
  if (stack.rows() != y.size())
    throw std::invalid_argument("least_squares: y length " + std::to_string(y.size()) +
                                " does not match column length " + std::to_string(stack.rows()));
  Eigen::BDCSVD<Eigen::MatrixXd> svd(stack.vectors,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  r.lambda = svd.solve(y);
  r.residual = (stack.vectors * r.lambda - y).norm();
  return r;
}

int numerical_rank(const Eigen::MatrixXd& m, double tol) {
  if (tol <= 0) throw std::invalid_argument("numerical_rank: tol must be > 0");
  if (m.size() == 0) return 0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0) return 0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > tol * sv(0)) ++rank;
  return rank;
}

int numerical_rank(const VectorStack& stack, double tol) {
  return numerical_rank(stack.vectors, tol);
}

namespace {

// Orthonormal basis of the column space, rank-revealing at tol.
Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& m, double tol) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(0) > 0 && sv(i) > tol * sv(0)) ++rank;
  return svd.matrixU().leftCols(rank);
}

}  // namespace

DimSumResult dim_sum_check(const VectorStack& u, const VectorStack& v, double tol) {
  if (u.cols() > 0 && v.cols() > 0 && u.rows() != v.rows())
    throw std::invalid_argument("dim_sum_check: stacks have different vector lengths");
  DimSumResult r;
  r.dim_u = numerical_rank(u, tol);
  r.dim_v = numerical_rank(v, tol);
  Eigen::MatrixXd joint(u.rows(), u.cols() + v.cols());
  joint << u.vectors, v.vectors;
  r.dim_sum = numerical_rank(joint, tol);

  // Independent intersection estimate: principal angles between orthonormal
  // bases; cos(theta) ~ 1 marks a shared direction.
  const Eigen::MatrixXd qu = orthonormal_basis(u.vectors, tol);
  const Eigen::MatrixXd qv = orthonormal_basis(v.vectors, tol);
  int inter = 0;
  if (qu.cols() > 0 && qv.cols() > 0) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(qu.transpose() * qv);
    const auto& cosines = svd.singularValues();
    for (int i = 0; i < cosines.size(); ++i)
      if (cosines(i) > 1.0 - 1e-6) ++inter;
  }
  r.dim_intersection = inter;
  r.holds = (r.dim_sum == r.dim_u + r.dim_v - r.dim_intersection);
  return r;
}

ResidualProfile residual_profile(const std::vector<VectorStack>& stages,
                                 const Eigen::VectorXd& y) {
  if (stages.empty()) throw std::invalid_argument("residual_profile: need at least one stage");
  ResidualProfile out;
  VectorStack cumulative;
  for (const auto& s : stages) {
    out.per_stage.push_back(least_squares(s, y).residual);
    for (int j = 0; j < s.cols(); ++j) cumulative.append(s.vectors.col(j), s.labels[j]);
    out.cumulative.push_back(least_squares(cumulative, y).residual);
  }
  return out;
}

Eigen::VectorXd flatten(const TensorD& t, int n, int c) {
  const std::int64_t hw = static_cast<std::int64_t>(t.shape.h) * t.shape.w;
  Eigen::VectorXd v(hw);
  const double* src = t.ptr() + (static_cast<std::int64_t>(n) * t.shape.c + c) * hw;
  for (std::int64_t i = 0; i < hw; ++i) v(i) = src[i];
  return v;
}

Eigen::VectorXd flatten_mask(const TensorF& t) {
  Eigen::VectorXd v(t.count());
  for (std::int64_t i = 0; i < t.count(); ++i) v(i) = t.data[i] > 0.5f ? 1.0 : 0.0;
  return v;
}

}  // namespace lsn::spanlab
