#pragma once

// Numerical verification of the linear-span view of skeleton detection:
// least-squares reconstruction of the ground truth against stacks of
// flattened feature maps, rank and subspace-dimension arithmetic, and the
// per-stage vs cumulative residual comparison. Everything here runs in
// 64-bit regardless of training precision.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "lsn/tensor.hpp"

namespace lsn::spanlab {

struct VectorStack {
  Eigen::MatrixXd vectors;          // one column per spanning vector
  std::vector<std::string> labels;  // provenance per column

  int cols() const { return static_cast<int>(vectors.cols()); }
  int rows() const { return static_cast<int>(vectors.rows()); }
  void append(const Eigen::VectorXd& v, const std::string& label);
  static VectorStack hstack(const std::vector<VectorStack>& stacks);
};

struct LeastSquaresResult {
  Eigen::VectorXd lambda;
  double residual = 0;  // minimal ||F*lambda - y||_2
};

// SVD-based minimum-norm solve; an empty stack yields lambda = [] and
// residual = ||y||.
LeastSquaresResult least_squares(const VectorStack& stack, const Eigen::VectorXd& y);

// Count of singular values above tol * largest singular value.
int numerical_rank(const VectorStack& stack, double tol);
int numerical_rank(const Eigen::MatrixXd& m, double tol);

struct DimSumResult {
  int dim_u = 0, dim_v = 0, dim_intersection = 0, dim_sum = 0;
  bool holds = false;  // dim(U+V) == dim U + dim V - dim(U ∩ V)
};

// Checks the subspace dimension identity two ways: dim of the intersection
// derived from ranks, and an independent estimate from principal angles
// between orthonormal bases.
DimSumResult dim_sum_check(const VectorStack& u, const VectorStack& v, double tol);

struct ResidualProfile {
  std::vector<double> per_stage;   // residual against each stage alone
  std::vector<double> cumulative;  // residual against the growing union
};

ResidualProfile residual_profile(const std::vector<VectorStack>& stages,
                                 const Eigen::VectorXd& y);

// Flatten a single-map tensor channel into a column vector.
Eigen::VectorXd flatten(const TensorD& t, int n, int c);
Eigen::VectorXd flatten_mask(const TensorF& t);

}  // namespace lsn::spanlab

namespace lsn {
struct NetworkSpec;
}

namespace lsn::spanlab {

// Runs the network forward in 64-bit and captures every supervision point's
// pre-sigmoid map at ground-truth resolution, one stack per stage ordered
// deep to shallow, labelled by provenance.
std::vector<VectorStack> extract_features(const NetworkSpec& spec,
                                          const ParamStore<float>& params,
                                          const TensorF& image);

}  // namespace lsn::spanlab
