#include "lsn/lsu.hpp"

#include "lsn/spanlab.hpp"

namespace lsn {

int lsu_span_dim(const LsuParams& params, double tol) {
  params.validate();
  const int n = params.lambda.shape.n;
  const int c = params.lambda.shape.c;
  Eigen::MatrixXd m(n, c);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < c; ++k) m(i, k) = params.lambda.at(i, k, 0, 0);
  return spanlab::numerical_rank(m, tol);
}

}  // namespace lsn
