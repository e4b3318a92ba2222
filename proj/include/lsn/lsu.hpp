#pragma once

// Linear Span Unit: concat -> 1x1 convolution -> slice. Strictly linear
// reconstruction; every output map at pixel j is the same weighted
// combination of the input channels at pixel j, plus a per-output bias.

#include <numeric>
#include <string>
#include <vector>

#include "lsn/graph.hpp"
#include "lsn/tensor.hpp"

namespace lsn {

struct LsuParams {
  TensorF lambda;                // [n, C_total, 1, 1]
  TensorF bias;                  // [1, n, 1, 1]
  std::vector<int> input_sizes;  // channel counts of the m inputs
  std::vector<int> output_sizes; // channel partition of the outputs

  int total_inputs() const {
    return std::accumulate(input_sizes.begin(), input_sizes.end(), 0);
  }
  void validate() const {
    if (lambda.shape.c != total_inputs())
      throw std::invalid_argument("LsuParams: lambda has " + std::to_string(lambda.shape.c) +
                                  " input channels, input sizes sum to " +
                                  std::to_string(total_inputs()));
    if (lambda.shape.h != 1 || lambda.shape.w != 1)
      throw std::invalid_argument("LsuParams: lambda must be a 1x1 kernel, got " +
                                  lambda.shape.str());
    const int n = lambda.shape.n;
    if (std::accumulate(output_sizes.begin(), output_sizes.end(), 0) != n)
      throw std::invalid_argument("LsuParams: output sizes must sum to " + std::to_string(n));
    if (static_cast<int>(bias.count()) != n)
      throw std::invalid_argument("LsuParams: bias length " + std::to_string(bias.count()) +
                                  " does not match " + std::to_string(n) + " outputs");
  }
};

// Direct (non-graph) evaluation, used by the trainer-free analysis paths and
// as the subject of the per-pixel oracle tests.
template <class T>
std::vector<Tensor<T>> lsu_forward(const std::vector<Tensor<T>>& inputs,
                                   const Tensor<T>& lambda, const Tensor<T>& bias,
                                   const std::vector<int>& output_sizes) {
  if (inputs.empty()) throw std::invalid_argument("lsu_forward: no inputs");
  const Shape s0 = inputs[0].shape;
  for (size_t i = 1; i < inputs.size(); ++i) {
    const Shape si = inputs[i].shape;
    if (si.n != s0.n || si.h != s0.h || si.w != s0.w)
      throw std::invalid_argument("lsu_forward: input " + std::to_string(i) + " has shape " +
                                  si.str() + ", expected batch/spatial of " + s0.str());
  }
  int ctotal = 0;
  for (const auto& t : inputs) ctotal += t.shape.c;
  Tensor<T> cat({s0.n, ctotal, s0.h, s0.w});
  {
    const std::int64_t hw = static_cast<std::int64_t>(s0.h) * s0.w;
    std::int64_t off = 0;
    for (const auto& t : inputs) {
      for (int n = 0; n < s0.n; ++n)
        std::copy(t.ptr() + static_cast<std::int64_t>(n) * t.shape.c * hw,
                  t.ptr() + static_cast<std::int64_t>(n + 1) * t.shape.c * hw,
                  cat.ptr() + (static_cast<std::int64_t>(n) * ctotal + off) * hw);
      off += t.shape.c;
    }
  }
  const int nout = lambda.shape.n;
  Tensor<T> span({s0.n, nout, s0.h, s0.w});
  kernels::conv2d_forward(cat, lambda, bias.ptr(), 1, 0, span);

  std::vector<Tensor<T>> outs;
  const std::int64_t hw = static_cast<std::int64_t>(s0.h) * s0.w;
  int begin = 0;
  for (int sz : output_sizes) {
    Tensor<T> o({s0.n, sz, s0.h, s0.w});
    for (int n = 0; n < s0.n; ++n)
      std::copy(span.ptr() + (static_cast<std::int64_t>(n) * nout + begin) * hw,
                span.ptr() + (static_cast<std::int64_t>(n) * nout + begin + sz) * hw,
                o.ptr() + static_cast<std::int64_t>(n) * sz * hw);
    outs.push_back(std::move(o));
    begin += sz;
  }
  return outs;
}

// Graph builder. Parameters are registered as "<prefix>.lambda" and
// "<prefix>.bias"; returns one node per configured output block.
template <class T>
std::vector<int> lsu_build(Graph<T>& g, const std::vector<int>& inputs,
                           const std::string& prefix, int n_out,
                           const std::vector<int>& output_sizes) {
  int ctotal = 0;
  for (int id : inputs) ctotal += g.shape(id).c;
  const int cat = g.concat(inputs);
  const int lambda = g.param(prefix + ".lambda", {n_out, ctotal, 1, 1});
  const int bias = g.param(prefix + ".bias", {1, n_out, 1, 1});
  const int span = g.conv2d(cat, lambda, bias, 1, 0);
  if (output_sizes.size() == 1) return {span};
  return g.slice(span, output_sizes);
}

// Dimension of the subspace of channel combinations the unit can realize:
// the numerical rank of the n x C_total weight matrix.
int lsu_span_dim(const LsuParams& params, double tol);

}  // namespace lsn
