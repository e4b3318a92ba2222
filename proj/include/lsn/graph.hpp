#pragma once

// Reverse-mode autodiff over a static operation graph. Nodes are appended in
// topological order by construction; shapes are inferred and validated at
// build time. forward() evaluates against a named parameter store, backward()
// walks the tape in reverse and returns one gradient tensor per parameter
// (zero for parameters the loss never touches).

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lsn/kernels.hpp"
#include "lsn/tensor.hpp"

namespace lsn {

enum class OpKind {
  Input,
  Param,
  Conv2d,       // inputs: x, weight, bias
  Deconv2d,     // inputs: x, depthwise weight [C,1,2f,2f]
  BilinearUp,   // fixed interpolation, parameter-free
  Concat,
  SliceC,       // one channel block of the input
  Sigmoid,
  MaxPool2,
  Add,
  Scale,
  SumAll,       // reduce to 1x1x1x1
  BalancedBce,  // scalar loss against a constant target
  WeightedSum,  // weighted sum of scalar nodes
};

template <class T>
class Graph {
 public:
  struct Node {
    OpKind kind;
    std::vector<int> inputs;
    Shape shape;
    int stride = 1, pad = 0, factor = 1;
    int ch_begin = 0, ch_count = 0;
    double scalar = 1.0;
    std::vector<double> weights;
    std::string pname;
    Tensor<T> target;       // BalancedBce ground truth
    Tensor<T> value, grad;
    std::vector<int> argmax;  // MaxPool2 scratch
  };

  int input(Shape s) { return add_node({OpKind::Input, {}, s}); }

  void set_input(int id, const Tensor<T>& t) {
    Node& nd = node(id);
    if (nd.kind != OpKind::Input) throw std::invalid_argument("set_input on non-input node");
    if (t.shape != nd.shape)
      throw std::invalid_argument("input shape " + t.shape.str() + " does not match declared " +
                                  nd.shape.str());
    nd.value = t;
  }

  int param(const std::string& name, Shape s) {
    Node nd{OpKind::Param, {}, s};
    nd.pname = name;
    return add_node(std::move(nd));
  }

  int conv2d(int x, int w, int b, int stride, int pad) {
    const Shape xs = node(x).shape, ws = node(w).shape;
    if (stride < 1 || pad < 0)
      throw std::invalid_argument("conv2d: stride must be >= 1 and pad >= 0");
    if (xs.c != ws.c)
      throw std::invalid_argument("conv2d: input " + xs.str() + " has " + std::to_string(xs.c) +
                                  " channels but kernel " + ws.str() + " expects " +
                                  std::to_string(ws.c));
    const int oh = kernels::conv_out_dim(xs.h, ws.h, stride, pad);
    const int ow = kernels::conv_out_dim(xs.w, ws.w, stride, pad);
    if (oh <= 0 || ow <= 0)
      throw std::invalid_argument("conv2d: zero-sized output for input " + xs.str() +
                                  " with kernel " + ws.str());
    if (b >= 0) {
      const Shape bs = node(b).shape;
      if (bs.count() != ws.n)
        throw std::invalid_argument("conv2d: bias " + bs.str() + " does not match " +
                                    std::to_string(ws.n) + " output channels");
    }
    Node nd{OpKind::Conv2d, {x, w, b}, {xs.n, ws.n, oh, ow}};
    nd.stride = stride;
    nd.pad = pad;
    return add_node(std::move(nd));
  }

  int deconv2d(int x, int w, int factor) {
    check_factor(factor);
    const Shape xs = node(x).shape, ws = node(w).shape;
    if (ws.n != xs.c || ws.c != 1 || ws.h != 2 * factor || ws.w != 2 * factor)
      throw std::invalid_argument("deconv2d: kernel " + ws.str() + " must be " +
                                  std::to_string(xs.c) + "x1x" + std::to_string(2 * factor) +
                                  "x" + std::to_string(2 * factor));
    Node nd{OpKind::Deconv2d, {x, w}, {xs.n, xs.c, xs.h * factor, xs.w * factor}};
    nd.factor = factor;
    return add_node(std::move(nd));
  }

  int bilinear_up(int x, int factor) {
    check_factor(factor);
    const Shape xs = node(x).shape;
    Node nd{OpKind::BilinearUp, {x}, {xs.n, xs.c, xs.h * factor, xs.w * factor}};
    nd.factor = factor;
    return add_node(std::move(nd));
  }

  int concat(const std::vector<int>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat: empty input list");
    Shape s = node(xs[0]).shape;
    int c = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
      const Shape si = node(xs[i]).shape;
      if (si.n != s.n || si.h != s.h || si.w != s.w)
        throw std::invalid_argument("concat: input " + std::to_string(i) + " has shape " +
                                    si.str() + ", expected batch/spatial of " + s.str());
      c += si.c;
    }
    return add_node({OpKind::Concat, xs, {s.n, c, s.h, s.w}});
  }

  std::vector<int> slice(int x, const std::vector<int>& sizes) {
    const Shape xs = node(x).shape;
    int total = 0;
    for (int s : sizes) {
      if (s < 1) throw std::invalid_argument("slice: sizes must be >= 1");
      total += s;
    }
    if (total != xs.c)
      throw std::invalid_argument("slice: sizes sum to " + std::to_string(total) + " but input " +
                                  xs.str() + " has " + std::to_string(xs.c) + " channels");
    std::vector<int> out;
    int begin = 0;
    for (int s : sizes) {
      Node nd{OpKind::SliceC, {x}, {xs.n, s, xs.h, xs.w}};
      nd.ch_begin = begin;
      nd.ch_count = s;
      out.push_back(add_node(std::move(nd)));
      begin += s;
    }
    return out;
  }

  int sigmoid(int x) { return add_node({OpKind::Sigmoid, {x}, node(x).shape}); }

  int maxpool2(int x) {
    const Shape xs = node(x).shape;
    if (xs.h % 2 != 0 || xs.w % 2 != 0)
      throw std::invalid_argument("maxpool2: spatial dims of " + xs.str() + " must be even");
    return add_node({OpKind::MaxPool2, {x}, {xs.n, xs.c, xs.h / 2, xs.w / 2}});
  }

  int add(int a, int b) {
    if (node(a).shape != node(b).shape)
      throw std::invalid_argument("add: shape mismatch " + node(a).shape.str() + " vs " +
                                  node(b).shape.str());
    return add_node({OpKind::Add, {a, b}, node(a).shape});
  }

  int scale(int x, double c) {
    Node nd{OpKind::Scale, {x}, node(x).shape};
    nd.scalar = c;
    return add_node(std::move(nd));
  }

  int sum_all(int x) { return add_node({OpKind::SumAll, {x}, {1, 1, 1, 1}}); }

  int balanced_bce(int logits, Tensor<T> target) {
    if (node(logits).shape != target.shape)
      throw std::invalid_argument("balanced_bce: logits " + node(logits).shape.str() +
                                  " vs target " + target.shape.str());
    Node nd{OpKind::BalancedBce, {logits}, {1, 1, 1, 1}};
    nd.target = std::move(target);
    return add_node(std::move(nd));
  }

  void set_bce_target(int id, const Tensor<T>& target) {
    Node& nd = node(id);
    if (nd.kind != OpKind::BalancedBce)
      throw std::invalid_argument("set_bce_target on non-loss node");
    if (target.shape != node(nd.inputs[0]).shape)
      throw std::invalid_argument("bce target " + target.shape.str() + " vs logits " +
                                  node(nd.inputs[0]).shape.str());
    nd.target = target;
  }

  int weighted_sum(const std::vector<int>& xs, const std::vector<double>& w) {
    if (xs.size() != w.size() || xs.empty())
      throw std::invalid_argument("weighted_sum: need matching non-empty node/weight lists");
    for (int x : xs)
      if (node(x).shape.count() != 1)
        throw std::invalid_argument("weighted_sum: node " + std::to_string(x) + " is not scalar");
    Node nd{OpKind::WeightedSum, xs, {1, 1, 1, 1}};
    nd.weights = w;
    return add_node(std::move(nd));
  }

  // ----- evaluation --------------------------------------------------------

  void forward(const ParamStore<T>& params) {
    for (Node& nd : nodes_) eval_node(nd, params);
  }

  // Gradients of a scalar loss node with respect to every parameter in the
  // store. Forward must have been evaluated against the same store.
  ParamStore<T> backward(int loss_node, const ParamStore<T>& params) {
    if (node(loss_node).shape.count() != 1)
      throw std::invalid_argument("backward: loss node " + std::to_string(loss_node) +
                                  " has shape " + node(loss_node).shape.str() +
                                  ", expected a scalar");
    for (Node& nd : nodes_) {
      nd.grad = Tensor<T>(nd.shape);
    }
    node(loss_node).grad.data[0] = T(1);
    for (int i = loss_node; i >= 0; --i) backprop_node(nodes_[static_cast<size_t>(i)]);

    ParamStore<T> grads;
    for (const auto& [name, p] : params) grads.emplace(name, Tensor<T>(p.shape));
    for (const Node& nd : nodes_) {
      if (nd.kind != OpKind::Param) continue;
      auto it = grads.find(nd.pname);
      if (it == grads.end()) continue;
      for (std::int64_t i = 0; i < nd.grad.count(); ++i) it->second.data[i] += nd.grad.data[i];
    }
    return grads;
  }

  const Tensor<T>& value(int id) const { return node(id).value; }
  Shape shape(int id) const { return node(id).shape; }
  size_t size() const { return nodes_.size(); }

  // Test hook: corrupt one stored gradient before it is reported, to prove
  // the finite-difference checker actually detects broken backward rules.
  void corrupt_gradient_for_test() { corrupt_ = true; }
  bool corrupted() const { return corrupt_; }

 private:
  std::vector<Node> nodes_;
  bool corrupt_ = false;

  static void check_factor(int factor) {
    if (factor != 2 && factor != 4 && factor != 8 && factor != 16)
      throw std::invalid_argument("upsample factor must be one of {2,4,8,16}, got " +
                                  std::to_string(factor));
  }

  int add_node(Node nd) {
    nd.value = Tensor<T>(nd.shape);
    nodes_.push_back(std::move(nd));
    return static_cast<int>(nodes_.size()) - 1;
  }

  Node& node(int id) { return nodes_.at(static_cast<size_t>(id)); }
  const Node& node(int id) const { return nodes_.at(static_cast<size_t>(id)); }

  void eval_node(Node& nd, const ParamStore<T>& params) {
    switch (nd.kind) {
      case OpKind::Input:
        break;
      case OpKind::Param: {
        auto it = params.find(nd.pname);
        if (it == params.end()) throw std::runtime_error("missing parameter " + nd.pname);
        if (it->second.shape != nd.shape)
          throw std::runtime_error("parameter " + nd.pname + " has shape " +
                                   it->second.shape.str() + ", graph expects " + nd.shape.str());
        nd.value = it->second;
        break;
      }
      case OpKind::Conv2d: {
        const Tensor<T>& x = node(nd.inputs[0]).value;
        const Tensor<T>& w = node(nd.inputs[1]).value;
        const T* b = nd.inputs[2] >= 0 ? node(nd.inputs[2]).value.ptr() : nullptr;
        kernels::conv2d_forward(x, w, b, nd.stride, nd.pad, nd.value);
        break;
      }
      case OpKind::Deconv2d:
        kernels::deconv2d_forward(node(nd.inputs[0]).value, node(nd.inputs[1]).value,
                                  nd.factor, nd.value);
        break;
      case OpKind::BilinearUp:
        kernels::bilinear_up_forward(node(nd.inputs[0]).value, nd.factor, nd.value);
        break;
      case OpKind::Concat: {
        std::int64_t off = 0;
        const std::int64_t hw = static_cast<std::int64_t>(nd.shape.h) * nd.shape.w;
        for (int in : nd.inputs) {
          const Tensor<T>& x = node(in).value;
          for (int n = 0; n < nd.shape.n; ++n) {
            T* dst = nd.value.ptr() + (static_cast<std::int64_t>(n) * nd.shape.c) * hw + off * hw;
            const T* src = x.ptr() + static_cast<std::int64_t>(n) * x.shape.c * hw;
            std::copy(src, src + static_cast<std::int64_t>(x.shape.c) * hw, dst);
          }
          off += x.shape.c;
        }
        break;
      }
      case OpKind::SliceC: {
        const Tensor<T>& x = node(nd.inputs[0]).value;
        const std::int64_t hw = static_cast<std::int64_t>(nd.shape.h) * nd.shape.w;
        for (int n = 0; n < nd.shape.n; ++n) {
          const T* src = x.ptr() + (static_cast<std::int64_t>(n) * x.shape.c + nd.ch_begin) * hw;
          T* dst = nd.value.ptr() + static_cast<std::int64_t>(n) * nd.ch_count * hw;
          std::copy(src, src + static_cast<std::int64_t>(nd.ch_count) * hw, dst);
        }
        break;
      }
      case OpKind::Sigmoid:
        kernels::sigmoid_forward(node(nd.inputs[0]).value, nd.value);
        break;
      case OpKind::MaxPool2:
        kernels::maxpool2_forward(node(nd.inputs[0]).value, nd.value, nd.argmax);
        break;
      case OpKind::Add: {
        const Tensor<T>& a = node(nd.inputs[0]).value;
        const Tensor<T>& b = node(nd.inputs[1]).value;
        for (std::int64_t i = 0; i < nd.value.count(); ++i)
          nd.value.data[i] = a.data[i] + b.data[i];
        break;
      }
      case OpKind::Scale: {
        const Tensor<T>& x = node(nd.inputs[0]).value;
        for (std::int64_t i = 0; i < nd.value.count(); ++i)
          nd.value.data[i] = static_cast<T>(nd.scalar) * x.data[i];
        break;
      }
      case OpKind::SumAll: {
        const Tensor<T>& x = node(nd.inputs[0]).value;
        T acc = T(0);
        for (std::int64_t i = 0; i < x.count(); ++i) acc += x.data[i];
        nd.value.data[0] = acc;
        break;
      }
      case OpKind::BalancedBce:
        nd.value.data[0] = kernels::balanced_bce<T>(node(nd.inputs[0]).value, nd.target, nullptr);
        break;
      case OpKind::WeightedSum: {
        double acc = 0;
        for (size_t i = 0; i < nd.inputs.size(); ++i)
          acc += nd.weights[i] * node(nd.inputs[i]).value.data[0];
        nd.value.data[0] = static_cast<T>(acc);
        break;
      }
    }
    if (corrupt_ && nd.kind == OpKind::Param) {
      // corruption is applied on the backward side; nothing here
    }
  }

  void backprop_node(Node& nd) {
    bool any = false;
    for (std::int64_t i = 0; i < nd.grad.count() && !any; ++i) any = nd.grad.data[i] != T(0);
    if (!any && nd.kind != OpKind::Param) return;
    switch (nd.kind) {
      case OpKind::Input:
      case OpKind::Param:
        if (corrupt_ && nd.kind == OpKind::Param && nd.grad.count() > 0)
          nd.grad.data[0] += T(1);
        break;
      case OpKind::Conv2d: {
        Node& x = node(nd.inputs[0]);
        Node& w = node(nd.inputs[1]);
        Tensor<T> gx(x.shape);
        kernels::conv2d_backward_data(nd.grad, w.value, nd.stride, nd.pad, gx);
        accumulate(x.grad, gx);
        Tensor<T> gw(w.shape);
        kernels::conv2d_backward_filter(nd.grad, x.value, nd.stride, nd.pad, gw);
        accumulate(w.grad, gw);
        if (nd.inputs[2] >= 0) {
          Node& b = node(nd.inputs[2]);
          Tensor<T> gb(b.shape);
          kernels::conv2d_backward_bias(nd.grad, gb.ptr());
          accumulate(b.grad, gb);
        }
        break;
      }
      case OpKind::Deconv2d: {
        Node& x = node(nd.inputs[0]);
        Node& w = node(nd.inputs[1]);
        Tensor<T> gx(x.shape);
        kernels::deconv2d_backward_data(nd.grad, w.value, nd.factor, gx);
        accumulate(x.grad, gx);
        Tensor<T> gw(w.shape);
        kernels::deconv2d_backward_filter(nd.grad, x.value, nd.factor, gw);
        accumulate(w.grad, gw);
        break;
      }
      case OpKind::BilinearUp: {
        Node& x = node(nd.inputs[0]);
        Tensor<T> gx(x.shape);
        kernels::bilinear_up_backward(nd.grad, nd.factor, gx);
        accumulate(x.grad, gx);
        break;
      }
      case OpKind::Concat: {
        const std::int64_t hw = static_cast<std::int64_t>(nd.shape.h) * nd.shape.w;
        std::int64_t off = 0;
        for (int in : nd.inputs) {
          Node& x = node(in);
          for (int n = 0; n < nd.shape.n; ++n) {
            const T* src = nd.grad.ptr() + (static_cast<std::int64_t>(n) * nd.shape.c + off) * hw;
            T* dst = x.grad.ptr() + static_cast<std::int64_t>(n) * x.shape.c * hw;
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(x.shape.c) * hw; ++i)
              dst[i] += src[i];
          }
          off += x.shape.c;
        }
        break;
      }
      case OpKind::SliceC: {
        Node& x = node(nd.inputs[0]);
        const std::int64_t hw = static_cast<std::int64_t>(nd.shape.h) * nd.shape.w;
        for (int n = 0; n < nd.shape.n; ++n) {
          const T* src = nd.grad.ptr() + static_cast<std::int64_t>(n) * nd.ch_count * hw;
          T* dst = x.grad.ptr() + (static_cast<std::int64_t>(n) * x.shape.c + nd.ch_begin) * hw;
          for (std::int64_t i = 0; i < static_cast<std::int64_t>(nd.ch_count) * hw; ++i)
            dst[i] += src[i];
        }
        break;
      }
      case OpKind::Sigmoid: {
        Node& x = node(nd.inputs[0]);
        for (std::int64_t i = 0; i < nd.grad.count(); ++i) {
          const T s = nd.value.data[i];
          x.grad.data[i] += nd.grad.data[i] * s * (T(1) - s);
        }
        break;
      }
      case OpKind::MaxPool2: {
        Node& x = node(nd.inputs[0]);
        Tensor<T> gx(x.shape);
        kernels::maxpool2_backward(nd.grad, nd.argmax, gx);
        accumulate(x.grad, gx);
        break;
      }
      case OpKind::Add: {
        accumulate(node(nd.inputs[0]).grad, nd.grad);
        accumulate(node(nd.inputs[1]).grad, nd.grad);
        break;
      }
      case OpKind::Scale: {
        Node& x = node(nd.inputs[0]);
        for (std::int64_t i = 0; i < nd.grad.count(); ++i)
          x.grad.data[i] += static_cast<T>(nd.scalar) * nd.grad.data[i];
        break;
      }
      case OpKind::SumAll: {
        Node& x = node(nd.inputs[0]);
        const T g = nd.grad.data[0];
        for (std::int64_t i = 0; i < x.grad.count(); ++i) x.grad.data[i] += g;
        break;
      }
      case OpKind::BalancedBce: {
        Node& x = node(nd.inputs[0]);
        Tensor<T> gx(x.shape);
        kernels::balanced_bce<T>(x.value, nd.target, &gx);
        const T g = nd.grad.data[0];
        for (std::int64_t i = 0; i < x.grad.count(); ++i) x.grad.data[i] += g * gx.data[i];
        break;
      }
      case OpKind::WeightedSum: {
        for (size_t i = 0; i < nd.inputs.size(); ++i)
          node(nd.inputs[i]).grad.data[0] +=
              static_cast<T>(nd.weights[i]) * nd.grad.data[0];
        break;
      }
    }
  }

  static void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
    for (std::int64_t i = 0; i < dst.count(); ++i) dst.data[i] += src.data[i];
  }
};

// Central finite-difference check of every parameter scalar against the
// analytic gradients. Requires the 64-bit verification path.
template <class T>
std::map<std::string, double> grad_check(Graph<T>& graph, int loss_node,
                                         ParamStore<T>& params, double epsilon) {
  if constexpr (!std::is_same_v<T, double>) {
    throw std::invalid_argument("grad_check requires the 64-bit verification precision");
  } else {
    graph.forward(params);
    ParamStore<double> analytic = graph.backward(loss_node, params);
    std::map<std::string, double> worst;
    for (auto& [name, p] : params) {
      double w = 0;
      for (std::int64_t i = 0; i < p.count(); ++i) {
        const double orig = p.data[i];
        p.data[i] = orig + epsilon;
        graph.forward(params);
        const double fp = graph.value(loss_node).data[0];
        p.data[i] = orig - epsilon;
        graph.forward(params);
        const double fm = graph.value(loss_node).data[0];
        p.data[i] = orig;
        const double fd = (fp - fm) / (2 * epsilon);
        const double an = analytic.at(name).data[i];
        // The 1e-6 floor keeps central-difference roundoff (~1e-11 absolute
        // at this epsilon) from registering as relative error on gradient
        // entries that are themselves near zero.
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
        w = std::max(w, std::abs(fd - an) / denom);
      }
      worst[name] = w;
    }
    graph.forward(params);  // restore forward state
    return worst;
  }
}

}  // namespace lsn
