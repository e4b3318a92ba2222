#include "lsn/gradcheck_suite.hpp"

#include <random>

#include "lsn/graph.hpp"
#include "lsn/model.hpp"

namespace lsn {

double GradCheckReport::worst() const {
  double w = 0;
  for (const auto& e : entries) w = std::max(w, e.worst_rel_error);
  return w;
}

bool GradCheckReport::ok(double tol) const {
  for (const auto& e : entries)
    if (!(e.worst_rel_error <= tol)) return false;
  return !entries.empty();
}

namespace {

TensorD randn(Shape s, std::mt19937& rng, double scale = 1.0) {
  TensorD t(s);
  for (auto& v : t.data) v = scale * (2.0 * (rng() / 4294967296.0) - 1.0);
  return t;
}

double check(Graph<double>& g, int loss, ParamStore<double>& params) {
  auto worst = grad_check(g, loss, params, 1e-5);
  double w = 0;
  for (const auto& [name, e] : worst) w = std::max(w, e);
  return w;
}

}  // namespace

GradCheckReport run_gradcheck_suite(unsigned seed, bool corrupt_backward) {
  std::mt19937 rng(seed);
  GradCheckReport rep;

  {  // conv2d: two conv layers with sigmoid between, per-channel bias
    Graph<double> g;
    ParamStore<double> p;
    p.emplace("x", randn({1, 2, 6, 6}, rng));
    p.emplace("w1", randn({3, 2, 3, 3}, rng, 0.5));
    p.emplace("b1", randn({1, 3, 1, 1}, rng, 0.1));
    p.emplace("w2", randn({1, 3, 3, 3}, rng, 0.5));
    p.emplace("b2", randn({1, 1, 1, 1}, rng, 0.1));
    int x = g.param("x", {1, 2, 6, 6});
    x = g.sigmoid(g.conv2d(x, g.param("w1", {3, 2, 3, 3}), g.param("b1", {1, 3, 1, 1}), 1, 1));
    x = g.conv2d(x, g.param("w2", {1, 3, 3, 3}), g.param("b2", {1, 1, 1, 1}), 1, 1);
    const int loss = g.sum_all(g.sigmoid(x));
    if (corrupt_backward) g.corrupt_gradient_for_test();
    rep.entries.push_back({"conv2d", check(g, loss, p)});
  }
  {  // strided conv
    Graph<double> g;
    ParamStore<double> p;
    p.emplace("x", randn({1, 2, 7, 7}, rng));
    p.emplace("w", randn({2, 2, 3, 3}, rng, 0.5));
    int x = g.conv2d(g.param("x", {1, 2, 7, 7}), g.param("w", {2, 2, 3, 3}), -1, 2, 1);
    rep.entries.push_back({"conv2d_stride2", check(g, g.sum_all(g.sigmoid(x)), p)});
  }
  {  // learned transposed-conv upsampling
    Graph<double> g;
    ParamStore<double> p;
    p.emplace("x", randn({1, 2, 4, 4}, rng));
    p.emplace("k", randn({2, 1, 4, 4}, rng, 0.5));
    int x = g.deconv2d(g.param("x", {1, 2, 4, 4}), g.param("k", {2, 1, 4, 4}), 2);
    rep.entries.push_back({"deconv2d", check(g, g.sum_all(g.sigmoid(x)), p)});
  }
  {  // fixed bilinear upsampling
    Graph<double> g;
    ParamStore<double> p;
    p.emplace("x", randn({1, 2, 4, 4}, rng));
    int x = g.bilinear_up(g.param("x", {1, 2, 4, 4}), 4);
    rep.entries.push_back({"upsample_bilinear", check(g, g.sum_all(g.sigmoid(x)), p)});
  }
  {  // concat + slice round trip through a 1x1 conv
    Graph<double> g;
    ParamStore<double> p;
    p.emplace("a", randn({1, 2, 5, 5}, rng));
    p.emplace("b", randn({1, 3, 5, 5}, rng));
    p.emplace("w", randn({4, 5, 1, 1}, rng, 0.5));
    int cat = g.concat({g.param("a", {1, 2, 5, 5}), g.param("b", {1, 3, 5, 5})});
    int conv = g.conv2d(cat, g.param("w", {4, 5, 1, 1}), -1, 1, 0);
    auto parts = g.slice(conv, {1, 3});
    int loss = g.weighted_sum({g.sum_all(g.sigmoid(parts[0])), g.sum_all(g.sigmoid(parts[1]))},
                              {1.0, 0.5});
    rep.entries.push_back({"concat_slice", check(g, loss, p)});
  }
  {  // maxpool2
    Graph<double> g;
    ParamStore<double> p;
    p.emplace("x", randn({1, 2, 6, 6}, rng));
    int x = g.maxpool2(g.param("x", {1, 2, 6, 6}));
    rep.entries.push_back({"maxpool2", check(g, g.sum_all(g.sigmoid(x)), p)});
  }
  {  // sigmoid + add + scale
    Graph<double> g;
    ParamStore<double> p;
    p.emplace("a", randn({1, 1, 4, 4}, rng));
    p.emplace("b", randn({1, 1, 4, 4}, rng));
    int a = g.param("a", {1, 1, 4, 4});
    int b = g.param("b", {1, 1, 4, 4});
    int x = g.scale(g.add(g.sigmoid(a), g.sigmoid(b)), 0.75);
    rep.entries.push_back({"sigmoid_add_scale", check(g, g.sum_all(x), p)});
  }
  {  // class-balanced cross-entropy head
    Graph<double> g;
    ParamStore<double> p;
    p.emplace("x", randn({1, 1, 6, 6}, rng, 2.0));
    TensorD target({1, 1, 6, 6});
    for (auto& v : target.data) v = (rng() % 4 == 0) ? 1.0 : 0.0;
    int loss = g.balanced_bce(g.param("x", {1, 1, 6, 6}), target);
    rep.entries.push_back({"balanced_bce", check(g, loss, p)});
  }
  {  // full miniature LSN_3
    const NetworkSpec spec = build_variant(3, 1.0 / 16.0);
    LsnGraph<double> net = build_lsn_graph<double>(spec, {1, 1, 32, 32}, true);
    ParamStore<double> p;
    for (const auto& [name, t] : init_params(spec, seed)) p.emplace(name, t.cast<double>());
    TensorD img = randn({1, 1, 32, 32}, rng, 0.5);
    for (auto& v : img.data) v = v * 0.5 + 0.5;
    net.g.set_input(net.input, img);
    TensorD gt({1, 1, 32, 32});
    for (auto& v : gt.data) v = (rng() % 8 == 0) ? 1.0 : 0.0;
    for (int l : net.losses) net.g.set_bce_target(l, gt);
    rep.entries.push_back({"lsn3_full", check(net.g, net.total_loss, p)});
  }
  return rep;
}

}  // namespace lsn
