#pragma once

// LSN assembly: a 5-stage convolutional backbone, per-stage feature-span
// LSUs, shared resolution-alignment bridges (learned 2x upsample + LSU), and
// deep-to-shallow subspace-span LSUs. The variant index k controls how many
// adjacent subspaces each fusion group spans.

#include <map>
#include <random>
#include <string>
#include <vector>

#include "lsn/graph.hpp"
#include "lsn/lsu.hpp"
#include "lsn/tensor.hpp"

namespace lsn {

struct StageSpec {
  int conv_layers = 2;
  int width = 0;        // channel count after the width multiplier
  bool pooled = false;  // 2x max-pool before this stage
};

struct FusionGroup {
  int center = 0;            // stage the group is centered on
  std::vector<int> members;  // ascending stage indices whose subspaces it spans
  int out_level = 0;         // resolution level of the fused output (1 = image)
};

struct NetworkSpec {
  int variant = 3;  // k in {1,2,3,4}
  double width_multiplier = 1.0;
  std::vector<StageSpec> stages;   // always 5
  std::vector<FusionGroup> groups; // empty for k = 1

  static constexpr int kStages = 5;
  int divisibility() const { return 1 << (kStages - 1); }
};

// Wiring per the variant table: k=1 feature span only, k=2 adjacent pairs,
// k=3 adds one higher- and one lower-resolution neighbour, k=4 widens the
// window to four stages. Window truncates at the pyramid ends.
NetworkSpec build_variant(int k, double width_multiplier = 1.0);

std::vector<FusionGroup> fusion_groups(int k);

// Deterministic parameter initialization for a spec.
ParamStore<float> init_params(const NetworkSpec& spec, unsigned seed);

struct SupervisionPoint {
  std::string name;  // "fspan.s3", "sspan.g1", ...
  int logits = -1;   // node id, at image resolution
  int stage = 0;     // owning stage / group center
};

// A spec instantiated as a graph for one input shape. When built with
// targets, every supervision point carries a balanced-BCE node and
// total_loss is their weighted sum.
template <class T>
struct LsnGraph {
  Graph<T> g;
  int input = -1;
  std::vector<SupervisionPoint> heads;
  std::vector<int> losses;  // parallel to heads (with_loss only)
  int total_loss = -1;
  int final_logits = -1;
};

template <class T>
LsnGraph<T> build_lsn_graph(const NetworkSpec& spec, Shape img, bool with_loss,
                            const std::vector<double>& loss_weights = {});

struct SideOutputs {
  std::vector<std::pair<std::string, TensorF>> maps;  // logits at image resolution
  TensorF final_prediction;                           // logits of the inference output
};

SideOutputs forward(const NetworkSpec& spec, const ParamStore<float>& params,
                    const TensorF& image);

// Sigmoid of the final prediction, thresholded; scores exactly at the
// threshold classify negative.
TensorF infer(const NetworkSpec& spec, const ParamStore<float>& params,
              const TensorF& image, double threshold);

std::int64_t param_count(const NetworkSpec& spec);

// ----- implementation of the templated builder -----------------------------

template <class T>
LsnGraph<T> build_lsn_graph(const NetworkSpec& spec, Shape img, bool with_loss,
                            const std::vector<double>& loss_weights) {
  if (spec.variant < 1 || spec.variant > 4)
    throw std::invalid_argument("variant must be in 1..4, got " + std::to_string(spec.variant));
  const int div = spec.divisibility();
  if (img.c != 1)
    throw std::invalid_argument("expected a single-channel image, got " + img.str());
  if (img.h % div != 0 || img.w % div != 0)
    throw std::invalid_argument("image " + img.str() + " must have spatial dims divisible by " +
                                std::to_string(div));

  LsnGraph<T> net;
  Graph<T>& g = net.g;
  net.input = g.input(img);

  // Backbone: per stage, optional pool then conv3x3+sigmoid layers.
  std::vector<int> stage_feat(NetworkSpec::kStages + 1, -1);
  int x = net.input;
  int in_ch = 1;
  for (int s = 1; s <= NetworkSpec::kStages; ++s) {
    const StageSpec& st = spec.stages[static_cast<size_t>(s - 1)];
    if (st.pooled) x = g.maxpool2(x);
    for (int l = 1; l <= st.conv_layers; ++l) {
      const std::string p = "backbone.s" + std::to_string(s) + ".conv" + std::to_string(l);
      const int w = g.param(p + ".weight", {st.width, in_ch, 3, 3});
      const int b = g.param(p + ".bias", {1, st.width, 1, 1});
      x = g.sigmoid(g.conv2d(x, w, b, 1, 1));
      in_ch = st.width;
    }
    stage_feat[static_cast<size_t>(s)] = x;
  }

  // Feature linear span: one LSU per stage, one spanned map each.
  std::vector<int> fspan(NetworkSpec::kStages + 1, -1);
  for (int s = 1; s <= NetworkSpec::kStages; ++s)
    fspan[static_cast<size_t>(s)] =
        lsu_build(g, {stage_feat[static_cast<size_t>(s)]},
                  "fspan.s" + std::to_string(s), 1, {1})[0];

  // Resolution alignment: shared per-level bridges, level l+1 -> l.
  auto bridge = [&](int node, int level) {
    const std::string p = "align.l" + std::to_string(level);
    const int k = g.param(p + ".up.kernel", {1, 1, 4, 4});
    const int up = g.deconv2d(node, k, 2);
    return lsu_build(g, {up}, p, 1, {1})[0];
  };
  auto align_to = [&](int node, int from_level, int to_level) {
    for (int l = from_level; l > to_level; --l) node = bridge(node, l - 1);
    return node;
  };

  // Subspace linear span, deep to shallow; each group also folds in the
  // previous (deeper) group's output so the spanned space grows cumulatively.
  std::map<int, int> sspan;       // center -> output node
  std::map<int, int> sspan_level; // center -> resolution level
  for (auto it = spec.groups.rbegin(); it != spec.groups.rend(); ++it) {
    const FusionGroup& fg = *it;
    std::vector<int> inputs;
    for (int m : fg.members)
      inputs.push_back(align_to(fspan[static_cast<size_t>(m)], m, fg.out_level));
    auto prev = sspan.find(fg.center + 1);
    if (prev != sspan.end())
      inputs.push_back(align_to(prev->second, sspan_level[fg.center + 1], fg.out_level));
    const int out = lsu_build(g, inputs, "sspan.g" + std::to_string(fg.center), 1, {1})[0];
    sspan[fg.center] = out;
    sspan_level[fg.center] = fg.out_level;
  }

  // Supervision heads: learned transposed-conv upsampling to image resolution.
  auto head = [&](const std::string& name, int node, int level) {
    if (level > 1) {
      const int f = 1 << (level - 1);
      const int k = g.param("head." + name + ".up.kernel", {1, 1, 2 * f, 2 * f});
      node = g.deconv2d(node, k, f);
    }
    return node;
  };
  for (int s = 1; s <= NetworkSpec::kStages; ++s) {
    const std::string name = "fspan.s" + std::to_string(s);
    net.heads.push_back({name, head(name, fspan[static_cast<size_t>(s)], s), s});
  }
  for (auto it = spec.groups.rbegin(); it != spec.groups.rend(); ++it) {
    const std::string name = "sspan.g" + std::to_string(it->center);
    net.heads.push_back({name, head(name, sspan[it->center], it->out_level), it->center});
  }

  // Inference output: the shallowest subspace-span output (terminal
  // cumulative span); for k=1 the stage-1 feature head.
  net.final_logits = net.heads.back().logits;
  for (const auto& h : net.heads)
    if (h.name == (spec.groups.empty() ? "fspan.s1" : "sspan.g" + std::to_string(spec.groups.front().center)))
      net.final_logits = h.logits;

  if (with_loss) {
    std::vector<double> w = loss_weights;
    if (w.empty()) w.assign(net.heads.size(), 1.0);
    if (w.size() != net.heads.size())
      throw std::invalid_argument("loss weight count " + std::to_string(w.size()) +
                                  " does not match " + std::to_string(net.heads.size()) +
                                  " supervision points");
    std::vector<int> ls;
    for (const auto& h : net.heads)
      ls.push_back(g.balanced_bce(h.logits, Tensor<T>(img)));
    net.losses = ls;
    net.total_loss = g.weighted_sum(ls, w);
  }
  return net;
}

}  // namespace lsn
