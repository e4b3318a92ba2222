#include "lsn/model.hpp"

#include <algorithm>
#include <cmath>

namespace lsn {

std::vector<FusionGroup> fusion_groups(int k) {
  if (k < 1 || k > 4)
    throw std::invalid_argument("variant must be in 1..4, got " + std::to_string(k));
  std::vector<FusionGroup> groups;
  const int lo_off = (k - 1) / 2;
  const int hi_off = k / 2;
  for (int s = 1; s <= NetworkSpec::kStages; ++s) {
    FusionGroup fg;
    fg.center = s;
    for (int m = std::max(1, s - lo_off); m <= std::min(NetworkSpec::kStages, s + hi_off); ++m)
      fg.members.push_back(m);
    if (fg.members.size() < 2) continue;  // degenerate window, no fusion
    fg.out_level = fg.members.front();
    groups.push_back(fg);
  }
  return groups;
}

NetworkSpec build_variant(int k, double width_multiplier) {
  if (k < 1 || k > 4)
    throw std::invalid_argument("variant must be in 1..4, got " + std::to_string(k));
  if (width_multiplier <= 0)
    throw std::invalid_argument("width multiplier must be positive");
  NetworkSpec spec;
  spec.variant = k;
  spec.width_multiplier = width_multiplier;
  const int base_widths[NetworkSpec::kStages] = {16, 32, 64, 128, 128};
  for (int s = 0; s < NetworkSpec::kStages; ++s) {
    StageSpec st;
    st.conv_layers = 2;
    st.width = std::max(1, static_cast<int>(std::lround(base_widths[s] * width_multiplier)));
    st.pooled = s > 0;
    spec.stages.push_back(st);
  }
  spec.groups = fusion_groups(k);
  return spec;
}

ParamStore<float> init_params(const NetworkSpec& spec, unsigned seed) {
  std::mt19937 rng(seed);
  auto uniform = [&rng](float a) {
    // uniform in [-a, a), from the raw generator for cross-platform stability
    const float u = static_cast<float>(rng()) / 4294967296.0f;
    return a * (2.0f * u - 1.0f);
  };
  ParamStore<float> params;

  auto conv_init = [&](const std::string& name, int oc, int ic, int k, float in_mean) {
    TensorF w({oc, ic, k, k});
    // Xavier bound with the classic 4x gain for logistic-sigmoid layers
    // (sigma'(0) = 1/4 attenuates both signal and gradient).
    const float a = 4.0f * std::sqrt(6.0f / static_cast<float>(ic * k * k + oc * k * k));
    for (auto& v : w.data) v = uniform(a);
    // Sigmoid outputs are not zero-centered; start each bias at minus the
    // mean input times the kernel's weight sum so pre-activations are
    // zero-mean at initialization.
    TensorF b({1, oc, 1, 1});
    for (int o = 0; o < oc; ++o) {
      float s = 0;
      for (int i = 0; i < ic * k * k; ++i) s += w.data[static_cast<size_t>(o) * ic * k * k + i];
      b.data[static_cast<size_t>(o)] = -in_mean * s;
    }
    params.emplace(name + ".weight", std::move(w));
    params.emplace(name + ".bias", std::move(b));
  };
  auto lsu_init = [&](const std::string& prefix, int n, int ctotal) {
    TensorF lambda({n, ctotal, 1, 1});
    const float a = 1.0f / static_cast<float>(ctotal);
    for (auto& v : lambda.data) v = uniform(a);
    params.emplace(prefix + ".lambda", std::move(lambda));
    params.emplace(prefix + ".bias", TensorF({1, n, 1, 1}));
  };
  auto deconv_init = [&](const std::string& name, int factor) {
    TensorF w({1, 1, 2 * factor, 2 * factor});
    for (int i = 0; i < 2 * factor; ++i)
      for (int j = 0; j < 2 * factor; ++j)
        w.at(0, 0, i, j) = kernels::bilinear_tap<float>(i, j, factor);
    params.emplace(name, std::move(w));
  };

  int in_ch = 1;
  for (int s = 1; s <= NetworkSpec::kStages; ++s) {
    const StageSpec& st = spec.stages[static_cast<size_t>(s - 1)];
    for (int l = 1; l <= st.conv_layers; ++l) {
      // the raw image averages ~0.4; every later layer sees sigmoid outputs
      const float in_mean = (s == 1 && l == 1) ? 0.4f : 0.5f;
      conv_init("backbone.s" + std::to_string(s) + ".conv" + std::to_string(l), st.width, in_ch,
                3, in_mean);
      in_ch = st.width;
    }
    lsu_init("fspan.s" + std::to_string(s), 1, st.width);
    if (s > 1) deconv_init("head.fspan.s" + std::to_string(s) + ".up.kernel", 1 << (s - 1));
  }
  if (!spec.groups.empty()) {
    for (int l = 1; l < NetworkSpec::kStages; ++l) {
      deconv_init("align.l" + std::to_string(l) + ".up.kernel", 2);
      lsu_init("align.l" + std::to_string(l), 1, 1);
    }
    for (auto it = spec.groups.rbegin(); it != spec.groups.rend(); ++it) {
      const bool chained = it->center + 1 <= NetworkSpec::kStages &&
                           std::any_of(spec.groups.begin(), spec.groups.end(),
                                       [&](const FusionGroup& g) { return g.center == it->center + 1; });
      lsu_init("sspan.g" + std::to_string(it->center),
               1, static_cast<int>(it->members.size()) + (chained ? 1 : 0));
      if (it->out_level > 1)
        deconv_init("head.sspan.g" + std::to_string(it->center) + ".up.kernel",
                    1 << (it->out_level - 1));
    }
  }
  return params;
}

SideOutputs forward(const NetworkSpec& spec, const ParamStore<float>& params,
                    const TensorF& image) {
  LsnGraph<float> net = build_lsn_graph<float>(spec, image.shape, false);
  net.g.set_input(net.input, image);
  net.g.forward(params);
  SideOutputs out;
  for (const auto& h : net.heads) out.maps.emplace_back(h.name, net.g.value(h.logits));
  out.final_prediction = net.g.value(net.final_logits);
  return out;
}

TensorF infer(const NetworkSpec& spec, const ParamStore<float>& params,
              const TensorF& image, double threshold) {
  if (threshold < 0 || threshold > 1)
    throw std::invalid_argument("threshold must lie in [0,1]");
  SideOutputs out = forward(spec, params, image);
  TensorF mask(out.final_prediction.shape);
  for (std::int64_t i = 0; i < mask.count(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(out.final_prediction.data[i])));
    mask.data[i] = p > threshold ? 1.0f : 0.0f;
  }
  return mask;
}

std::int64_t param_count(const NetworkSpec& spec) {
  std::int64_t total = 0;
  for (const auto& [name, t] : init_params(spec, 0)) total += t.count();
  return total;
}

}  // namespace lsn
