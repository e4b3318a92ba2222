#include "lsn/model.hpp"
#include "lsn/spanlab.hpp"

namespace lsn::spanlab {

std::vector<VectorStack> extract_features(const NetworkSpec& spec,
                                          const ParamStore<float>& params,
                                          const TensorF& image) {
  LsnGraph<double> net = build_lsn_graph<double>(spec, image.shape, false);
  ParamStore<double> p64;
  for (const auto& [name, t] : params) p64.emplace(name, t.cast<double>());
  net.g.set_input(net.input, image.cast<double>());
  net.g.forward(p64);

  std::vector<VectorStack> stacks(NetworkSpec::kStages);
  for (const auto& h : net.heads) {
    const TensorD& map = net.g.value(h.logits);
    if (map.shape.h != image.shape.h || map.shape.w != image.shape.w)
      throw std::logic_error("supervision point " + h.name + " emitted " + map.shape.str() +
                             ", expected ground-truth resolution " + image.shape.str());
    // deep to shallow: stage 5 first
    stacks[static_cast<size_t>(NetworkSpec::kStages - h.stage)].append(flatten(map, 0, 0), h.name);
  }
  return stacks;
}

}  // namespace lsn::spanlab
