#include "lsn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace lsn {

void Checkpoint::save(const std::string& path) const {
  ParamStore<float> all = params;
  for (const auto& [name, t] : buffers) all.emplace("opt." + name, t);
  ContainerMeta meta;
  meta.present = true;
  meta.iteration = iteration;
  meta.fingerprint = fingerprint.size() == 32 ? fingerprint : std::string(32, '0');
  save_tensor_container(path, all, &meta);
}

Checkpoint Checkpoint::load(const std::string& path) {
  ContainerMeta meta;
  ParamStore<float> all = load_tensor_container(path, &meta);
  Checkpoint ck;
  for (auto& [name, t] : all) {
    if (name.rfind("opt.", 0) == 0)
      ck.buffers.emplace(name.substr(4), std::move(t));
    else
      ck.params.emplace(name, std::move(t));
  }
  if (meta.present) {
    ck.iteration = meta.iteration;
    ck.fingerprint = meta.fingerprint;
  }
  return ck;
}

void sgd_step(ParamStore<float>& params, const ParamStore<float>& grads,
              ParamStore<float>& buffers, double lr, double momentum,
              double weight_decay, const std::set<std::string>& frozen_prefixes) {
  auto frozen = [&](const std::string& name) {
    for (const auto& p : frozen_prefixes)
      if (name.rfind(p, 0) == 0) return true;
    return false;
  };
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end())
      throw std::invalid_argument("sgd_step: no gradient for parameter " + name);
    if (git->second.shape != p.shape)
      throw std::invalid_argument("sgd_step: gradient shape " + git->second.shape.str() +
                                  " does not match parameter " + name + " " + p.shape.str());
    for (const float g : git->second.data)
      if (!std::isfinite(g))
        throw std::runtime_error("sgd_step: non-finite gradient for parameter " + name);
    if (frozen(name)) continue;
    auto bit = buffers.find(name);
    if (bit == buffers.end()) bit = buffers.emplace(name, TensorF(p.shape)).first;
    TensorF& buf = bit->second;
    const float m = static_cast<float>(momentum);
    const float wd = static_cast<float>(weight_decay);
    const float flr = static_cast<float>(lr);
    for (std::int64_t i = 0; i < p.count(); ++i) {
      buf.data[i] = m * buf.data[i] + git->second.data[i] + wd * p.data[i];
      p.data[i] -= flr * buf.data[i];
    }
  }
}

double lr_at(int iter, const Config& cfg) {
  if (iter < 0) throw std::invalid_argument("lr_at: iter must be >= 0");
  return cfg.effective_lr() * std::pow(10.0, -(iter / cfg.lr_decay_period));
}

TrainResult train(const NetworkSpec& spec, const std::vector<datakit::Sample>& dataset,
                  const Config& cfg, const Checkpoint* resume, const TrainHooks* hooks) {
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
  cfg.validate();

  TrainResult res;
  res.checkpoint.fingerprint = config_fingerprint(cfg);
  if (resume) {
    res.checkpoint.params = resume->params;
    res.checkpoint.buffers = resume->buffers;
    res.checkpoint.iteration = resume->iteration;
  } else {
    res.checkpoint.params = init_params(spec, cfg.seed);
  }

  const Shape img_shape = dataset[0].image_tensor().shape;
  for (const auto& s : dataset)
    if (s.image.h != img_shape.h || s.image.w != img_shape.w)
      throw std::invalid_argument("train: sample " + s.id + " has mismatched dimensions");

  LsnGraph<float> net = build_lsn_graph<float>(spec, img_shape, true);
  for (const auto& h : net.heads) res.head_names.push_back(h.name);

  const int n = static_cast<int>(dataset.size());
  std::vector<int> order(static_cast<size_t>(n));
  int shuffled_epoch = -1;
  auto sample_for = [&](int iter) {
    const int epoch = iter / n;
    if (epoch != shuffled_epoch) {
      std::iota(order.begin(), order.end(), 0);
      std::mt19937 rng(cfg.seed * 0x9e3779b9u + static_cast<unsigned>(epoch));
      for (int i = n - 1; i > 0; --i)
        std::swap(order[static_cast<size_t>(i)], order[rng() % static_cast<unsigned>(i + 1)]);
      shuffled_epoch = epoch;
    }
    return order[static_cast<size_t>(iter % n)];
  };

  Checkpoint last_good = res.checkpoint;
  int iter = static_cast<int>(res.checkpoint.iteration);
  for (; iter < cfg.max_iters; ++iter) {
    const datakit::Sample& s = dataset[static_cast<size_t>(sample_for(iter))];
    net.g.set_input(net.input, s.image_tensor());
    const TensorF gt = s.gt_tensor();
    for (int loss_node : net.losses) net.g.set_bce_target(loss_node, gt);
    net.g.forward(res.checkpoint.params);

    TraceRow row;
    row.iter = iter;
    row.lr = lr_at(iter, cfg);
    row.total = net.g.value(net.total_loss).data[0];
    for (int loss_node : net.losses) row.heads.push_back(net.g.value(loss_node).data[0]);

    if (!std::isfinite(row.total)) {
      res.checkpoint = last_good;
      res.diverged = true;
      res.diverged_at = iter;
      res.trace.push_back(row);
      return res;
    }

    ParamStore<float> grads = net.g.backward(net.total_loss, res.checkpoint.params);
    const std::set<std::string> frozen =
        (hooks && hooks->frozen_at) ? hooks->frozen_at(iter) : std::set<std::string>{};
    sgd_step(res.checkpoint.params, grads, res.checkpoint.buffers, row.lr, cfg.momentum,
             cfg.weight_decay, frozen);
    res.checkpoint.iteration = static_cast<std::uint64_t>(iter) + 1;
    res.trace.push_back(row);
    last_good = res.checkpoint;
  }
  return res;
}

TrainResult train_iterative(const NetworkSpec& spec,
                            const std::vector<datakit::Sample>& dataset, const Config& cfg,
                            int n_outer, bool unfreeze_all) {
  if (n_outer < 1) throw std::invalid_argument("train_iterative: n_outer must be >= 1");
  const int phases = 1 + n_outer;
  std::vector<int> boundaries;
  for (int p = 0; p <= phases; ++p)
    boundaries.push_back(static_cast<int>(static_cast<std::int64_t>(cfg.max_iters) * p / phases));

  TrainHooks hooks;
  hooks.frozen_at = [boundaries, unfreeze_all](int iter) -> std::set<std::string> {
    if (unfreeze_all) return {};
    if (iter < boundaries[1]) return {"sspan."};
    return {"align.", "backbone."};
  };
  TrainResult res = train(spec, dataset, cfg, nullptr, &hooks);
  return res;
}

std::string trace_csv(const TrainResult& result) {
  std::ostringstream os;
  os << "iter,lr,total_loss";
  for (const auto& h : result.head_names) os << "," << h;
  os << "\n";
  os.precision(9);
  for (const TraceRow& r : result.trace) {
    os << r.iter << "," << r.lr << "," << r.total;
    for (double h : r.heads) os << "," << h;
    os << "\n";
  }
  return os.str();
}

}  // namespace lsn
