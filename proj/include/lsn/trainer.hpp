#pragma once

// Deep-supervised SGD training with momentum, weight decay, the staircase
// learning-rate schedule, and the two-phase iterative strategy that first
// settles feature span + resolution alignment and then tunes the span LSUs
// with the alignment parameters frozen.

#include <functional>
#include <set>
#include <string>
#include <vector>

#include "lsn/config.hpp"
#include "lsn/datakit.hpp"
#include "lsn/model.hpp"
#include "lsn/tensor.hpp"

namespace lsn {

struct Checkpoint {
  ParamStore<float> params;
  ParamStore<float> buffers;  // momentum, one per parameter
  std::uint64_t iteration = 0;
  std::string fingerprint;    // 32 hex chars over the canonical config

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

// Class-balanced sigmoid cross-entropy; returns the loss and the analytic
// gradient with respect to the logits.
template <class T>
std::pair<T, Tensor<T>> balanced_bce(const Tensor<T>& logits, const Tensor<T>& gt) {
  if (logits.shape != gt.shape)
    throw std::invalid_argument("balanced_bce: logits " + logits.shape.str() + " vs gt " +
                                gt.shape.str());
  Tensor<T> grad(logits.shape);
  const T loss = kernels::balanced_bce<T>(logits, gt, &grad);
  return {loss, std::move(grad)};
}

// buffer <- momentum*buffer + grad + weight_decay*param; param <- param - lr*buffer.
// Parameters whose name starts with a frozen prefix are left untouched.
void sgd_step(ParamStore<float>& params, const ParamStore<float>& grads,
              ParamStore<float>& buffers, double lr, double momentum,
              double weight_decay, const std::set<std::string>& frozen_prefixes = {});

// base_lr * lr_multiplier * 10^(-floor(iter / lr_decay_period))
double lr_at(int iter, const Config& cfg);

struct TraceRow {
  int iter = 0;
  double lr = 0;
  double total = 0;
  std::vector<double> heads;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TraceRow> trace;
  std::vector<std::string> head_names;
  bool diverged = false;
  int diverged_at = -1;
};

struct TrainHooks {
  // Frozen parameter prefixes per global iteration; used by the iterative
  // strategy. Null means nothing frozen.
  std::function<std::set<std::string>(int)> frozen_at;
  std::function<void(int)> on_phase;  // called at phase boundaries
};

TrainResult train(const NetworkSpec& spec, const std::vector<datakit::Sample>& dataset,
                  const Config& cfg, const Checkpoint* resume = nullptr,
                  const TrainHooks* hooks = nullptr);

// Budget cfg.max_iters split evenly over 1 + n_outer phases. Phase 1 trains
// backbone, feature span and alignment with the subspace LSUs frozen; later
// phases freeze alignment and backbone and tune the span LSUs. With
// unfreeze_all the phases collapse to plain end-to-end training.
TrainResult train_iterative(const NetworkSpec& spec,
                            const std::vector<datakit::Sample>& dataset, const Config& cfg,
                            int n_outer, bool unfreeze_all = false);

std::string trace_csv(const TrainResult& result);

}  // namespace lsn
