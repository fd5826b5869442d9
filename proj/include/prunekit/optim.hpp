#ifndef PRUNEKIT_OPTIM_HPP_
#define PRUNEKIT_OPTIM_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "prunekit/dataset.hpp"
#include "prunekit/errors.hpp"
#include "prunekit/mask.hpp"
#include "prunekit/rng.hpp"
#include "prunekit/trainable.hpp"

namespace prunekit {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam moments shaped like the model's parameters, plus the shared step
// counter used for bias correction.
struct OptimState {
  AdamConfig config;
  ParamGrads m;
  ParamGrads v;
  std::uint64_t step = 0;

  template <TrainableModel M>
  static OptimState make(const M& model, AdamConfig cfg = {}) {
    OptimState st;
    st.config = cfg;
    st.m = zero_grads_like(model);
    st.v = zero_grads_like(model);
    return st;
  }
};

namespace detail {

inline void adam_update_array(double* p, double* m, double* v, const double* g,
                              std::size_t n, const AdamConfig& cfg,
                              double bias1, double bias2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

}  // namespace detail

//! One bias-corrected Adam update of every weight matrix and bias vector.
template <TrainableModel M>
void adam_step(M& model, const ParamGrads& grads, OptimState& st) {
  WeightCollection& w = model.prunable_weights();
  w.require_same_layout(grads.weights, "adam_step");
  w.require_same_layout(st.m.weights, "adam_step(state)");
  ++st.step;
  const double bias1 = 1.0 - std::pow(st.config.beta1,
                                      static_cast<double>(st.step));
  const double bias2 = 1.0 - std::pow(st.config.beta2,
                                      static_cast<double>(st.step));
  for (std::size_t i = 0; i < w.size(); ++i) {
    detail::adam_update_array(
        w.matrix(i).data(), st.m.weights.matrix(i).data(),
        st.v.weights.matrix(i).data(), grads.weights.matrix(i).data(),
        w.matrix(i).size(), st.config, bias1, bias2);
  }
  auto& biases = model.bias_params();
  for (std::size_t i = 0; i < biases.size(); ++i) {
    if (biases[i].size() != grads.biases[i].size()) {
      throw std::invalid_argument("adam_step: bias shape mismatch");
    }
    detail::adam_update_array(biases[i].data(), st.m.biases[i].data(),
                              st.v.biases[i].data(), grads.biases[i].data(),
                              biases[i].size(), st.config, bias1, bias2);
  }
}

namespace detail {

// Zero the gradients of dropped weights and of biases on dropped rows so
// the optimizer never pushes a pruned parameter off zero.
inline void freeze_masked_grads(const SparsityMask& mask,
                                const WeightCollection& w, ParamGrads& grads) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto* lm = mask.find(w.id(i));
    if (lm == nullptr) continue;
    Matrix& g = grads.weights.matrix(i);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      const bool row_ok = lm->row_keep[r];
      double* row = g.row_ptr(r);
      for (std::size_t c = 0; c < g.cols(); ++c) {
        if (!row_ok || !lm->col_keep[c]) row[c] = 0.0;
      }
    }
    if (i < grads.biases.size()) {
      auto& gb = grads.biases[i];
      for (std::size_t r = 0; r < gb.size() && r < lm->row_keep.size(); ++r) {
        if (!lm->row_keep[r]) gb[r] = 0.0;
      }
    }
  }
}

// Clamp dropped parameters back to exactly zero (Adam momentum could
// otherwise drift them even with zeroed gradients).
template <TrainableModel M>
void enforce_mask_zeros(M& model) {
  const SparsityMask* mask = model.mask();
  if (mask == nullptr) return;
  WeightCollection& w = model.prunable_weights();
  auto& biases = model.bias_params();
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto* lm = mask->find(w.id(i));
    if (lm == nullptr) continue;
    Matrix& m = w.matrix(i);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const bool row_ok = lm->row_keep[r];
      double* row = m.row_ptr(r);
      for (std::size_t c = 0; c < m.cols(); ++c) {
        if (!row_ok || !lm->col_keep[c]) row[c] = 0.0;
      }
    }
    if (i < biases.size()) {
      for (std::size_t r = 0;
           r < biases[i].size() && r < lm->row_keep.size(); ++r) {
        if (!lm->row_keep[r]) biases[i][r] = 0.0;
      }
    }
  }
}

}  // namespace detail

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;  // per-epoch shuffle stream
};

struct EpochStats {
  std::size_t epoch = 0;   // 0-based index within this train() call
  double mean_loss = 0.0;  // sample-weighted mean over the epoch's batches
};

//! Extra gradient terms injected after backward and before the update
//! (the pruner adds its quadratic attraction terms here).
using GradHook = std::function<void(ParamGrads&)>;
using EpochObserver = std::function<void(const EpochStats&)>;

//! Minibatch Adam over `cfg.epochs` passes with a seeded per-epoch
//! shuffle. Honors the model's sparsity mask: dropped weights and
//! dropped-row biases get zero gradient and are pinned to zero after
//! every step. Returns the last epoch's mean loss (NaN if epochs == 0).
template <TrainableModel M>
double train(M& model, const Dataset& data, OptimState& opt,
             const TrainConfig& cfg, const GradHook& hook = {},
             const EpochObserver& observer = {}) {
  if (cfg.batch_size == 0) {
    throw std::invalid_argument("train: batch_size must be positive");
  }
  if (data.size() == 0) {
    throw std::invalid_argument("train: empty dataset");
  }
  detail::enforce_mask_zeros(model);

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle_rng(cfg.seed);

  double last_mean = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      std::span<const std::size_t> batch(order.data() + start, len);
      EvalResult eval = model.evaluate(data, batch);
      if (hook) hook(eval.grads);
      if (const SparsityMask* mask = model.mask()) {
        detail::freeze_masked_grads(*mask, model.prunable_weights(),
                                    eval.grads);
      }
      adam_step(model, eval.grads, opt);
      detail::enforce_mask_zeros(model);
      loss_sum += eval.loss * static_cast<double>(len);
    }
    last_mean = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(last_mean)) {
      throw numeric_error("train: mean epoch loss is non-finite");
    }
    if (observer) observer({epoch, last_mean});
  }
  return last_mean;
}

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t probes = 0;

  bool passed(double tolerance) const { return max_rel_err < tolerance; }
};

//! Compares analytic gradients against central finite differences on
//! `probes_per_layer` randomly sampled parameters (weights and biases)
//! of each prunable layer. The error for one coordinate is
//! |analytic - numeric| / max(1, |analytic|, |numeric|).
template <TrainableModel M>
GradCheckReport gradient_check(M& model, const Dataset& data,
                               std::span<const std::size_t> idx,
                               std::size_t probes_per_layer = 20,
                               double h = 1e-5, std::uint64_t seed = 0) {
  if (idx.empty()) {
    throw std::invalid_argument("gradient_check: empty batch");
  }
  if (h <= 0.0) {
    throw std::invalid_argument("gradient_check: step must be positive");
  }
  const EvalResult eval = model.evaluate(data, idx);
  Rng rng(seed);
  GradCheckReport report;

  WeightCollection& w = model.prunable_weights();
  auto& biases = model.bias_params();
  for (std::size_t li = 0; li < w.size(); ++li) {
    const std::size_t wn = w.matrix(li).size();
    const std::size_t bn = li < biases.size() ? biases[li].size() : 0;
    const std::size_t total = wn + bn;
    const std::size_t probes = std::min(probes_per_layer, total);
    for (std::size_t p = 0; p < probes; ++p) {
      const std::size_t flat = rng.bounded(total);
      double* coord = flat < wn ? w.matrix(li).data() + flat
                                : biases[li].data() + (flat - wn);
      const double analytic =
          flat < wn ? eval.grads.weights.matrix(li).data()[flat]
                    : eval.grads.biases[li][flat - wn];
      const double saved = *coord;
      *coord = saved + h;
      const double up = model.loss_value(data, idx);
      *coord = saved - h;
      const double down = model.loss_value(data, idx);
      *coord = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double denom =
          std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
      report.max_rel_err =
          std::max(report.max_rel_err, std::fabs(analytic - numeric) / denom);
      ++report.probes;
    }
  }
  return report;
}

}  // namespace prunekit

#endif  // PRUNEKIT_OPTIM_HPP_
