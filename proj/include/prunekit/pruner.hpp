#ifndef PRUNEKIT_PRUNER_HPP_
#define PRUNEKIT_PRUNER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "prunekit/dataset.hpp"
#include "prunekit/matrix.hpp"
#include "prunekit/optim.hpp"
#include "prunekit/prox.hpp"
#include "prunekit/rng.hpp"
#include "prunekit/trainable.hpp"

namespace prunekit {

struct HyperParams {
  double lambda = 1e-7;           // group regularization weight
  double rho = 1e-3;              // augmented quadratic penalty
  std::size_t iterations = 300;   // pruning iterations (one per epoch)
  std::size_t primal_epochs = 1;  // training epochs inside one iteration
  double lr = 1e-4;
  double zero_epsilon = 0.0;      // relative mask threshold (0 = exact zeros)
  std::size_t retrain_epochs = 300;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  bool reset_adam = false;  // reset moments at each primal step

  //! Full-pipeline validity. rho == 0 is legal for a bare primal_step
  //! (plain training) but not for proximal/dual updates.
  void validate() const {
    if (!(lambda >= 0.0)) {
      throw std::invalid_argument("HyperParams: lambda must be >= 0");
    }
    if (!(rho > 0.0)) {
      throw std::invalid_argument("HyperParams: rho must be > 0");
    }
    if (!(lr > 0.0)) {
      throw std::invalid_argument("HyperParams: lr must be > 0");
    }
    if (!(zero_epsilon >= 0.0)) {
      throw std::invalid_argument("HyperParams: zero_epsilon must be >= 0");
    }
    if (batch_size == 0) {
      throw std::invalid_argument("HyperParams: batch_size must be positive");
    }
  }
};

// Splitting-method state: the model owns W; this owns the auxiliary
// sparse variables, the duals, and the optimizer moments shared across
// iterations. X mirrors W with row sparsity, Y with column sparsity.
struct PrunerState {
  WeightCollection x;
  WeightCollection y;
  WeightCollection lam;  // dual for W = X
  WeightCollection gam;  // dual for W = Y
  std::size_t t = 0;     // completed iterations
  OptimState optim;
};

struct IterationMetrics {
  std::size_t t = 0;        // 1-based index of the completed iteration
  double train_loss = 0.0;  // mean data loss over the primal epoch(s)
  double consensus_x = 0.0;  // ||W - X||_F / ||W||_F
  double consensus_y = 0.0;  // ||W - Y||_F / ||W||_F
  double penalty = 0.0;      // unscaled group penalty of W
  std::vector<std::size_t> zero_rows;  // per layer, exact-zero rows of X
  std::vector<std::size_t> zero_cols;  // per layer, exact-zero cols of Y
};

//! Called once per completed iteration; the caller's model holds the W
//! that produced these metrics, and `state` is current for the same t.
using PruneObserver =
    std::function<void(const IterationMetrics&, const PrunerState&)>;

template <TrainableModel M>
PrunerState init_state(const M& model, const HyperParams& hp) {
  PrunerState st;
  st.x = model.prunable_weights();
  st.y = model.prunable_weights();
  st.lam = model.prunable_weights().zeros_like();
  st.gam = model.prunable_weights().zeros_like();
  st.t = 0;
  st.optim = OptimState::make(model, AdamConfig{.lr = hp.lr});
  return st;
}

namespace detail {

// Attraction targets of the primal quadratics: b1 = X - (1/rho)Lam,
// b2 = Y - (1/rho)Gam.
inline std::pair<WeightCollection, WeightCollection> primal_targets(
    const PrunerState& st, double rho) {
  WeightCollection b1 = st.x;
  b1.add_scaled(st.lam, -1.0 / rho);
  WeightCollection b2 = st.y;
  b2.add_scaled(st.gam, -1.0 / rho);
  return {std::move(b1), std::move(b2)};
}

}  // namespace detail

//! Value of the primal objective at the model's current weights:
//! full-data loss + (rho/2)(||W-B1||^2 + ||W-B2||^2).
template <TrainableModel M>
double primal_objective(const M& model, const Dataset& data,
                        const PrunerState& st, const HyperParams& hp) {
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  double value = model.loss_value(data, idx);
  if (hp.rho > 0.0) {
    auto [b1, b2] = detail::primal_targets(st, hp.rho);
    const double d1 = frobenius_distance(model.prunable_weights(), b1);
    const double d2 = frobenius_distance(model.prunable_weights(), b2);
    value += 0.5 * hp.rho * (d1 * d1 + d2 * d2);
  }
  return value;
}

//! Primal step: `primal_epochs` epochs of Adam on
//! f(W) + (rho/2)||W-B1||^2 + (rho/2)||W-B2||^2, the quadratic gradients
//! rho(W-B1) + rho(W-B2) added analytically to each batch gradient.
//! Returns the mean data loss of the last epoch. rho == 0 degenerates to
//! plain training.
template <TrainableModel M>
double primal_step(M& model, const Dataset& data, PrunerState& st,
                   const HyperParams& hp, std::uint64_t epoch_seed) {
  if (hp.reset_adam) {
    st.optim = OptimState::make(model, st.optim.config);
  }
  GradHook hook;
  WeightCollection b1, b2;
  if (hp.rho > 0.0) {
    std::tie(b1, b2) = detail::primal_targets(st, hp.rho);
    hook = [&model, &b1, &b2, rho = hp.rho](ParamGrads& grads) {
      const WeightCollection& w = model.prunable_weights();
      for (std::size_t i = 0; i < w.size(); ++i) {
        const Matrix& wm = w.matrix(i);
        Matrix& g = grads.weights.matrix(i);
        const Matrix& m1 = b1.matrix(i);
        const Matrix& m2 = b2.matrix(i);
        for (std::size_t k = 0; k < wm.size(); ++k) {
          g.data()[k] +=
              rho * (wm.data()[k] - m1.data()[k]) +
              rho * (wm.data()[k] - m2.data()[k]);
        }
      }
    };
  }
  TrainConfig cfg;
  cfg.epochs = hp.primal_epochs;
  cfg.batch_size = hp.batch_size;
  cfg.seed = epoch_seed;
  return train(model, data, st.optim, cfg, hook);
}

//! Proximal step: closed-form group shrinkage toward row sparsity in X
//! and column sparsity in Y, threshold lambda/rho.
template <TrainableModel M>
void proximal_step(const M& model, PrunerState& st, const HyperParams& hp) {
  if (!(hp.rho > 0.0)) {
    throw std::invalid_argument("proximal_step: rho must be > 0");
  }
  const double threshold = hp.lambda / hp.rho;
  const WeightCollection& w = model.prunable_weights();
  w.require_same_layout(st.x, "proximal_step");
  for (std::size_t i = 0; i < w.size(); ++i) {
    Matrix c1 = w.matrix(i);
    c1.add_scaled(st.lam.matrix(i), 1.0 / hp.rho);
    st.x.matrix(i) = row_group_prox(c1, threshold);

    Matrix c2 = w.matrix(i);
    c2.add_scaled(st.gam.matrix(i), 1.0 / hp.rho);
    st.y.matrix(i) = col_group_prox(c2, threshold);
  }
}

//! Dual ascent: Lam += rho(W - X), Gam += rho(W - Y); advances t.
template <TrainableModel M>
void dual_step(const M& model, PrunerState& st, const HyperParams& hp) {
  if (!(hp.rho > 0.0)) {
    throw std::invalid_argument("dual_step: rho must be > 0");
  }
  const WeightCollection& w = model.prunable_weights();
  w.require_same_layout(st.lam, "dual_step");
  for (std::size_t i = 0; i < w.size(); ++i) {
    st.lam.matrix(i).add_scaled(w.matrix(i), hp.rho);
    st.lam.matrix(i).add_scaled(st.x.matrix(i), -hp.rho);
    st.gam.matrix(i).add_scaled(w.matrix(i), hp.rho);
    st.gam.matrix(i).add_scaled(st.y.matrix(i), -hp.rho);
  }
  ++st.t;
}

template <TrainableModel M>
IterationMetrics iteration_metrics(const M& model, const PrunerState& st,
                                   double train_loss) {
  const WeightCollection& w = model.prunable_weights();
  IterationMetrics m;
  m.t = st.t;
  m.train_loss = train_loss;
  const double wnorm = w.frobenius_norm();
  const double dx = frobenius_distance(w, st.x);
  const double dy = frobenius_distance(w, st.y);
  m.consensus_x = wnorm > 0.0 ? dx / wnorm : dx;
  m.consensus_y = wnorm > 0.0 ? dy / wnorm : dy;
  m.penalty = group_penalty(w);
  for (std::size_t i = 0; i < st.x.size(); ++i) {
    std::size_t zr = 0;
    for (double n : row_l2_norms(st.x.matrix(i))) {
      if (n == 0.0) ++zr;
    }
    m.zero_rows.push_back(zr);
    std::size_t zc = 0;
    for (double n : col_l2_norms(st.y.matrix(i))) {
      if (n == 0.0) ++zc;
    }
    m.zero_cols.push_back(zc);
  }
  return m;
}

struct RunResult {
  PrunerState state;
  std::vector<IterationMetrics> history;
};

//! The whole single-shot schedule: init, then exactly hp.iterations
//! rounds of primal -> proximal -> dual, reporting metrics after each.
//! No early stopping, no outer search. The returned state is ready for
//! mask extraction.
template <TrainableModel M>
RunResult run_pruner(M& model, const Dataset& data, const HyperParams& hp,
                     const PruneObserver& observer = {}) {
  hp.validate();
  RunResult out;
  out.state = init_state(model, hp);
  out.history.reserve(hp.iterations);
  while (out.state.t < hp.iterations) {
    const double loss =
        primal_step(model, data, out.state, hp, mix_seed(hp.seed, out.state.t));
    proximal_step(model, out.state, hp);
    dual_step(model, out.state, hp);
    IterationMetrics m = iteration_metrics(model, out.state, loss);
    if (observer) observer(m, out.state);
    out.history.push_back(std::move(m));
  }
  return out;
}

}  // namespace prunekit

#endif  // PRUNEKIT_PRUNER_HPP_
