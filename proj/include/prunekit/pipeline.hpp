#ifndef PRUNEKIT_PIPELINE_HPP_
#define PRUNEKIT_PIPELINE_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "prunekit/errors.hpp"
#include "prunekit/mask.hpp"
#include "prunekit/matrix.hpp"
#include "prunekit/model.hpp"
#include "prunekit/optim.hpp"
#include "prunekit/pruner.hpp"
#include "prunekit/trainable.hpp"

namespace prunekit {

//! Row survival read from `row_source`, column survival from
//! `col_source`: a group is dropped iff its norm <= eps * (1 + ||M||_F)
//! of its own layer. eps == 0 drops exactly the hard zeros.
inline SparsityMask mask_from_collections(const WeightCollection& row_source,
                                          const WeightCollection& col_source,
                                          double eps) {
  row_source.require_same_layout(col_source, "mask_from_collections");
  if (!(eps >= 0.0)) {
    throw std::invalid_argument("mask_from_collections: eps must be >= 0");
  }
  SparsityMask mask;
  for (std::size_t i = 0; i < row_source.size(); ++i) {
    const Matrix& rm = row_source.matrix(i);
    const Matrix& cm = col_source.matrix(i);
    const double row_cut = eps * (1.0 + rm.frobenius_norm());
    const double col_cut = eps * (1.0 + cm.frobenius_norm());
    SparsityMask::LayerMask lm;
    lm.id = row_source.id(i);
    lm.row_keep.reserve(rm.rows());
    for (double n : row_l2_norms(rm)) lm.row_keep.push_back(n > row_cut);
    lm.col_keep.reserve(cm.cols());
    for (double n : col_l2_norms(cm)) lm.col_keep.push_back(n > col_cut);
    mask.add(std::move(lm));
  }
  return mask;
}

//! Mask for a converged pruner state: rows sentenced by X, columns by Y.
inline SparsityMask extract_mask(const PrunerState& st, double eps) {
  return mask_from_collections(st.x, st.y, eps);
}

//! Zeroes every dropped weight and every dropped-row bias, stores the
//! mask in the model so training keeps them pinned. Kept weights are
//! untouched. Throws numeric_error if any layer would lose all rows or
//! all columns (regularization too aggressive to act on).
template <TrainableModel M>
void apply_mask(M& model, const SparsityMask& mask) {
  WeightCollection& w = model.prunable_weights();
  mask.require_matches(w, "apply_mask");
  for (const auto& lm : mask) {
    if (lm.rows() > 0 && lm.kept_rows() == 0) {
      throw numeric_error("apply_mask: empty layer '" + lm.id +
                          "' (all rows pruned)");
    }
    if (lm.cols() > 0 && lm.kept_cols() == 0) {
      throw numeric_error("apply_mask: empty layer '" + lm.id +
                          "' (all columns pruned)");
    }
  }
  auto& biases = model.bias_params();
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto& lm = mask.layer(i);
    Matrix& m = w.matrix(i);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const bool row_ok = lm.row_keep[r];
      double* row = m.row_ptr(r);
      for (std::size_t c = 0; c < m.cols(); ++c) {
        if (!row_ok || !lm.col_keep[c]) row[c] = 0.0;
      }
    }
    if (i < biases.size()) {
      for (std::size_t r = 0;
           r < biases[i].size() && r < lm.row_keep.size(); ++r) {
        if (!lm.row_keep[r]) biases[i][r] = 0.0;
      }
    }
  }
  model.set_mask(mask);
}

//! Post-prune fine-tuning: fresh Adam moments, dropped parameters pinned
//! at zero, verified after every epoch. Returns the final mean loss.
template <TrainableModel M>
double retrain(M& model, const Dataset& data, const HyperParams& hp,
               std::uint64_t seed, const EpochObserver& observer = {}) {
  const SparsityMask* mask = model.mask();
  if (mask == nullptr) {
    throw std::invalid_argument("retrain: model has no mask applied");
  }
  OptimState opt = OptimState::make(model, AdamConfig{.lr = hp.lr});
  TrainConfig cfg;
  cfg.epochs = hp.retrain_epochs;
  cfg.batch_size = hp.batch_size;
  cfg.seed = seed;
  EpochObserver checked = [&model, &observer](const EpochStats& s) {
    const SparsityMask* m = model.mask();
    const WeightCollection& w = model.prunable_weights();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const auto& lm = m->layer(i);
      const Matrix& mat = w.matrix(i);
      for (std::size_t r = 0; r < mat.rows(); ++r) {
        for (std::size_t c = 0; c < mat.cols(); ++c) {
          if (!lm.keep(r, c) && mat(r, c) != 0.0) {
            throw numeric_error("retrain: dropped weight drifted off zero");
          }
        }
      }
    }
    if (observer) observer(s);
  };
  return train(model, data, opt, cfg, {}, checked);
}

struct LayerCompression {
  std::string id;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t kept_rows = 0;
  std::size_t kept_cols = 0;
  std::size_t total = 0;      // rows * cols
  std::size_t remaining = 0;  // kept_rows * kept_cols
  double rate = 1.0;          // total / remaining
};

struct CompressionReport {
  std::vector<LayerCompression> layers;
  std::size_t total_params = 0;
  std::size_t remaining_params = 0;
  double rate = 1.0;
  // Percent accuracies filled by the experiment driver; NaN = not measured.
  double base_accuracy = std::numeric_limits<double>::quiet_NaN();
  double pruned_accuracy = std::numeric_limits<double>::quiet_NaN();
  double retrained_accuracy = std::numeric_limits<double>::quiet_NaN();
};

inline CompressionReport make_compression_report(const SparsityMask& mask) {
  CompressionReport rep;
  for (const auto& lm : mask) {
    LayerCompression lc;
    lc.id = lm.id;
    lc.rows = lm.rows();
    lc.cols = lm.cols();
    lc.kept_rows = lm.kept_rows();
    lc.kept_cols = lm.kept_cols();
    lc.total = lm.total();
    lc.remaining = lm.remaining();
    lc.rate = lc.remaining > 0
                  ? static_cast<double>(lc.total) /
                        static_cast<double>(lc.remaining)
                  : std::numeric_limits<double>::infinity();
    rep.layers.push_back(std::move(lc));
    rep.total_params += lm.total();
    rep.remaining_params += lm.remaining();
  }
  rep.rate = rep.remaining_params > 0
                 ? static_cast<double>(rep.total_params) /
                       static_cast<double>(rep.remaining_params)
                 : std::numeric_limits<double>::infinity();
  return rep;
}

// One entry per prunable layer after the first: how many KEPT columns
// read only from outputs the previous layer's mask already dropped.
// Reported, never auto-pruned.
struct DeadInputDiagnostic {
  std::string layer_id;
  std::size_t dead_kept_cols = 0;
};

inline std::vector<DeadInputDiagnostic> dead_input_diagnostic(
    const Model& model, const SparsityMask& mask) {
  mask.require_matches(model.prunable_weights(), "dead_input_diagnostic");
  const auto& info = model.prunable_info();
  std::vector<DeadInputDiagnostic> out;
  for (std::size_t i = 1; i < info.size(); ++i) {
    const auto& prev = mask.layer(i - 1);
    const auto& cur = mask.layer(i);
    const LayerSpec& spec = info[i].spec;
    const Shape& in_shape = info[i].in_shape;
    // A column of this layer's GEMM matrix reads from exactly one channel
    // (feature) of the incoming activation, which is one output row of
    // the previous prunable layer when nothing between them remixes
    // channels (relu/flatten do not).
    DeadInputDiagnostic d;
    d.layer_id = cur.id;
    const std::size_t prev_rows = prev.rows();
    for (std::size_t c = 0; c < cur.cols(); ++c) {
      if (!cur.col_keep[c]) continue;
      std::size_t channel;
      if (spec.kind == LayerKind::Conv2d) {
        channel = c / (spec.kernel_h * spec.kernel_w);
      } else {
        // dense over a flattened (C,H,W) activation: feature -> channel
        const std::size_t spatial =
            info[i - 1].spec.kind == LayerKind::Conv2d && in_shape.flat() > 0
                ? in_shape.flat() / std::max<std::size_t>(prev_rows, 1)
                : 1;
        channel = spatial > 0 ? c / spatial : c;
      }
      if (channel < prev_rows && !prev.row_keep[channel]) ++d.dead_kept_cols;
    }
    out.push_back(std::move(d));
  }
  return out;
}

//! Group-penalty subgradient hook for the direct comparator: adds
//! lambda * d(sum of row norms + sum of col norms)/dW, with zero-norm
//! groups contributing nothing.
template <TrainableModel M>
GradHook direct_penalty_hook(const M& model, double lambda) {
  return [&model, lambda](ParamGrads& grads) {
    const WeightCollection& w = model.prunable_weights();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const Matrix& wm = w.matrix(i);
      Matrix& g = grads.weights.matrix(i);
      const std::vector<double> rn = row_l2_norms(wm);
      const std::vector<double> cn = col_l2_norms(wm);
      for (std::size_t r = 0; r < wm.rows(); ++r) {
        const double* wrow = wm.row_ptr(r);
        double* grow = g.row_ptr(r);
        for (std::size_t c = 0; c < wm.cols(); ++c) {
          double sub = 0.0;
          if (rn[r] > 0.0) sub += wrow[c] / rn[r];
          if (cn[c] > 0.0) sub += wrow[c] / cn[c];
          grow[c] += lambda * sub;
        }
      }
    }
  };
}

//! Smallest-of-the-closest relative threshold whose mask hits
//! `target_rate` as nearly as possible without emptying any layer.
//! Candidates are the normalized group norms themselves, so the search
//! is exact.
inline double pick_direct_epsilon(const WeightCollection& w,
                                  double target_rate) {
  if (!(target_rate >= 1.0)) {
    throw std::invalid_argument(
        "pick_direct_epsilon: target rate must be >= 1");
  }
  std::vector<double> candidates{0.0};
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double scale = 1.0 + w.matrix(i).frobenius_norm();
    for (double n : row_l2_norms(w.matrix(i))) candidates.push_back(n / scale);
    for (double n : col_l2_norms(w.matrix(i))) candidates.push_back(n / scale);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  double best_eps = 0.0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (double eps : candidates) {
    const SparsityMask m = mask_from_collections(w, w, eps);
    bool empties = false;
    for (const auto& lm : m) {
      if (lm.kept_rows() == 0 || lm.kept_cols() == 0) {
        empties = true;
        break;
      }
    }
    if (empties) continue;
    const double rate = static_cast<double>(m.total_params()) /
                        static_cast<double>(m.remaining_params());
    const double gap = std::fabs(rate - target_rate);
    if (gap < best_gap) {
      best_gap = gap;
      best_eps = eps;
    }
  }
  return best_eps;
}

struct DirectOptions {
  double epsilon = -1.0;     // fixed relative threshold when >= 0
  double target_rate = 0.0;  // otherwise match this compression rate
};

struct DirectEpoch {
  std::size_t epoch = 0;
  double loss = 0.0;     // data loss only
  double penalty = 0.0;  // unscaled group penalty of W
};

struct DirectResult {
  SparsityMask mask;
  CompressionReport report;
  double epsilon_used = 0.0;
  std::vector<DirectEpoch> history;
};

using DirectEpochObserver = std::function<void(const DirectEpoch&)>;

//! The single-penalty comparator: trains loss + lambda * group_penalty
//! by subgradient for the same epoch budget as the splitting schedule
//! (iterations * primal_epochs), thresholds W's groups with the same
//! relative-eps rule, hard-prunes, and retrains. The model is mutated in
//! place. When `test` is given, pruned/retrained accuracies are filled
//! into the report.
template <TrainableModel M>
DirectResult direct_baseline(M& model, const Dataset& data,
                             const Dataset* test, const HyperParams& hp,
                             const DirectOptions& opts,
                             const DirectEpochObserver& train_observer = {},
                             const EpochObserver& retrain_observer = {}) {
  hp.validate();
  DirectResult out;
  OptimState opt = OptimState::make(model, AdamConfig{.lr = hp.lr});
  TrainConfig cfg;
  cfg.epochs = hp.iterations * hp.primal_epochs;
  cfg.batch_size = hp.batch_size;
  cfg.seed = hp.seed;
  GradHook hook = direct_penalty_hook(model, hp.lambda);
  EpochObserver log = [&](const EpochStats& s) {
    const DirectEpoch e{s.epoch, s.mean_loss,
                        group_penalty(model.prunable_weights())};
    if (train_observer) train_observer(e);
    out.history.push_back(e);
  };
  train(model, data, opt, cfg, hook, log);

  double eps = opts.epsilon;
  if (eps < 0.0) {
    if (opts.target_rate > 0.0) {
      eps = pick_direct_epsilon(model.prunable_weights(), opts.target_rate);
    } else {
      eps = hp.zero_epsilon;
    }
  }
  out.epsilon_used = eps;
  out.mask = mask_from_collections(model.prunable_weights(),
                                   model.prunable_weights(), eps);
  apply_mask(model, out.mask);
  out.report = make_compression_report(out.mask);
  if (test != nullptr) {
    out.report.pruned_accuracy = evaluate_accuracy(model, *test);
  }
  retrain(model, data, hp, mix_seed(hp.seed, 2), retrain_observer);
  if (test != nullptr) {
    out.report.retrained_accuracy = evaluate_accuracy(model, *test);
  }
  return out;
}

}  // namespace prunekit

#endif  // PRUNEKIT_PIPELINE_HPP_
