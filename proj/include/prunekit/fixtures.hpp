#ifndef PRUNEKIT_FIXTURES_HPP_
#define PRUNEKIT_FIXTURES_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "prunekit/dataset.hpp"
#include "prunekit/mask.hpp"
#include "prunekit/matrix.hpp"
#include "prunekit/trainable.hpp"

namespace prunekit {

// Convex quadratic objective f(W) = (curvature/2) * ||W - target||_F^2
// over the whole collection. Its gradient curvature*(W - target) is exact
// and hand-checkable, which makes it the reference fixture for optimizer
// and pruner behavior (curvature 0 gives the null objective f == 0).
// The dataset argument is ignored; pass dummy_dataset().
class QuadraticModel {
 public:
  QuadraticModel(WeightCollection start, WeightCollection target,
                 double curvature)
      : weights_(std::move(start)),
        target_(std::move(target)),
        curvature_(curvature) {
    weights_.require_same_layout(target_, "QuadraticModel");
  }

  const WeightCollection& prunable_weights() const { return weights_; }
  WeightCollection& prunable_weights() { return weights_; }
  const std::vector<std::vector<double>>& bias_params() const {
    return biases_;
  }
  std::vector<std::vector<double>>& bias_params() { return biases_; }
  const WeightCollection& target() const { return target_; }
  double curvature() const { return curvature_; }

  const SparsityMask* mask() const {
    return mask_.has_value() ? &*mask_ : nullptr;
  }
  void set_mask(SparsityMask m) {
    m.require_matches(weights_, "QuadraticModel::set_mask");
    mask_ = std::move(m);
  }
  void clear_mask() { mask_.reset(); }

  EvalResult evaluate(const Dataset&, std::span<const std::size_t>) const {
    EvalResult out;
    out.loss = objective();
    out.grads.weights = weights_;
    out.grads.weights.add_scaled(target_, -1.0);
    for (auto& l : out.grads.weights) l.weights.scale(curvature_);
    return out;
  }

  double loss_value(const Dataset&, std::span<const std::size_t>) const {
    return objective();
  }

 private:
  double objective() const {
    const double d = frobenius_distance(weights_, target_);
    return 0.5 * curvature_ * d * d;
  }

  WeightCollection weights_;
  WeightCollection target_;
  std::vector<std::vector<double>> biases_;  // objective has no biases
  double curvature_ = 1.0;
  std::optional<SparsityMask> mask_;
};

static_assert(TrainableModel<QuadraticModel>);

//! Placeholder dataset for objectives that ignore their data; n controls
//! how many optimizer steps one epoch takes at a given batch size.
inline Dataset dummy_dataset(std::size_t n) {
  Dataset d;
  d.inputs = Matrix(n, 1, 0.0);
  d.labels.assign(n, 0);
  d.input_shape = {1, 1, 1};
  d.num_classes = 2;
  d.split = Split::Train;
  return d;
}

// Wraps a model and adds a constant offset to every weight gradient.
// Exists to prove the finite-difference checker catches wrong gradients.
template <TrainableModel Inner>
class GradPerturbModel {
 public:
  GradPerturbModel(Inner& inner, double delta)
      : inner_(&inner), delta_(delta) {}

  const WeightCollection& prunable_weights() const {
    return inner_->prunable_weights();
  }
  WeightCollection& prunable_weights() { return inner_->prunable_weights(); }
  const std::vector<std::vector<double>>& bias_params() const {
    return inner_->bias_params();
  }
  std::vector<std::vector<double>>& bias_params() {
    return inner_->bias_params();
  }
  const SparsityMask* mask() const { return inner_->mask(); }
  void set_mask(SparsityMask m) { inner_->set_mask(std::move(m)); }
  void clear_mask() { inner_->clear_mask(); }

  EvalResult evaluate(const Dataset& d, std::span<const std::size_t> idx) const {
    EvalResult out = inner_->evaluate(d, idx);
    for (auto& l : out.grads.weights) {
      for (std::size_t i = 0; i < l.weights.size(); ++i) {
        l.weights.data()[i] += delta_;
      }
    }
    return out;
  }

  double loss_value(const Dataset& d, std::span<const std::size_t> idx) const {
    return inner_->loss_value(d, idx);
  }

 private:
  Inner* inner_;
  double delta_;
};

}  // namespace prunekit

#endif  // PRUNEKIT_FIXTURES_HPP_
