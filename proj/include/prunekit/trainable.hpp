#ifndef PRUNEKIT_TRAINABLE_HPP_
#define PRUNEKIT_TRAINABLE_HPP_

#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

#include "prunekit/dataset.hpp"
#include "prunekit/mask.hpp"
#include "prunekit/matrix.hpp"

namespace prunekit {

// Gradients shaped like a model's parameters: one matrix per prunable
// layer plus the matching bias vectors (empty for bias-free objectives).
struct ParamGrads {
  WeightCollection weights;
  std::vector<std::vector<double>> biases;

  void add_scaled(const ParamGrads& other, double s) {
    weights.add_scaled(other.weights, s);
    for (std::size_t i = 0; i < biases.size(); ++i) {
      for (std::size_t j = 0; j < biases[i].size(); ++j) {
        biases[i][j] += s * other.biases[i][j];
      }
    }
  }
};

struct EvalResult {
  double loss = 0.0;
  Matrix logits;  // empty for objectives without a classification head
  ParamGrads grads;
};

// Anything the trainer, pruner, and pipeline can drive: exposes its
// prunable weight matrices, bias vectors, batch loss/gradient
// evaluation, and an optional sparsity mask.
template <typename M>
concept TrainableModel = requires(M& m, const M& cm, const Dataset& d,
                                  std::span<const std::size_t> idx,
                                  SparsityMask mask) {
  { cm.prunable_weights() } -> std::same_as<const WeightCollection&>;
  { m.prunable_weights() } -> std::same_as<WeightCollection&>;
  { cm.bias_params() } -> std::same_as<const std::vector<std::vector<double>>&>;
  { m.bias_params() } -> std::same_as<std::vector<std::vector<double>>&>;
  { cm.evaluate(d, idx) } -> std::same_as<EvalResult>;
  { cm.loss_value(d, idx) } -> std::same_as<double>;
  { cm.mask() } -> std::same_as<const SparsityMask*>;
  m.set_mask(mask);
  m.clear_mask();
};

template <typename M>
ParamGrads zero_grads_like(const M& model) {
  ParamGrads g;
  g.weights = model.prunable_weights().zeros_like();
  for (const auto& b : model.bias_params()) {
    g.biases.emplace_back(b.size(), 0.0);
  }
  return g;
}

}  // namespace prunekit

#endif  // PRUNEKIT_TRAINABLE_HPP_
