// End-to-end walkthrough of the library API on a task with known ground
// truth: a classifier whose labels depend on 8 of 64 input features.
// The pruner should discover and remove the first-layer columns that
// read the 56 noise features, compress the network several-fold, and
// retrain back to (or past) the dense baseline.
//
//   train dense baseline -> run splitting pruner -> extract mask ->
//   hard prune -> retrain -> compare against the planted coordinates
#include <cstdio>
#include <set>
#include <vector>

#include <prunekit/prunekit.hpp>

using namespace prunekit;

int main() {
  // ------------------------------------------------------------------
  // Data: 512 train / 256 test samples, labels driven by a hidden
  // teacher that reads only 8 of the 64 coordinates.
  // ------------------------------------------------------------------
  PlantedSpec spec;
  spec.features = 64;
  spec.informative = 8;
  spec.train_samples = 512;
  spec.test_samples = 256;
  spec.margin = 0.3;
  const std::uint64_t seed = 1;
  const LoadedData data = make_planted_dataset(spec, seed);

  std::printf("planted coordinates:");
  for (std::size_t c : data.informative) std::printf(" %zu", c);
  std::printf("\n\n");

  // ------------------------------------------------------------------
  // Model: 64 -> 32 -> 2 MLP. Train the dense baseline.
  // ------------------------------------------------------------------
  std::vector<LayerSpec> layers;
  layers.push_back(LayerSpec::dense(64, 32));
  layers.push_back(LayerSpec::relu());
  layers.push_back(LayerSpec::dense(32, 2));
  layers.push_back(LayerSpec::softmax_xent());
  Model model(layers, Shape{64, 1, 1});
  Rng init(mix_seed(seed, 0));
  model.init_weights(init);

  TrainConfig tc;
  tc.epochs = 60;
  tc.batch_size = 32;
  tc.seed = seed;
  OptimState opt = OptimState::make(model, AdamConfig{.lr = 5e-3});
  train(model, data.train, opt, tc);
  const double base_acc = evaluate_accuracy(model, data.test);
  std::printf("dense baseline: test accuracy %.2f%%\n\n", base_acc);

  // ------------------------------------------------------------------
  // Prune: 200 splitting iterations. The observer shows the consensus
  // gaps closing and zero groups appearing as the duals accumulate.
  // ------------------------------------------------------------------
  HyperParams hp;
  hp.lambda = 2e-2;
  hp.rho = 1e-2;
  hp.lr = 2e-3;
  hp.iterations = 200;
  hp.retrain_epochs = 40;
  hp.batch_size = 32;
  hp.seed = mix_seed(seed, 1);

  std::printf("%5s %12s %12s %10s %6s %6s\n", "iter", "consensus-x",
              "consensus-y", "penalty", "rows0", "cols0");
  PruneObserver progress = [](const IterationMetrics& m, const PrunerState&) {
    if (m.t % 25 != 0 && m.t != 1) return;
    std::printf("%5zu %12.3e %12.3e %10.4f %6zu %6zu\n", m.t, m.consensus_x,
                m.consensus_y, m.penalty, m.zero_rows[0], m.zero_cols[0]);
  };
  RunResult run = run_pruner(model, data.train, hp, progress);

  const SparsityMask mask = extract_mask(run.state, hp.zero_epsilon);
  apply_mask(model, mask);
  const double pruned_acc = evaluate_accuracy(model, data.test);

  retrain(model, data.train, hp, mix_seed(seed, 2));
  const double retrained_acc = evaluate_accuracy(model, data.test);

  // ------------------------------------------------------------------
  // Report: compression accounting plus the ground-truth comparison.
  // ------------------------------------------------------------------
  const CompressionReport rep = make_compression_report(mask);
  std::printf("\ncompression: %.2fx (%zu of %zu params kept)\n", rep.rate,
              rep.remaining_params, rep.total_params);
  for (const auto& l : rep.layers) {
    std::printf("  %-6s %zux%zu -> %zux%zu kept\n", l.id.c_str(), l.rows,
                l.cols, l.kept_rows, l.kept_cols);
  }
  std::printf("accuracy: base %.2f%% -> pruned %.2f%% -> retrained %.2f%%\n\n",
              base_acc, pruned_acc, retrained_acc);

  const std::set<std::size_t> planted(data.informative.begin(),
                                      data.informative.end());
  const auto& fc1 = mask.layer(0);
  std::size_t noise_pruned = 0, noise_total = 0, planted_kept = 0;
  std::printf("surviving input columns:");
  for (std::size_t c = 0; c < fc1.col_keep.size(); ++c) {
    const bool is_planted = planted.count(c) != 0;
    if (!is_planted) ++noise_total;
    if (fc1.col_keep[c]) {
      std::printf(" %zu%s", c, is_planted ? "*" : "");
      if (is_planted) ++planted_kept;
    } else if (!is_planted) {
      ++noise_pruned;
    }
  }
  std::printf("   (* = planted)\n");
  std::printf("noise columns pruned: %zu/%zu; planted columns kept: %zu/%zu\n",
              noise_pruned, noise_total, planted_kept, planted.size());
  return 0;
}
