#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include <prunekit/dataset.hpp>
#include <prunekit/errors.hpp>
#include <prunekit/fixtures.hpp>
#include <prunekit/mask.hpp>
#include <prunekit/metrics.hpp>
#include <prunekit/model.hpp>
#include <prunekit/pipeline.hpp>
#include <prunekit/pruner.hpp>
#include <prunekit/rng.hpp>

using namespace prunekit;

namespace {

WeightCollection random_collection(Rng& rng, std::size_t rows,
                                   std::size_t cols,
                                   const std::string& id = "a") {
  WeightCollection w;
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  w.add(id, std::move(m));
  return w;
}

Dataset random_flat_dataset(Rng& rng, std::size_t n, std::size_t width,
                            int classes) {
  Dataset d;
  d.inputs = Matrix(n, width);
  for (std::size_t i = 0; i < d.inputs.size(); ++i) {
    d.inputs.data()[i] = rng.normal();
  }
  d.labels.resize(n);
  for (auto& y : d.labels) y = static_cast<int>(rng.bounded(classes));
  d.input_shape = {width, 1, 1};
  d.num_classes = classes;
  return d;
}

}  // namespace

TEST_CASE("mask extraction at eps 0 drops exactly the hard zeros") {
  WeightCollection x;
  // 1e-150 squares to 1e-300, still representable: the row norm is
  // nonzero, so eps = 0 must keep the row.
  x.add("a", Matrix(3, 2, std::vector<double>{1, 2, 0, 0, 1e-150, 0}));
  WeightCollection y;
  y.add("a", Matrix(3, 2, std::vector<double>{1, 0, 2, 0, 3, 0}));

  PrunerState st;
  st.x = x;
  st.y = y;
  const SparsityMask mask = extract_mask(st, 0.0);
  const auto& lm = mask.layer(0);
  REQUIRE(lm.row_keep == std::vector<bool>{true, false, true});  // row 1 zero
  REQUIRE(lm.col_keep == std::vector<bool>{true, false});        // col 1 zero
  // A tiny but nonzero row survives at eps = 0.
  REQUIRE(lm.row_keep[2]);
}

TEST_CASE("compression accounting on the reference counting example") {
  WeightCollection w;
  w.add("conv1", Matrix(64, 576, 1.0));
  SparsityMask mask = SparsityMask::all_keep(w);
  auto& lm = mask.layer(0);
  for (std::size_t r = 32; r < 64; ++r) lm.row_keep[r] = false;
  for (std::size_t c = 288; c < 576; ++c) lm.col_keep[c] = false;

  const CompressionReport rep = make_compression_report(mask);
  REQUIRE(rep.total_params == 64 * 576);
  REQUIRE(rep.remaining_params == 32 * 288);
  REQUIRE(rep.rate == 4.0);
  REQUIRE(rep.layers.size() == 1);
  REQUIRE(rep.layers[0].kept_rows == 32);
  REQUIRE(rep.layers[0].kept_cols == 288);
  REQUIRE(rep.layers[0].rate == 4.0);
}

TEST_CASE("a larger threshold always drops a superset of groups") {
  Rng rng(12);
  const WeightCollection w = random_collection(rng, 8, 8);
  double prev_eps = 0.0;
  SparsityMask prev = mask_from_collections(w, w, prev_eps);
  for (double eps : {0.01, 0.05, 0.1, 0.2, 0.4}) {
    const SparsityMask cur = mask_from_collections(w, w, eps);
    REQUIRE(cur.drops_superset_of(prev));
    prev = cur;
  }
  REQUIRE_THROWS_AS(mask_from_collections(w, w, -0.1), std::invalid_argument);
}

TEST_CASE("relative threshold scales with the layer norm") {
  // Same direction, different magnitude: the relative rule must make the
  // same keep decision for both layers.
  WeightCollection w;
  w.add("small", Matrix(2, 2, std::vector<double>{1, 0, 0.001, 0}));
  w.add("big", Matrix(2, 2, std::vector<double>{1000, 0, 1, 0}));
  // eps 0.1: small layer cut = 0.1 * (1 + ~1) ~ 0.2; big cut ~ 100.1.
  const SparsityMask m = mask_from_collections(w, w, 0.1);
  REQUIRE(m.layer(0).row_keep == std::vector<bool>{true, false});
  REQUIRE(m.layer(1).row_keep == std::vector<bool>{true, false});
}

TEST_CASE("applying the all-keep mask changes nothing") {
  Model m({LayerSpec::dense(4, 6), LayerSpec::relu(), LayerSpec::dense(6, 2),
           LayerSpec::softmax_xent()},
          {4, 1, 1});
  Rng rng(13);
  m.init_weights(rng);
  Dataset d = random_flat_dataset(rng, 4, 4, 2);
  const std::vector<std::size_t> idx{0, 1, 2, 3};
  const ForwardResult before = m.forward(d, idx);
  const WeightCollection saved = m.prunable_weights();

  apply_mask(m, SparsityMask::all_keep(m.prunable_weights()));
  REQUIRE(m.mask() != nullptr);
  for (std::size_t i = 0; i < saved.size(); ++i) {
    REQUIRE(m.prunable_weights().matrix(i) == saved.matrix(i));
  }
  const ForwardResult after = m.forward(d, idx);
  REQUIRE(before.loss == after.loss);
}

TEST_CASE("emptying a layer is reported as a numeric error by name") {
  Model m({LayerSpec::dense(4, 6), LayerSpec::relu(), LayerSpec::dense(6, 2),
           LayerSpec::softmax_xent()},
          {4, 1, 1});
  Rng rng(14);
  m.init_weights(rng);
  SparsityMask mask = SparsityMask::all_keep(m.prunable_weights());
  for (std::size_t r = 0; r < 6; ++r) mask.layer(0).row_keep[r] = false;

  REQUIRE_THROWS_MATCHES(apply_mask(m, mask), numeric_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("fc1")));
  // The throw happens before any weight is zeroed.
  bool any_zero_row = true;
  for (std::size_t c = 0; c < 4; ++c) {
    if (m.prunable_weights().matrix(0)(0, c) != 0.0) any_zero_row = false;
  }
  REQUIRE_FALSE(any_zero_row);
  REQUIRE(m.mask() == nullptr);
}

TEST_CASE("apply_mask zeroes dropped weights and dropped-row biases") {
  Model m({LayerSpec::dense(3, 4), LayerSpec::relu(), LayerSpec::dense(4, 2),
           LayerSpec::softmax_xent()},
          {3, 1, 1});
  Rng rng(15);
  m.init_weights(rng);
  for (auto& b : m.bias_params()) {
    for (auto& v : b) v = 0.5;
  }
  SparsityMask mask = SparsityMask::all_keep(m.prunable_weights());
  mask.layer(0).row_keep[2] = false;
  mask.layer(0).col_keep[0] = false;
  mask.layer(1).col_keep[2] = false;

  apply_mask(m, mask);
  const Matrix& w1 = m.prunable_weights().matrix(0);
  for (std::size_t c = 0; c < 3; ++c) REQUIRE(w1(2, c) == 0.0);
  for (std::size_t r = 0; r < 4; ++r) REQUIRE(w1(r, 0) == 0.0);
  REQUIRE(m.bias_params()[0][2] == 0.0);  // dropped row's bias
  REQUIRE(m.bias_params()[0][0] == 0.5);  // kept row's bias untouched
  const Matrix& w2 = m.prunable_weights().matrix(1);
  for (std::size_t r = 0; r < 2; ++r) REQUIRE(w2(r, 2) == 0.0);
  REQUIRE(w1(0, 1) != 0.0);  // kept weights untouched
}

TEST_CASE("retrain demands a mask and then keeps dropped entries at zero") {
  Model m({LayerSpec::dense(4, 6), LayerSpec::relu(), LayerSpec::dense(6, 2),
           LayerSpec::softmax_xent()},
          {4, 1, 1});
  Rng rng(16);
  m.init_weights(rng);
  Dataset d = random_flat_dataset(rng, 24, 4, 2);

  HyperParams hp;
  hp.lr = 5e-3;
  hp.retrain_epochs = 6;
  hp.batch_size = 8;
  REQUIRE_THROWS_AS(retrain(m, d, hp, 1), std::invalid_argument);

  SparsityMask mask = SparsityMask::all_keep(m.prunable_weights());
  mask.layer(0).row_keep[3] = false;
  mask.layer(1).col_keep[3] = false;
  apply_mask(m, mask);

  std::size_t epochs_seen = 0;
  retrain(m, d, hp, 1, [&](const EpochStats& s) {
    REQUIRE(s.epoch == epochs_seen);
    ++epochs_seen;
  });
  REQUIRE(epochs_seen == 6);
  for (std::size_t c = 0; c < 4; ++c) {
    REQUIRE(m.prunable_weights().matrix(0)(3, c) == 0.0);
  }
  REQUIRE(m.bias_params()[0][3] == 0.0);
  for (std::size_t r = 0; r < 2; ++r) {
    REQUIRE(m.prunable_weights().matrix(1)(r, 3) == 0.0);
  }
}

TEST_CASE("retraining under the all-keep mask equals plain training") {
  const auto build = [] {
    Model m({LayerSpec::dense(5, 8), LayerSpec::relu(), LayerSpec::dense(8, 3),
             LayerSpec::softmax_xent()},
            {5, 1, 1});
    Rng rng(17);
    m.init_weights(rng);
    return m;
  };
  Rng rng(18);
  const Dataset d = random_flat_dataset(rng, 20, 5, 3);

  HyperParams hp;
  hp.lr = 2e-3;
  hp.retrain_epochs = 4;
  hp.batch_size = 8;

  Model masked = build();
  apply_mask(masked, SparsityMask::all_keep(masked.prunable_weights()));
  const double loss_masked = retrain(masked, d, hp, 77);

  Model plain = build();
  OptimState opt = OptimState::make(plain, AdamConfig{.lr = hp.lr});
  const double loss_plain =
      train(plain, d, opt, {.epochs = 4, .batch_size = 8, .seed = 77});

  REQUIRE(loss_masked == loss_plain);
  for (std::size_t i = 0; i < plain.prunable_weights().size(); ++i) {
    REQUIRE(masked.prunable_weights().matrix(i) ==
            plain.prunable_weights().matrix(i));
  }
}

TEST_CASE("compression report survives a JSON round trip") {
  WeightCollection w;
  w.add("conv1", Matrix(8, 9, 1.0));
  w.add("fc2", Matrix(4, 8, 1.0));
  SparsityMask mask = SparsityMask::all_keep(w);
  mask.layer(0).row_keep[5] = false;
  mask.layer(1).col_keep[5] = false;
  CompressionReport rep = make_compression_report(mask);
  rep.base_accuracy = 91.25;
  rep.pruned_accuracy = 88.5;
  // retrained stays NaN: not measured.

  const json doc = to_json(rep);
  REQUIRE(doc.contains("base_accuracy"));
  REQUIRE_FALSE(doc.contains("retrained_accuracy"));

  const CompressionReport back = compression_report_from_json(doc);
  REQUIRE(back.total_params == rep.total_params);
  REQUIRE(back.remaining_params == rep.remaining_params);
  REQUIRE(back.rate == rep.rate);
  REQUIRE(back.layers.size() == 2);
  REQUIRE(back.layers[0].id == "conv1");
  REQUIRE(back.layers[0].kept_rows == 7);
  REQUIRE(back.layers[1].kept_cols == 7);
  REQUIRE(back.base_accuracy == 91.25);
  REQUIRE(back.pruned_accuracy == 88.5);
  REQUIRE(std::isnan(back.retrained_accuracy));
}

TEST_CASE("metrics files append one JSON object per line") {
  const std::string path = "pipeline_metrics_test.jsonl";
  {
    MetricsWriter writer(path);
    writer.write(json{{"t", 1}, {"loss", 0.5}});
    writer.write(json{{"t", 2}, {"loss", 0.25}});
  }
  const std::vector<json> rows = read_jsonl(path);
  REQUIRE(rows.size() == 2);
  REQUIRE(rows[0]["t"] == 1);
  REQUIRE(rows[1]["loss"] == 0.25);
  std::remove(path.c_str());
}

TEST_CASE("pruned network computes the same function as a compacted one") {
  // 6 -> 4 -> 2 stack; drop input feature 5, hidden unit 2. The surviving
  // subnetwork must behave exactly like a physically smaller 5 -> 3 -> 2
  // model built from the kept rows and columns.
  Model full({LayerSpec::dense(6, 4), LayerSpec::relu(), LayerSpec::dense(4, 2),
              LayerSpec::softmax_xent()},
             {6, 1, 1});
  Rng rng(19);
  full.init_weights(rng);
  for (auto& b : full.bias_params()) {
    for (auto& v : b) v = rng.normal(0.0, 0.1);
  }

  SparsityMask mask = SparsityMask::all_keep(full.prunable_weights());
  mask.layer(0).row_keep[2] = false;  // hidden unit 2
  mask.layer(0).col_keep[5] = false;  // input feature 5
  mask.layer(1).col_keep[2] = false;  // consistent downstream column
  apply_mask(full, mask);

  Model compact({LayerSpec::dense(5, 3), LayerSpec::relu(),
                 LayerSpec::dense(3, 2), LayerSpec::softmax_xent()},
                {5, 1, 1});
  const std::vector<std::size_t> kept_hidden{0, 1, 3};
  const std::vector<std::size_t> kept_in{0, 1, 2, 3, 4};
  Matrix& c1 = compact.prunable_weights().matrix(0);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 5; ++c) {
      c1(r, c) = full.prunable_weights().matrix(0)(kept_hidden[r], kept_in[c]);
    }
    compact.bias_params()[0][r] = full.bias_params()[0][kept_hidden[r]];
  }
  Matrix& c2 = compact.prunable_weights().matrix(1);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      c2(r, c) = full.prunable_weights().matrix(1)(r, kept_hidden[c]);
    }
    compact.bias_params()[1][r] = full.bias_params()[1][r];
  }

  Rng data_rng(20);
  Dataset big = random_flat_dataset(data_rng, 8, 6, 2);
  Dataset small = big;
  small.inputs = Matrix(8, 5);
  small.input_shape = {5, 1, 1};
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t c = 0; c < 5; ++c) small.inputs(i, c) = big.inputs(i, c);
  }

  std::vector<std::size_t> idx(8);
  for (std::size_t i = 0; i < 8; ++i) idx[i] = i;
  const ForwardResult fa = full.forward(big, idx);
  const ForwardResult fb = compact.forward(small, idx);
  REQUIRE(std::fabs(fa.loss - fb.loss) < 1e-12);
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t k = 0; k < 2; ++k) {
      REQUIRE(std::fabs(fa.logits(i, k) - fb.logits(i, k)) < 1e-12);
    }
  }
}

TEST_CASE("dead-input diagnostic counts kept columns feeding dropped rows") {
  SECTION("dense to dense") {
    Model m({LayerSpec::dense(6, 4), LayerSpec::relu(), LayerSpec::dense(4, 2),
             LayerSpec::softmax_xent()},
            {6, 1, 1});
    SparsityMask mask = SparsityMask::all_keep(m.prunable_weights());
    mask.layer(0).row_keep[1] = false;
    // fc2 keeps all columns, so exactly column 1 reads a dead activation.
    const auto diag = dead_input_diagnostic(m, mask);
    REQUIRE(diag.size() == 1);
    REQUIRE(diag[0].layer_id == "fc2");
    REQUIRE(diag[0].dead_kept_cols == 1);

    // Dropping that column clears the diagnostic.
    mask.layer(1).col_keep[1] = false;
    REQUIRE(dead_input_diagnostic(m, mask)[0].dead_kept_cols == 0);
  }

  SECTION("conv to conv counts the whole kernel patch") {
    Model m({LayerSpec::conv2d(1, 4, 3, 3, 1, 1), LayerSpec::relu(),
             LayerSpec::conv2d(4, 4, 3, 3, 1, 1), LayerSpec::flatten(),
             LayerSpec::softmax_xent()},
            {1, 4, 4});
    SparsityMask mask = SparsityMask::all_keep(m.prunable_weights());
    mask.layer(0).row_keep[2] = false;  // drop output channel 2
    const auto diag = dead_input_diagnostic(m, mask);
    REQUIRE(diag.size() == 1);
    REQUIRE(diag[0].layer_id == "conv2");
    REQUIRE(diag[0].dead_kept_cols == 9);  // 3x3 kernel patch
  }

  SECTION("conv to dense maps spatial blocks to channels") {
    Model m({LayerSpec::conv2d(1, 3, 3, 3, 1, 1), LayerSpec::relu(),
             LayerSpec::flatten(), LayerSpec::dense(3 * 4 * 4, 2),
             LayerSpec::softmax_xent()},
            {1, 4, 4});
    SparsityMask mask = SparsityMask::all_keep(m.prunable_weights());
    mask.layer(0).row_keep[1] = false;  // drop channel 1 of 3
    const auto diag = dead_input_diagnostic(m, mask);
    REQUIRE(diag.size() == 1);
    REQUIRE(diag[0].dead_kept_cols == 16);  // one 4x4 spatial block
  }
}

TEST_CASE("direct comparator with no penalty and eps 0 prunes nothing") {
  Model m({LayerSpec::dense(4, 6), LayerSpec::relu(), LayerSpec::dense(6, 2),
           LayerSpec::softmax_xent()},
          {4, 1, 1});
  Rng rng(21);
  m.init_weights(rng);
  Dataset train_d = random_flat_dataset(rng, 16, 4, 2);
  Dataset test_d = random_flat_dataset(rng, 8, 4, 2);

  HyperParams hp;
  hp.lambda = 0.0;
  hp.lr = 1e-3;
  hp.iterations = 3;
  hp.primal_epochs = 2;
  hp.retrain_epochs = 2;
  hp.batch_size = 8;
  DirectOptions opts;
  opts.epsilon = 0.0;

  const DirectResult res = direct_baseline(m, train_d, &test_d, hp, opts);
  REQUIRE(res.report.rate == 1.0);
  REQUIRE(res.epsilon_used == 0.0);
  REQUIRE(res.history.size() == 6);  // iterations * primal_epochs epochs
  REQUIRE(std::isfinite(res.report.pruned_accuracy));
  REQUIRE(std::isfinite(res.report.retrained_accuracy));
  for (std::size_t e = 0; e + 1 < res.history.size(); ++e) {
    REQUIRE(res.history[e].epoch == e);
    REQUIRE(res.history[e].penalty > 0.0);
  }
}

TEST_CASE("penalized training shrinks the group penalty") {
  const auto run = [](double lambda) {
    Model m({LayerSpec::dense(6, 8), LayerSpec::relu(), LayerSpec::dense(8, 2),
             LayerSpec::softmax_xent()},
            {6, 1, 1});
    Rng rng(22);
    m.init_weights(rng);
    Dataset d = random_flat_dataset(rng, 32, 6, 2);
    HyperParams hp;
    hp.lambda = lambda;
    hp.lr = 5e-3;
    hp.iterations = 20;
    hp.primal_epochs = 1;
    hp.retrain_epochs = 1;
    hp.batch_size = 8;
    DirectOptions opts;
    opts.epsilon = 0.0;
    const DirectResult res = direct_baseline(m, d, nullptr, hp, opts);
    return res.history.back().penalty;
  };
  // A clearly stronger penalty weight must land at a smaller group penalty.
  REQUIRE(run(0.05) < run(0.0));
}

TEST_CASE("epsilon search matches the requested compression rate") {
  Rng rng(23);
  const WeightCollection w = random_collection(rng, 10, 10);

  REQUIRE_THROWS_AS(pick_direct_epsilon(w, 0.5), std::invalid_argument);

  for (double target : {1.0, 1.5, 2.0, 4.0, 8.0}) {
    const double eps = pick_direct_epsilon(w, target);
    const SparsityMask m = mask_from_collections(w, w, eps);
    const double got = static_cast<double>(m.total_params()) /
                       static_cast<double>(m.remaining_params());

    // Independent brute-force check: no other candidate eps comes closer
    // without emptying a layer.
    double best_gap = std::fabs(got - target);
    std::vector<double> cands{0.0};
    const double scale = 1.0 + w.matrix(0).frobenius_norm();
    for (double n : row_l2_norms(w.matrix(0))) cands.push_back(n / scale);
    for (double n : col_l2_norms(w.matrix(0))) cands.push_back(n / scale);
    for (double c : cands) {
      const SparsityMask cm = mask_from_collections(w, w, c);
      if (cm.layer(0).kept_rows() == 0 || cm.layer(0).kept_cols() == 0) {
        continue;
      }
      const double r = static_cast<double>(cm.total_params()) /
                       static_cast<double>(cm.remaining_params());
      REQUIRE(best_gap <= std::fabs(r - target) + 1e-12);
    }
  }

  // An absurd target must still return a non-emptying threshold.
  const double eps = pick_direct_epsilon(w, 1e9);
  const SparsityMask m = mask_from_collections(w, w, eps);
  REQUIRE(m.layer(0).kept_rows() >= 1);
  REQUIRE(m.layer(0).kept_cols() >= 1);
}

TEST_CASE("target-rate mode reaches a nearby compression rate end to end") {
  Model m({LayerSpec::dense(8, 16), LayerSpec::relu(),
           LayerSpec::dense(16, 2), LayerSpec::softmax_xent()},
          {8, 1, 1});
  Rng rng(24);
  m.init_weights(rng);
  Dataset d = random_flat_dataset(rng, 32, 8, 2);

  HyperParams hp;
  hp.lambda = 1e-3;
  hp.lr = 3e-3;
  hp.iterations = 10;
  hp.primal_epochs = 1;
  hp.retrain_epochs = 2;
  hp.batch_size = 8;
  DirectOptions opts;
  opts.target_rate = 2.0;

  const DirectResult res = direct_baseline(m, d, nullptr, hp, opts);
  REQUIRE(res.epsilon_used > 0.0);
  REQUIRE(res.report.rate == Catch::Approx(2.0).margin(0.5));
  REQUIRE(res.report.remaining_params > 0);
}
