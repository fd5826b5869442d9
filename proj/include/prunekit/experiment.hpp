#ifndef PRUNEKIT_EXPERIMENT_HPP_
#define PRUNEKIT_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "prunekit/checkpoint.hpp"
#include "prunekit/config.hpp"
#include "prunekit/dataset.hpp"
#include "prunekit/errors.hpp"
#include "prunekit/metrics.hpp"
#include "prunekit/model.hpp"
#include "prunekit/optim.hpp"
#include "prunekit/pipeline.hpp"
#include "prunekit/pruner.hpp"
#include "prunekit/rng.hpp"

namespace prunekit {

// Fixed file names inside a run directory. One command owns one
// directory; parallel runs use distinct directories.
struct RunPaths {
  std::string dir;

  std::string baseline_ckpt() const { return dir + "/baseline.ckpt"; }
  std::string train_metrics() const { return dir + "/train_metrics.jsonl"; }
  std::string prune_metrics() const { return dir + "/prune_metrics.jsonl"; }
  std::string retrain_metrics() const {
    return dir + "/retrain_metrics.jsonl";
  }
  std::string pruned_ckpt() const { return dir + "/pruned.ckpt"; }
  std::string report() const { return dir + "/report.json"; }
  std::string direct_metrics() const { return dir + "/direct_metrics.jsonl"; }
  std::string direct_retrain_metrics() const {
    return dir + "/direct_retrain_metrics.jsonl";
  }
  std::string direct_ckpt() const { return dir + "/direct.ckpt"; }
  std::string direct_report() const { return dir + "/direct_report.json"; }
};

namespace detail {

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw io_error("cannot create output directory '" + dir +
                   "': " + ec.message());
  }
}

// Substream tags for one run seed: weight init, pruning schedule,
// retraining, gradient-check probes.
inline constexpr std::uint64_t kInitStream = 0;
inline constexpr std::uint64_t kPruneStream = 1;
inline constexpr std::uint64_t kRetrainStream = 2;
inline constexpr std::uint64_t kProbeStream = 3;

}  // namespace detail

struct TrainOutcome {
  double final_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

//! Dense baseline: init, train for train.epochs, write baseline.ckpt and
//! one metrics row per epoch.
inline TrainOutcome cmd_train(const Config& cfg, const std::string& out_dir,
                              std::uint64_t seed) {
  detail::ensure_dir(out_dir);
  RunPaths paths{out_dir};
  const LoadedData data = load_dataset(cfg, seed);
  Model model = build_model(cfg);
  Rng init_rng(mix_seed(seed, detail::kInitStream));
  model.init_weights(init_rng);

  TrainConfig tc;
  tc.epochs = cfg.get_size("train.epochs", 100);
  tc.batch_size = cfg.get_size("train.batch_size", 32);
  tc.seed = seed;
  OptimState opt = OptimState::make(
      model, AdamConfig{.lr = cfg.get_double("train.lr", 1e-3)});

  MetricsWriter metrics(paths.train_metrics());
  TrainOutcome out;
  EpochObserver log = [&](const EpochStats& s) {
    const double acc = evaluate_accuracy(model, data.train);
    metrics.write(
        {{"epoch", s.epoch}, {"loss", s.mean_loss}, {"train_accuracy", acc}});
    out.final_loss = s.mean_loss;
    out.train_accuracy = acc;
  };
  train(model, data.train, opt, tc, {}, log);
  out.test_accuracy = evaluate_accuracy(model, data.test);

  save_checkpoint(paths.baseline_ckpt(), model, cfg.structural_hash(), seed,
                  static_cast<std::uint32_t>(tc.epochs));
  return out;
}

//! The single-shot schedule end to end: load baseline, T pruning
//! iterations, mask extraction, hard prune, retrain, report. Writes
//! prune_metrics.jsonl (T rows), retrain_metrics.jsonl, pruned.ckpt,
//! report.json.
inline CompressionReport cmd_prune(const Config& cfg,
                                   const std::string& out_dir,
                                   std::uint64_t seed,
                                   const std::string& baseline_path) {
  detail::ensure_dir(out_dir);
  RunPaths paths{out_dir};
  const LoadedData data = load_dataset(cfg, seed);
  Model model = build_model(cfg);
  const CheckpointMeta meta = load_checkpoint(baseline_path, model);
  require_config_hash(meta, cfg.structural_hash(), baseline_path);

  HyperParams hp =
      hyper_params_from(cfg, mix_seed(seed, detail::kPruneStream));
  const double base_acc = evaluate_accuracy(model, data.test);

  MetricsWriter prune_metrics(paths.prune_metrics());
  PruneObserver observer = [&](const IterationMetrics& m, const PrunerState&) {
    prune_metrics.write(to_json(m));
  };
  RunResult run = run_pruner(model, data.train, hp, observer);

  const SparsityMask mask = extract_mask(run.state, hp.zero_epsilon);
  apply_mask(model, mask);
  const double pruned_acc = evaluate_accuracy(model, data.test);

  MetricsWriter retrain_metrics(paths.retrain_metrics());
  EpochObserver retrain_log = [&](const EpochStats& s) {
    retrain_metrics.write({{"epoch", s.epoch},
                           {"loss", s.mean_loss},
                           {"train_accuracy",
                            evaluate_accuracy(model, data.train)}});
  };
  retrain(model, data.train, hp, mix_seed(seed, detail::kRetrainStream),
          retrain_log);
  const double retrained_acc = evaluate_accuracy(model, data.test);

  CompressionReport report = make_compression_report(mask);
  report.base_accuracy = base_acc;
  report.pruned_accuracy = pruned_acc;
  report.retrained_accuracy = retrained_acc;

  json doc = to_json(report);
  doc["prune_iterations"] = hp.iterations;
  doc["retrain_epochs"] = hp.retrain_epochs;
  json dead = json::array();
  for (const auto& d : dead_input_diagnostic(model, mask)) {
    dead.push_back({{"id", d.layer_id}, {"dead_kept_cols", d.dead_kept_cols}});
  }
  doc["dead_input_columns"] = dead;
  write_json_file(paths.report(), doc);

  save_checkpoint(paths.pruned_ckpt(), model, cfg.structural_hash(), seed,
                  static_cast<std::uint32_t>(hp.retrain_epochs));
  return report;
}

//! The uniform-penalty comparator on the same schedule and budget.
//! Writes direct_metrics.jsonl, direct_retrain_metrics.jsonl,
//! direct.ckpt, direct_report.json.
inline CompressionReport cmd_baseline_direct(const Config& cfg,
                                             const std::string& out_dir,
                                             std::uint64_t seed,
                                             const std::string& baseline_path) {
  detail::ensure_dir(out_dir);
  RunPaths paths{out_dir};
  const LoadedData data = load_dataset(cfg, seed);
  Model model = build_model(cfg);
  const CheckpointMeta meta = load_checkpoint(baseline_path, model);
  require_config_hash(meta, cfg.structural_hash(), baseline_path);

  HyperParams hp =
      hyper_params_from(cfg, mix_seed(seed, detail::kPruneStream));
  DirectOptions opts;
  opts.epsilon = cfg.get_double("direct.epsilon", opts.epsilon);
  opts.target_rate = cfg.get_double("direct.target_rate", opts.target_rate);

  const double base_acc = evaluate_accuracy(model, data.test);
  MetricsWriter metrics(paths.direct_metrics());
  DirectEpochObserver train_log = [&](const DirectEpoch& e) {
    metrics.write(
        {{"epoch", e.epoch}, {"loss", e.loss}, {"penalty", e.penalty}});
  };
  MetricsWriter retrain_metrics(paths.direct_retrain_metrics());
  EpochObserver retrain_log = [&](const EpochStats& s) {
    retrain_metrics.write({{"epoch", s.epoch},
                           {"loss", s.mean_loss},
                           {"train_accuracy",
                            evaluate_accuracy(model, data.train)}});
  };
  DirectResult result = direct_baseline(model, data.train, &data.test, hp,
                                        opts, train_log, retrain_log);
  result.report.base_accuracy = base_acc;

  json doc = to_json(result.report);
  doc["prune_iterations"] = hp.iterations;
  doc["retrain_epochs"] = hp.retrain_epochs;
  doc["epsilon_used"] = result.epsilon_used;
  write_json_file(paths.direct_report(), doc);

  save_checkpoint(paths.direct_ckpt(), model, cfg.structural_hash(), seed,
                  static_cast<std::uint32_t>(hp.retrain_epochs));
  return result.report;
}

//! One consolidated document over several completed run directories:
//! a row per run plus the per-layer remaining-parameter series. Missing
//! or unreadable runs become error entries instead of aborting the rest.
inline json cmd_report(const std::vector<std::string>& run_dirs) {
  json rows = json::array();
  for (const std::string& dir : run_dirs) {
    RunPaths paths{dir};
    std::string file;
    if (std::filesystem::exists(paths.report())) {
      file = paths.report();
    } else if (std::filesystem::exists(paths.direct_report())) {
      file = paths.direct_report();
    } else {
      rows.push_back({{"run", dir}, {"error", "no report.json found"}});
      continue;
    }
    try {
      const json doc = read_json_file(file);
      json row{{"run", dir},
               {"rate", doc.at("rate")},
               {"total_params", doc.at("total_params")},
               {"remaining_params", doc.at("remaining_params")},
               {"prune_iterations", doc.value("prune_iterations", 0)},
               {"retrain_epochs", doc.value("retrain_epochs", 0)}};
      if (doc.contains("base_accuracy")) {
        row["base_accuracy"] = doc["base_accuracy"];
      }
      if (doc.contains("pruned_accuracy")) {
        row["pruned_accuracy"] = doc["pruned_accuracy"];
      }
      if (doc.contains("retrained_accuracy")) {
        row["retrained_accuracy"] = doc["retrained_accuracy"];
      }
      json series = json::array();
      for (const auto& l : doc.at("layers")) {
        series.push_back({{"id", l.at("id")}, {"remaining", l.at("remaining")}});
      }
      row["per_layer_remaining"] = series;
      rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      rows.push_back({{"run", dir}, {"error", e.what()}});
    }
  }
  return json{{"runs", rows}};
}

//! Finite-difference audit of the configured model on a small batch.
inline GradCheckReport cmd_gradient_check(const Config& cfg,
                                          std::uint64_t seed,
                                          std::size_t probes_per_layer = 20,
                                          double h = 1e-5) {
  const LoadedData data = load_dataset(cfg, seed);
  Model model = build_model(cfg);
  Rng init_rng(mix_seed(seed, detail::kInitStream));
  model.init_weights(init_rng);
  const std::size_t n = std::min<std::size_t>(16, data.train.size());
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return gradient_check(model, data.train, idx, probes_per_layer, h,
                        mix_seed(seed, detail::kProbeStream));
}

}  // namespace prunekit

#endif  // PRUNEKIT_EXPERIMENT_HPP_
