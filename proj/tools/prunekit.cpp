// Command-line driver: train -> prune -> retrain -> report experiment
// pipeline over the header-only library. One subcommand per pipeline
// stage; every run is reproducible from (config, seed) in single-thread
// mode. Exit codes: 0 ok, 1 usage, 2 numeric failure, 3 I/O failure.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <prunekit/prunekit.hpp>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitIo = 3;

constexpr double kGradCheckTolerance = 1e-4;

void warn_threads(unsigned threads) {
  if (threads != 1) {
    std::fprintf(stderr,
                 "note: --threads %u requested; running in the "
                 "single-threaded reference mode\n",
                 threads);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structured row/column pruning toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "run";
  std::string baseline_path;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::vector<std::string> report_dirs;
  std::string report_out;

  const auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* opt = cmd->add_option("--config", config_path, "config file");
    if (needs_config) opt->required();
    cmd->add_option("--out", out_dir, "run directory (default: run)");
    cmd->add_option("--seed", seed, "run seed (default: 0)");
    cmd->add_option("--threads", threads, "worker threads (default: 1)");
  };

  auto* cmd_train = app.add_subcommand("train", "train the dense baseline");
  add_common(cmd_train, true);

  auto* cmd_prune = app.add_subcommand(
      "prune", "single-shot prune + retrain from a baseline checkpoint");
  add_common(cmd_prune, true);
  cmd_prune->add_option("--baseline", baseline_path,
                        "baseline checkpoint (default: <out>/baseline.ckpt)");

  auto* cmd_direct = app.add_subcommand(
      "baseline-direct",
      "uniform-penalty comparator: penalized training + threshold + retrain");
  add_common(cmd_direct, true);
  cmd_direct->add_option("--baseline", baseline_path,
                         "baseline checkpoint (default: <out>/baseline.ckpt)");

  auto* cmd_report =
      app.add_subcommand("report", "consolidate completed run directories");
  cmd_report->add_option("dirs", report_dirs, "run directories")->required();
  cmd_report->add_option("--out", report_out,
                         "also write consolidated.json here");

  auto* cmd_gc = app.add_subcommand(
      "gradient-check",
      "finite-difference audit of the configured model's gradients");
  add_common(cmd_gc, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  warn_threads(threads);
  try {
    if (app.got_subcommand(cmd_train)) {
      const prunekit::Config cfg = prunekit::Config::from_file(config_path);
      const prunekit::TrainOutcome out =
          prunekit::cmd_train(cfg, out_dir, seed);
      std::printf("trained: loss %.6f, train acc %.2f%%, test acc %.2f%%\n",
                  out.final_loss, out.train_accuracy, out.test_accuracy);
      std::printf("checkpoint: %s/baseline.ckpt\n", out_dir.c_str());
    } else if (app.got_subcommand(cmd_prune)) {
      const prunekit::Config cfg = prunekit::Config::from_file(config_path);
      if (baseline_path.empty()) baseline_path = out_dir + "/baseline.ckpt";
      const prunekit::CompressionReport rep =
          prunekit::cmd_prune(cfg, out_dir, seed, baseline_path);
      std::printf(
          "pruned: %.2fx compression (%zu of %zu params kept)\n"
          "accuracy: base %.2f%%, pruned %.2f%%, retrained %.2f%%\n",
          rep.rate, rep.remaining_params, rep.total_params, rep.base_accuracy,
          rep.pruned_accuracy, rep.retrained_accuracy);
      std::printf("report: %s/report.json\n", out_dir.c_str());
    } else if (app.got_subcommand(cmd_direct)) {
      const prunekit::Config cfg = prunekit::Config::from_file(config_path);
      if (baseline_path.empty()) baseline_path = out_dir + "/baseline.ckpt";
      const prunekit::CompressionReport rep =
          prunekit::cmd_baseline_direct(cfg, out_dir, seed, baseline_path);
      std::printf(
          "direct baseline: %.2fx compression (%zu of %zu params kept)\n"
          "accuracy: base %.2f%%, pruned %.2f%%, retrained %.2f%%\n",
          rep.rate, rep.remaining_params, rep.total_params, rep.base_accuracy,
          rep.pruned_accuracy, rep.retrained_accuracy);
      std::printf("report: %s/direct_report.json\n", out_dir.c_str());
    } else if (app.got_subcommand(cmd_report)) {
      const prunekit::json doc = prunekit::cmd_report(report_dirs);
      std::printf("%s\n", doc.dump(2).c_str());
      if (!report_out.empty()) {
        prunekit::detail::ensure_dir(report_out);
        prunekit::write_json_file(report_out + "/consolidated.json", doc);
      }
    } else if (app.got_subcommand(cmd_gc)) {
      const prunekit::Config cfg = prunekit::Config::from_file(config_path);
      const prunekit::GradCheckReport rep =
          prunekit::cmd_gradient_check(cfg, seed);
      std::printf("gradient check: max relative error %.3e over %zu probes\n",
                  rep.max_rel_err, rep.probes);
      if (!rep.passed(kGradCheckTolerance)) {
        std::fprintf(stderr, "gradient check FAILED (tolerance %.1e)\n",
                     kGradCheckTolerance);
        return kExitNumeric;
      }
      std::printf("gradient check passed (tolerance %.1e)\n",
                  kGradCheckTolerance);
    }
  } catch (const prunekit::io_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const prunekit::numeric_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitOk;
}
