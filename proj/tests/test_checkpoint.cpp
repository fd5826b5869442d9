#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include <prunekit/checkpoint.hpp>
#include <prunekit/errors.hpp>
#include <prunekit/mask.hpp>
#include <prunekit/model.hpp>
#include <prunekit/pipeline.hpp>
#include <prunekit/rng.hpp>

using namespace prunekit;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

Model make_model(std::uint64_t seed = 31) {
  Model m({LayerSpec::conv2d(1, 3, 3, 3, 1, 1), LayerSpec::relu(),
           LayerSpec::flatten(), LayerSpec::dense(3 * 4 * 4, 2),
           LayerSpec::softmax_xent()},
          {1, 4, 4});
  Rng rng(seed);
  m.init_weights(rng);
  for (auto& b : m.bias_params()) {
    for (auto& v : b) v = rng.normal(0.0, 0.2);
  }
  return m;
}

double f32_rounded(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

TEST_CASE("save, load, save produces byte-identical files") {
  TempFile a("ckpt_a.bin"), b("ckpt_b.bin");
  Model m = make_model();
  save_checkpoint(a.path, m, 0xDEADBEEFULL, 42, 17);

  Model fresh = make_model(99);  // different weights, same layout
  const CheckpointMeta meta = load_checkpoint(a.path, fresh);
  REQUIRE(meta.config_hash == 0xDEADBEEFULL);
  REQUIRE(meta.seed == 42);
  REQUIRE(meta.epoch == 17);
  REQUIRE_FALSE(meta.pruned);
  REQUIRE(fresh.mask() == nullptr);

  save_checkpoint(b.path, fresh, 0xDEADBEEFULL, 42, 17);
  REQUIRE(detail::slurp_binary(a.path) == detail::slurp_binary(b.path));
}

TEST_CASE("weights round-trip through the f32 storage format") {
  TempFile f("ckpt_round.bin");
  Model m = make_model();
  save_checkpoint(f.path, m, 1, 2, 3);

  Model restored = make_model(99);
  load_checkpoint(f.path, restored);
  for (std::size_t i = 0; i < m.prunable_weights().size(); ++i) {
    const Matrix& orig = m.prunable_weights().matrix(i);
    const Matrix& back = restored.prunable_weights().matrix(i);
    for (std::size_t k = 0; k < orig.size(); ++k) {
      REQUIRE(back.data()[k] == f32_rounded(orig.data()[k]));
    }
  }
  for (std::size_t i = 0; i < m.bias_params().size(); ++i) {
    for (std::size_t r = 0; r < m.bias_params()[i].size(); ++r) {
      REQUIRE(restored.bias_params()[i][r] ==
              f32_rounded(m.bias_params()[i][r]));
    }
  }
}

TEST_CASE("pruned checkpoints restore the mask and hard zeros") {
  TempFile f("ckpt_pruned.bin");
  Model m = make_model();
  SparsityMask mask = SparsityMask::all_keep(m.prunable_weights());
  mask.layer(0).row_keep[1] = false;   // conv channel 1
  mask.layer(1).col_keep[20] = false;  // one dense input
  apply_mask(m, mask);
  save_checkpoint(f.path, m, 7, 8, 9);

  Model restored = make_model(99);
  const CheckpointMeta meta = load_checkpoint(f.path, restored);
  REQUIRE(meta.pruned);
  const SparsityMask* got = restored.mask();
  REQUIRE(got != nullptr);
  REQUIRE(got->matches(restored.prunable_weights()));
  REQUIRE_FALSE(got->layer(0).row_keep[1]);
  REQUIRE_FALSE(got->layer(1).col_keep[20]);
  REQUIRE(got->remaining_params() == mask.remaining_params());

  // Dropped entries come back as exact zeros, kept ones as f32 values.
  const Matrix& w0 = restored.prunable_weights().matrix(0);
  for (std::size_t c = 0; c < w0.cols(); ++c) REQUIRE(w0(1, c) == 0.0);
  REQUIRE(restored.bias_params()[0][1] == 0.0);
  const Matrix& w1 = restored.prunable_weights().matrix(1);
  for (std::size_t r = 0; r < w1.rows(); ++r) REQUIRE(w1(r, 20) == 0.0);
  REQUIRE(w0(0, 0) == f32_rounded(m.prunable_weights().matrix(0)(0, 0)));

  // A pruned save is smaller than the dense one: dropped params are not
  // stored.
  TempFile dense("ckpt_dense.bin");
  Model d = make_model();
  save_checkpoint(dense.path, d, 7, 8, 9);
  REQUIRE(detail::slurp_binary(f.path).size() <
          detail::slurp_binary(dense.path).size());
}

TEST_CASE("loading an unpruned file clears a stale mask") {
  TempFile f("ckpt_clear.bin");
  Model plain = make_model();
  save_checkpoint(f.path, plain, 1, 1, 1);

  Model m = make_model(99);
  apply_mask(m, SparsityMask::all_keep(m.prunable_weights()));
  REQUIRE(m.mask() != nullptr);
  load_checkpoint(f.path, m);
  REQUIRE(m.mask() == nullptr);
}

TEST_CASE("malformed checkpoint files raise I/O errors naming the path") {
  Model m = make_model();
  const auto expect_fail = [&](const std::string& body,
                               const std::string& needle) {
    TempFile f("ckpt_bad.bin");
    detail::spill_binary(f.path, body);
    Model target = make_model(99);
    try {
      load_checkpoint(f.path, target);
      FAIL("expected io_error containing '" << needle << "'");
    } catch (const io_error& e) {
      REQUIRE_THAT(e.what(), Catch::Matchers::ContainsSubstring(needle));
      REQUIRE_THAT(e.what(),
                   Catch::Matchers::ContainsSubstring("ckpt_bad.bin"));
    }
  };

  expect_fail("JUNKJUNKJUNKJUNK", "not a checkpoint");
  expect_fail("PKC", "truncated");  // shorter than the magic itself

  TempFile good("ckpt_good.bin");
  save_checkpoint(good.path, m, 1, 2, 3);
  const std::string bytes = detail::slurp_binary(good.path);

  // Truncation at any interesting boundary.
  expect_fail(bytes.substr(0, 10), "truncated");
  expect_fail(bytes.substr(0, bytes.size() / 2), "truncated");
  expect_fail(bytes.substr(0, bytes.size() - 1), "truncated");
  // Extra payload.
  expect_fail(bytes + "x", "trailing bytes");
  // Bumped version field.
  {
    std::string evil = bytes;
    evil[4] = 2;
    expect_fail(evil, "version");
  }

  REQUIRE_THROWS_AS(load_checkpoint("missing_dir/nope.bin", m), io_error);
}

TEST_CASE("layout mismatches are rejected") {
  TempFile f("ckpt_layout.bin");
  Model m = make_model();
  save_checkpoint(f.path, m, 1, 2, 3);

  // Same parameter count per layer id, different shape: a dense-only twin.
  Model other({LayerSpec::dense(8, 4), LayerSpec::relu(),
               LayerSpec::dense(4, 2), LayerSpec::softmax_xent()},
              {8, 1, 1});
  REQUIRE_THROWS_AS(load_checkpoint(f.path, other), io_error);

  Model fewer({LayerSpec::dense(48, 2), LayerSpec::softmax_xent()},
              {48, 1, 1});
  REQUIRE_THROWS_AS(load_checkpoint(f.path, fewer), io_error);
}

TEST_CASE("config hash guard separates incompatible runs") {
  CheckpointMeta meta;
  meta.config_hash = 0x1234;
  REQUIRE_NOTHROW(require_config_hash(meta, 0x1234, "x.ckpt"));
  try {
    require_config_hash(meta, 0x9999, "x.ckpt");
    FAIL("expected io_error");
  } catch (const io_error& e) {
    REQUIRE_THAT(e.what(), Catch::Matchers::ContainsSubstring("x.ckpt"));
    REQUIRE_THAT(e.what(),
                 Catch::Matchers::ContainsSubstring("configuration"));
  }
}
