#ifndef PRUNEKIT_CHECKPOINT_HPP_
#define PRUNEKIT_CHECKPOINT_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "prunekit/errors.hpp"
#include "prunekit/mask.hpp"
#include "prunekit/matrix.hpp"
#include "prunekit/trainable.hpp"

namespace prunekit {

namespace detail {

// Little-endian byte serialization, independent of host order.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(const char* p, std::size_t n) { out_.append(p, n); }
  const std::string& str() const { return out_; }

 private:
  std::string out_;
};

class ByteReader {
 public:
  ByteReader(std::string data, std::string origin)
      : data_(std::move(data)), origin_(std::move(origin)) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint16_t u16() {
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(u8()) << (8 * i);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == data_.size(); }
  void fail(const std::string& why) const {
    throw io_error("'" + origin_ + "': " + why);
  }

 private:
  void need(std::size_t n) {
    if (pos_ + n > data_.size()) fail("truncated file");
  }
  std::string data_;
  std::string origin_;
  std::size_t pos_ = 0;
};

inline std::string slurp_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw io_error("cannot open '" + path + "'");
  }
  std::ostringstream body;
  body << in.rdbuf();
  return body.str();
}

inline void spill_binary(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw io_error("cannot create '" + path + "'");
  }
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) {
    throw io_error("write failed for '" + path + "'");
  }
}

}  // namespace detail

struct CheckpointMeta {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::uint32_t epoch = 0;  // completed epochs/iterations when written
  bool pruned = false;      // a non-trivial mask was stored
};

inline constexpr char kCheckpointMagic[4] = {'P', 'K', 'C', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (all little-endian):
//   "PKCP" u32 version, u64 config-hash, u64 seed, u32 epoch, u32 flags,
//   u32 layer-count, then per layer:
//     u8 kind (0 dense-like, 1 conv-like; informational)
//     u16 id-length, id bytes
//     u32 rows, u32 cols (logical shape)
//     rows bytes row-keep, cols bytes col-keep (1 = kept)
//     f32 weights, row-major over KEPT rows x KEPT cols only
//     u32 bias-count (kept rows, or 0 for bias-free objectives), f32 biases
// Dropped entries are not stored: the file realizes the pruned shape
// while the loader re-inflates to full matrices.
template <TrainableModel M>
void save_checkpoint(const std::string& path, const M& model,
                     std::uint64_t config_hash, std::uint64_t seed,
                     std::uint32_t epoch) {
  const WeightCollection& w = model.prunable_weights();
  const auto& biases = model.bias_params();
  const SparsityMask* mask = model.mask();
  SparsityMask all;
  if (mask == nullptr) {
    all = SparsityMask::all_keep(w);
    mask = &all;
  }
  mask->require_matches(w, "save_checkpoint");

  detail::ByteWriter out;
  out.bytes(kCheckpointMagic, 4);
  out.u32(kCheckpointVersion);
  out.u64(config_hash);
  out.u64(seed);
  out.u32(epoch);
  const bool pruned = mask->remaining_params() != mask->total_params();
  out.u32(pruned ? 1u : 0u);
  out.u32(static_cast<std::uint32_t>(w.size()));
  for (std::size_t i = 0; i < w.size(); ++i) {
    const Matrix& m = w.matrix(i);
    const auto& lm = mask->layer(i);
    const std::string& id = w.id(i);
    out.u8(id.rfind("conv", 0) == 0 ? 1 : 0);
    out.u16(static_cast<std::uint16_t>(id.size()));
    out.bytes(id.data(), id.size());
    out.u32(static_cast<std::uint32_t>(m.rows()));
    out.u32(static_cast<std::uint32_t>(m.cols()));
    for (std::size_t r = 0; r < m.rows(); ++r) out.u8(lm.row_keep[r] ? 1 : 0);
    for (std::size_t c = 0; c < m.cols(); ++c) out.u8(lm.col_keep[c] ? 1 : 0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (!lm.row_keep[r]) continue;
      for (std::size_t c = 0; c < m.cols(); ++c) {
        if (!lm.col_keep[c]) continue;
        out.f32(static_cast<float>(m(r, c)));
      }
    }
    const bool has_bias = i < biases.size() && biases[i].size() == m.rows();
    out.u32(has_bias ? static_cast<std::uint32_t>(lm.kept_rows()) : 0u);
    if (has_bias) {
      for (std::size_t r = 0; r < m.rows(); ++r) {
        if (lm.row_keep[r]) out.f32(static_cast<float>(biases[i][r]));
      }
    }
  }
  detail::spill_binary(path, out.str());
}

//! Restores weights, biases, and (when the file was pruned) the mask
//! into a model whose layer layout must already match the file.
template <TrainableModel M>
CheckpointMeta load_checkpoint(const std::string& path, M& model) {
  detail::ByteReader in(detail::slurp_binary(path), path);
  const std::string magic = in.bytes(4);
  if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0) {
    in.fail("not a checkpoint file");
  }
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    in.fail("unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointMeta meta;
  meta.config_hash = in.u64();
  meta.seed = in.u64();
  meta.epoch = in.u32();
  const std::uint32_t flags = in.u32();
  meta.pruned = (flags & 1u) != 0;

  WeightCollection& w = model.prunable_weights();
  auto& biases = model.bias_params();
  const std::uint32_t layers = in.u32();
  if (layers != w.size()) {
    in.fail("layer count mismatch (file " + std::to_string(layers) +
            ", model " + std::to_string(w.size()) + ")");
  }
  SparsityMask mask;
  for (std::size_t i = 0; i < w.size(); ++i) {
    (void)in.u8();  // kind is informational
    const std::uint16_t id_len = in.u16();
    const std::string id = in.bytes(id_len);
    if (id != w.id(i)) {
      in.fail("layer id mismatch ('" + id + "' vs '" + w.id(i) + "')");
    }
    Matrix& m = w.matrix(i);
    const std::uint32_t rows = in.u32();
    const std::uint32_t cols = in.u32();
    if (rows != m.rows() || cols != m.cols()) {
      in.fail("layer '" + id + "' shape mismatch");
    }
    SparsityMask::LayerMask lm;
    lm.id = id;
    lm.row_keep.reserve(rows);
    for (std::uint32_t r = 0; r < rows; ++r) lm.row_keep.push_back(in.u8() != 0);
    lm.col_keep.reserve(cols);
    for (std::uint32_t c = 0; c < cols; ++c) lm.col_keep.push_back(in.u8() != 0);
    for (std::size_t r = 0; r < rows; ++r) {
      double* row = m.row_ptr(r);
      for (std::size_t c = 0; c < cols; ++c) {
        row[c] = lm.keep(r, c) ? static_cast<double>(in.f32()) : 0.0;
      }
    }
    const std::uint32_t bias_count = in.u32();
    if (bias_count == 0) {
      if (i < biases.size() && biases[i].size() == m.rows()) {
        in.fail("layer '" + id + "': file has no biases but model does");
      }
    } else {
      if (bias_count != lm.kept_rows() || i >= biases.size() ||
          biases[i].size() != m.rows()) {
        in.fail("layer '" + id + "': bias count mismatch");
      }
      for (std::size_t r = 0; r < rows; ++r) {
        biases[i][r] = lm.row_keep[r] ? static_cast<double>(in.f32()) : 0.0;
      }
    }
    mask.add(std::move(lm));
  }
  if (!in.at_end()) {
    in.fail("trailing bytes after last layer");
  }
  if (meta.pruned) {
    model.set_mask(std::move(mask));
  } else {
    model.clear_mask();
  }
  return meta;
}

//! Guard for resuming: artifacts carry the structural hash of the
//! model/dataset config that produced them.
inline void require_config_hash(const CheckpointMeta& meta,
                                std::uint64_t expected,
                                const std::string& path) {
  if (meta.config_hash != expected) {
    throw io_error("'" + path +
                   "' was produced under a different model/dataset "
                   "configuration (config hash mismatch)");
  }
}

}  // namespace prunekit

#endif  // PRUNEKIT_CHECKPOINT_HPP_
