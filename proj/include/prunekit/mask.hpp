#ifndef PRUNEKIT_MASK_HPP_
#define PRUNEKIT_MASK_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "prunekit/matrix.hpp"

namespace prunekit {

// Per-layer row-keep / column-keep vectors. An element survives iff its
// row survives AND its column survives; compression accounting is
// kept-rows x kept-cols per layer.
class SparsityMask {
 public:
  struct LayerMask {
    std::string id;
    std::vector<bool> row_keep;
    std::vector<bool> col_keep;

    std::size_t kept_rows() const { return count(row_keep); }
    std::size_t kept_cols() const { return count(col_keep); }
    std::size_t rows() const { return row_keep.size(); }
    std::size_t cols() const { return col_keep.size(); }
    std::size_t total() const { return rows() * cols(); }
    std::size_t remaining() const { return kept_rows() * kept_cols(); }

    bool keep(std::size_t r, std::size_t c) const {
      return row_keep[r] && col_keep[c];
    }

   private:
    static std::size_t count(const std::vector<bool>& v) {
      std::size_t n = 0;
      for (bool b : v) n += b ? 1 : 0;
      return n;
    }
  };

  SparsityMask() = default;

  void add(LayerMask m) { layers_.push_back(std::move(m)); }

  static SparsityMask all_keep(const WeightCollection& w) {
    SparsityMask m;
    for (const auto& l : w) {
      m.add({l.id, std::vector<bool>(l.weights.rows(), true),
             std::vector<bool>(l.weights.cols(), true)});
    }
    return m;
  }

  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  LayerMask& layer(std::size_t i) { return layers_[i]; }
  const LayerMask& layer(std::size_t i) const { return layers_[i]; }

  const LayerMask* find(const std::string& id) const {
    for (const auto& l : layers_) {
      if (l.id == id) return &l;
    }
    return nullptr;
  }

  bool matches(const WeightCollection& w) const {
    if (layers_.size() != w.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].id != w.id(i) ||
          layers_[i].rows() != w.matrix(i).rows() ||
          layers_[i].cols() != w.matrix(i).cols()) {
        return false;
      }
    }
    return true;
  }

  void require_matches(const WeightCollection& w, const char* where) const {
    if (!matches(w)) {
      throw std::invalid_argument(std::string(where) +
                                  ": mask does not match weight layout");
    }
  }

  std::size_t total_params() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.total();
    return n;
  }

  std::size_t remaining_params() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.remaining();
    return n;
  }

  // True if every dropped coordinate of other is also dropped here.
  bool drops_superset_of(const SparsityMask& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& a = layers_[i];
      const auto& b = other.layers_[i];
      for (std::size_t r = 0; r < a.rows(); ++r) {
        if (!b.row_keep[r] && a.row_keep[r]) return false;
      }
      for (std::size_t c = 0; c < a.cols(); ++c) {
        if (!b.col_keep[c] && a.col_keep[c]) return false;
      }
    }
    return true;
  }

  auto begin() { return layers_.begin(); }
  auto end() { return layers_.end(); }
  auto begin() const { return layers_.begin(); }
  auto end() const { return layers_.end(); }

 private:
  std::vector<LayerMask> layers_;
};

}  // namespace prunekit

#endif  // PRUNEKIT_MASK_HPP_
