#ifndef PRUNEKIT_MATRIX_HPP_
#define PRUNEKIT_MATRIX_HPP_

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace prunekit {

// Dense row-major matrix of 64-bit reals. All optimization math runs in
// double; checkpoints narrow to float32 at the I/O boundary only.
// Empty matrices (0 rows or 0 cols) are legal; reductions over them
// return empty/zero results.
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw std::invalid_argument("Matrix: data length != rows * cols");
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }

  void fill(double v) {
    for (auto& x : data_) x = v;
  }

  bool same_shape(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  bool all_finite() const {
    for (double x : data_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t c = 0; c < cols_; ++c) {
        t(c, r) = (*this)(r, c);
      }
    }
    return t;
  }

  // this += s * other
  void add_scaled(const Matrix& other, double s) {
    require_same_shape(other, "Matrix::add_scaled");
    for (std::size_t i = 0; i < data_.size(); ++i) {
      data_[i] += s * other.data_[i];
    }
  }

  void scale(double s) {
    for (auto& x : data_) x *= s;
  }

  double frobenius_norm() const {
    double acc = 0.0;
    for (double x : data_) acc += x * x;
    return std::sqrt(acc);
  }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

  void require_same_shape(const Matrix& o, const char* where) const {
    if (!same_shape(o)) {
      throw std::invalid_argument(std::string(where) + ": shape mismatch (" +
                                  std::to_string(rows_) + "x" +
                                  std::to_string(cols_) + " vs " +
                                  std::to_string(o.rows_) + "x" +
                                  std::to_string(o.cols_) + ")");
    }
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

//! Euclidean norm of each row; entry p is ||m[p,:]||_2.
inline std::vector<double> row_l2_norms(const Matrix& m) {
  std::vector<double> out(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    const double* row = m.row_ptr(r);
    for (std::size_t c = 0; c < m.cols(); ++c) acc += row[c] * row[c];
    out[r] = std::sqrt(acc);
  }
  return out;
}

//! Euclidean norm of each column; entry q is ||m[:,q]||_2.
inline std::vector<double> col_l2_norms(const Matrix& m) {
  std::vector<double> acc(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* row = m.row_ptr(r);
    for (std::size_t c = 0; c < m.cols(); ++c) acc[c] += row[c] * row[c];
  }
  for (auto& v : acc) v = std::sqrt(v);
  return acc;
}

//! Frobenius norm of (a - b). Throws std::invalid_argument on shape mismatch.
inline double frobenius_distance(const Matrix& a, const Matrix& b) {
  a.require_same_shape(b, "frobenius_distance");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// Ordered collection of named per-layer weight matrices. Layer ids are
// unique and the order is fixed for the lifetime of a run; shapes stay
// immutable across pruning iterations (pruning is masking until export).
class WeightCollection {
 public:
  struct Layer {
    std::string id;
    Matrix weights;
  };

  WeightCollection() = default;

  void add(std::string id, Matrix m) {
    if (find(id) != nullptr) {
      throw std::invalid_argument("WeightCollection: duplicate layer id '" +
                                  id + "'");
    }
    layers_.push_back({std::move(id), std::move(m)});
  }

  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }

  Layer& layer(std::size_t i) { return layers_[i]; }
  const Layer& layer(std::size_t i) const { return layers_[i]; }

  Matrix& matrix(std::size_t i) { return layers_[i].weights; }
  const Matrix& matrix(std::size_t i) const { return layers_[i].weights; }

  const std::string& id(std::size_t i) const { return layers_[i].id; }

  const Matrix* find(const std::string& id) const {
    for (const auto& l : layers_) {
      if (l.id == id) return &l.weights;
    }
    return nullptr;
  }

  bool same_layout(const WeightCollection& o) const {
    if (layers_.size() != o.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].id != o.layers_[i].id ||
          !layers_[i].weights.same_shape(o.layers_[i].weights)) {
        return false;
      }
    }
    return true;
  }

  void require_same_layout(const WeightCollection& o, const char* where) const {
    if (!same_layout(o)) {
      throw std::invalid_argument(std::string(where) +
                                  ": weight collections differ in layout");
    }
  }

  // Same ids and shapes, all entries zero.
  WeightCollection zeros_like() const {
    WeightCollection z;
    for (const auto& l : layers_) {
      z.add(l.id, Matrix(l.weights.rows(), l.weights.cols()));
    }
    return z;
  }

  // this += s * other, layerwise.
  void add_scaled(const WeightCollection& other, double s) {
    require_same_layout(other, "WeightCollection::add_scaled");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i].weights.add_scaled(other.layers_[i].weights, s);
    }
  }

  double frobenius_norm() const {
    double acc = 0.0;
    for (const auto& l : layers_) {
      const double n = l.weights.frobenius_norm();
      acc += n * n;
    }
    return std::sqrt(acc);
  }

  std::size_t total_params() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size();
    return n;
  }

  auto begin() { return layers_.begin(); }
  auto end() { return layers_.end(); }
  auto begin() const { return layers_.begin(); }
  auto end() const { return layers_.end(); }

 private:
  std::vector<Layer> layers_;
};

//! Sum over layers of (sum of row norms + sum of column norms),
//! unscaled; the caller applies the regularization weight.
inline double group_penalty(const WeightCollection& w) {
  double acc = 0.0;
  for (const auto& l : w) {
    for (double n : row_l2_norms(l.weights)) acc += n;
    for (double n : col_l2_norms(l.weights)) acc += n;
  }
  return acc;
}

//! Frobenius distance between two layout-identical collections.
inline double frobenius_distance(const WeightCollection& a,
                                 const WeightCollection& b) {
  a.require_same_layout(b, "frobenius_distance");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = frobenius_distance(a.matrix(i), b.matrix(i));
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace prunekit

#endif  // PRUNEKIT_MATRIX_HPP_
