#ifndef PRUNEKIT_MODEL_HPP_
#define PRUNEKIT_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "prunekit/dataset.hpp"
#include "prunekit/errors.hpp"
#include "prunekit/mask.hpp"
#include "prunekit/matrix.hpp"
#include "prunekit/rng.hpp"
#include "prunekit/trainable.hpp"

namespace prunekit {

enum class LayerKind { Dense, Conv2d, Relu, Flatten, SoftmaxXentLoss };

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Relu: return "relu";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::SoftmaxXentLoss: return "softmax-xent";
  }
  return "?";
}

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  // dense
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  // conv2d
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;

  static LayerSpec dense(std::size_t in, std::size_t out) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.in_features = in;
    s.out_features = out;
    return s;
  }
  static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch,
                          std::size_t kh, std::size_t kw,
                          std::size_t stride = 1, std::size_t padding = 0) {
    LayerSpec s;
    s.kind = LayerKind::Conv2d;
    s.in_channels = in_ch;
    s.out_channels = out_ch;
    s.kernel_h = kh;
    s.kernel_w = kw;
    s.stride = stride;
    s.padding = padding;
    return s;
  }
  static LayerSpec relu() { return LayerSpec{LayerKind::Relu}; }
  static LayerSpec flatten() { return LayerSpec{LayerKind::Flatten}; }
  static LayerSpec softmax_xent() {
    return LayerSpec{LayerKind::SoftmaxXentLoss};
  }

  bool prunable() const {
    return kind == LayerKind::Dense || kind == LayerKind::Conv2d;
  }
};

namespace detail {

inline std::size_t conv_out_dim(std::size_t in, std::size_t kernel,
                                std::size_t stride, std::size_t padding,
                                const char* what) {
  const std::size_t padded = in + 2 * padding;
  if (padded < kernel || stride == 0) {
    throw std::invalid_argument(std::string("conv2d: ") + what +
                                " smaller than kernel");
  }
  return (padded - kernel) / stride + 1;
}

// Patch matrix for one sample: rows index output positions (oy*OW + ox),
// columns index (ic, ky, kx) flattened as ic*kh*kw + ky*kw + kx, matching
// the weight matrix's column layout. Out-of-bounds taps read zero.
inline void im2col(const double* in, const Shape& shape,
                   const LayerSpec& conv, std::size_t out_h,
                   std::size_t out_w, Matrix& patches) {
  const std::size_t kh = conv.kernel_h, kw = conv.kernel_w;
  const std::size_t stride = conv.stride, pad = conv.padding;
  const std::size_t ih = shape.height, iw = shape.width;
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      double* row = patches.row_ptr(oy * out_w + ox);
      for (std::size_t ic = 0; ic < shape.channels; ++ic) {
        const double* plane = in + ic * ih * iw;
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const std::ptrdiff_t y =
              static_cast<std::ptrdiff_t>(oy * stride + ky) -
              static_cast<std::ptrdiff_t>(pad);
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const std::ptrdiff_t x =
                static_cast<std::ptrdiff_t>(ox * stride + kx) -
                static_cast<std::ptrdiff_t>(pad);
            double v = 0.0;
            if (y >= 0 && y < static_cast<std::ptrdiff_t>(ih) && x >= 0 &&
                x < static_cast<std::ptrdiff_t>(iw)) {
              v = plane[static_cast<std::size_t>(y) * iw +
                        static_cast<std::size_t>(x)];
            }
            row[ic * kh * kw + ky * kw + kx] = v;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds patch-space gradients back onto the
// input image.
inline void col2im_add(const Matrix& dpatches, const Shape& shape,
                       const LayerSpec& conv, std::size_t out_h,
                       std::size_t out_w, double* din) {
  const std::size_t kh = conv.kernel_h, kw = conv.kernel_w;
  const std::size_t stride = conv.stride, pad = conv.padding;
  const std::size_t ih = shape.height, iw = shape.width;
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const double* row = dpatches.row_ptr(oy * out_w + ox);
      for (std::size_t ic = 0; ic < shape.channels; ++ic) {
        double* plane = din + ic * ih * iw;
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const std::ptrdiff_t y =
              static_cast<std::ptrdiff_t>(oy * stride + ky) -
              static_cast<std::ptrdiff_t>(pad);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(ih)) continue;
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const std::ptrdiff_t x =
                static_cast<std::ptrdiff_t>(ox * stride + kx) -
                static_cast<std::ptrdiff_t>(pad);
            if (x < 0 || x >= static_cast<std::ptrdiff_t>(iw)) continue;
            plane[static_cast<std::size_t>(y) * iw +
                  static_cast<std::size_t>(x)] +=
                row[ic * kh * kw + ky * kw + kx];
          }
        }
      }
    }
  }
}

}  // namespace detail

struct ForwardResult {
  double loss = 0.0;
  Matrix logits;  // batch x classes
};

// Feedforward classifier whose prunable parameters are GEMM-view weight
// matrices: dense layers store out-features x in-features, conv layers
// store out-channels x (in-channels * kh * kw) so that rows are filters
// and columns are filter-shape positions. Biases are per output
// row/channel and are never penalized or proximally shrunk.
class Model {
 public:
  Model() = default;

  Model(std::vector<LayerSpec> specs, Shape input_shape)
      : specs_(std::move(specs)), input_shape_(input_shape) {
    validate_and_build();
  }

  const std::vector<LayerSpec>& specs() const { return specs_; }
  Shape input_shape() const { return input_shape_; }
  int num_classes() const { return num_classes_; }

  // Spec and incoming activation shape of each prunable layer, in
  // weight-collection order (diagnostics need the conv/dense geometry).
  struct PrunableInfo {
    LayerSpec spec;
    Shape in_shape;
  };
  const std::vector<PrunableInfo>& prunable_info() const {
    return prunable_info_;
  }

  const WeightCollection& prunable_weights() const { return weights_; }
  WeightCollection& prunable_weights() { return weights_; }
  const std::vector<std::vector<double>>& bias_params() const {
    return biases_;
  }
  std::vector<std::vector<double>>& bias_params() { return biases_; }

  const SparsityMask* mask() const {
    return mask_.has_value() ? &*mask_ : nullptr;
  }
  void set_mask(SparsityMask m) {
    m.require_matches(weights_, "Model::set_mask");
    mask_ = std::move(m);
  }
  void clear_mask() { mask_.reset(); }

  // Scaled uniform fan-in init, U(-a, a) with a = sqrt(6 / fan_in);
  // fan_in equals the GEMM column count for both layer kinds. Biases
  // start at zero.
  void init_weights(Rng& rng) {
    for (auto& l : weights_) {
      const double bound =
          l.weights.cols() > 0
              ? std::sqrt(6.0 / static_cast<double>(l.weights.cols()))
              : 0.0;
      for (std::size_t i = 0; i < l.weights.size(); ++i) {
        l.weights.data()[i] = rng.uniform(-bound, bound);
      }
    }
    for (auto& b : biases_) {
      std::fill(b.begin(), b.end(), 0.0);
    }
  }

  //! Mean softmax cross-entropy over the batch, plus the logits.
  ForwardResult forward(const Dataset& data,
                        std::span<const std::size_t> idx) const {
    Trace trace;
    return run_forward(data, idx, trace);
  }

  //! Analytic gradients of the mean batch loss for every weight matrix
  //! and bias vector.
  EvalResult evaluate(const Dataset& data,
                      std::span<const std::size_t> idx) const {
    Trace trace;
    ForwardResult fwd = run_forward(data, idx, trace);
    EvalResult out;
    out.loss = fwd.loss;
    out.logits = std::move(fwd.logits);
    out.grads = run_backward(data, idx, trace, out.logits);
    return out;
  }

  double loss_value(const Dataset& data,
                    std::span<const std::size_t> idx) const {
    Trace trace;
    return run_forward(data, idx, trace).loss;
  }

 private:
  // Activations after each spec, kept for the backward pass.
  struct Trace {
    std::vector<Matrix> acts;   // acts[0] is the input batch
    std::vector<Shape> shapes;  // shapes[0] is the input shape
  };

  void validate_and_build() {
    if (specs_.empty()) {
      throw std::invalid_argument("Model: no layers");
    }
    Shape shape = input_shape_;
    if (shape.flat() == 0) {
      throw std::invalid_argument("Model: empty input shape");
    }
    std::size_t prunable_ordinal = 0;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      const LayerSpec& s = specs_[i];
      const bool last = (i + 1 == specs_.size());
      switch (s.kind) {
        case LayerKind::Dense: {
          if (shape.spatial()) {
            throw std::invalid_argument(
                "Model: dense layer needs flattened input (add flatten)");
          }
          if (s.in_features != shape.channels || s.out_features == 0) {
            throw std::invalid_argument(
                "Model: dense layer shape does not compose at layer " +
                std::to_string(i));
          }
          ++prunable_ordinal;
          prunable_info_.push_back({s, shape});
          weights_.add("fc" + std::to_string(prunable_ordinal),
                       Matrix(s.out_features, s.in_features));
          biases_.emplace_back(s.out_features, 0.0);
          shape = {s.out_features, 1, 1};
          break;
        }
        case LayerKind::Conv2d: {
          if (s.in_channels != shape.channels) {
            throw std::invalid_argument(
                "Model: conv2d channels do not compose at layer " +
                std::to_string(i));
          }
          const std::size_t oh = detail::conv_out_dim(
              shape.height, s.kernel_h, s.stride, s.padding, "height");
          const std::size_t ow = detail::conv_out_dim(
              shape.width, s.kernel_w, s.stride, s.padding, "width");
          ++prunable_ordinal;
          prunable_info_.push_back({s, shape});
          weights_.add("conv" + std::to_string(prunable_ordinal),
                       Matrix(s.out_channels,
                              s.in_channels * s.kernel_h * s.kernel_w));
          biases_.emplace_back(s.out_channels, 0.0);
          shape = {s.out_channels, oh, ow};
          break;
        }
        case LayerKind::Relu:
          break;
        case LayerKind::Flatten:
          shape = {shape.flat(), 1, 1};
          break;
        case LayerKind::SoftmaxXentLoss: {
          if (!last) {
            throw std::invalid_argument(
                "Model: softmax-xent must be the final layer");
          }
          if (shape.spatial() || shape.channels < 2) {
            throw std::invalid_argument(
                "Model: softmax-xent needs a flat input of >= 2 classes");
          }
          num_classes_ = static_cast<int>(shape.channels);
          break;
        }
      }
    }
    if (specs_.back().kind != LayerKind::SoftmaxXentLoss) {
      throw std::invalid_argument("Model: last layer must be softmax-xent");
    }
  }

  Matrix gather_batch(const Dataset& data,
                      std::span<const std::size_t> idx) const {
    if (idx.empty()) {
      throw std::invalid_argument("Model: empty batch");
    }
    if (!(data.input_shape == input_shape_)) {
      throw std::invalid_argument("Model: dataset shape mismatch");
    }
    Matrix batch(idx.size(), data.inputs.cols());
    for (std::size_t b = 0; b < idx.size(); ++b) {
      if (idx[b] >= data.size()) {
        throw std::invalid_argument("Model: batch index out of range");
      }
      const double* src = data.inputs.row_ptr(idx[b]);
      std::copy(src, src + data.inputs.cols(), batch.row_ptr(b));
    }
    return batch;
  }

  ForwardResult run_forward(const Dataset& data,
                            std::span<const std::size_t> idx,
                            Trace& trace) const {
    trace.acts.clear();
    trace.shapes.clear();
    trace.acts.push_back(gather_batch(data, idx));
    trace.shapes.push_back(input_shape_);

    std::size_t prunable = 0;
    for (const LayerSpec& s : specs_) {
      const Matrix& in = trace.acts.back();
      const Shape shape = trace.shapes.back();
      switch (s.kind) {
        case LayerKind::Dense: {
          const Matrix& w = weights_.matrix(prunable);
          const auto& b = biases_[prunable];
          Matrix out(in.rows(), s.out_features);
          for (std::size_t r = 0; r < in.rows(); ++r) {
            const double* x = in.row_ptr(r);
            double* y = out.row_ptr(r);
            for (std::size_t o = 0; o < s.out_features; ++o) {
              const double* wrow = w.row_ptr(o);
              double acc = b[o];
              for (std::size_t c = 0; c < s.in_features; ++c) {
                acc += wrow[c] * x[c];
              }
              y[o] = acc;
            }
          }
          trace.acts.push_back(std::move(out));
          trace.shapes.push_back({s.out_features, 1, 1});
          ++prunable;
          break;
        }
        case LayerKind::Conv2d: {
          const Matrix& w = weights_.matrix(prunable);
          const auto& b = biases_[prunable];
          const std::size_t oh = detail::conv_out_dim(
              shape.height, s.kernel_h, s.stride, s.padding, "height");
          const std::size_t ow = detail::conv_out_dim(
              shape.width, s.kernel_w, s.stride, s.padding, "width");
          const std::size_t positions = oh * ow;
          const std::size_t patch_w =
              s.in_channels * s.kernel_h * s.kernel_w;
          Matrix out(in.rows(), s.out_channels * positions);
          Matrix patches(positions, patch_w);
          for (std::size_t r = 0; r < in.rows(); ++r) {
            detail::im2col(in.row_ptr(r), shape, s, oh, ow, patches);
            double* y = out.row_ptr(r);
            for (std::size_t oc = 0; oc < s.out_channels; ++oc) {
              const double* wrow = w.row_ptr(oc);
              for (std::size_t p = 0; p < positions; ++p) {
                const double* prow = patches.row_ptr(p);
                double acc = b[oc];
                for (std::size_t c = 0; c < patch_w; ++c) {
                  acc += wrow[c] * prow[c];
                }
                y[oc * positions + p] = acc;
              }
            }
          }
          trace.acts.push_back(std::move(out));
          trace.shapes.push_back({s.out_channels, oh, ow});
          ++prunable;
          break;
        }
        case LayerKind::Relu: {
          Matrix out = in;
          for (std::size_t i = 0; i < out.size(); ++i) {
            if (out.data()[i] < 0.0) out.data()[i] = 0.0;
          }
          trace.acts.push_back(std::move(out));
          trace.shapes.push_back(shape);
          break;
        }
        case LayerKind::Flatten: {
          trace.acts.push_back(in);
          trace.shapes.push_back({shape.flat(), 1, 1});
          break;
        }
        case LayerKind::SoftmaxXentLoss: {
          // handled below; logits are the current activation
          break;
        }
      }
    }

    const Matrix& logits = trace.acts.back();
    const std::size_t batch = logits.rows();
    const std::size_t classes = logits.cols();
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const double* z = logits.row_ptr(b);
      double zmax = z[0];
      for (std::size_t k = 1; k < classes; ++k) zmax = std::max(zmax, z[k]);
      double sum = 0.0;
      for (std::size_t k = 0; k < classes; ++k) {
        sum += std::exp(z[k] - zmax);
      }
      const int label = data.labels[idx[b]];
      total += std::log(sum) + zmax - z[static_cast<std::size_t>(label)];
    }
    ForwardResult out;
    out.loss = total / static_cast<double>(batch);
    out.logits = logits;
    if (!std::isfinite(out.loss)) {
      throw numeric_error("forward: non-finite loss (divergence)");
    }
    return out;
  }

  ParamGrads run_backward(const Dataset& data,
                          std::span<const std::size_t> idx, const Trace& trace,
                          const Matrix& logits) const {
    ParamGrads grads;
    grads.weights = weights_.zeros_like();
    for (const auto& b : biases_) grads.biases.emplace_back(b.size(), 0.0);

    const std::size_t batch = logits.rows();
    const std::size_t classes = logits.cols();

    // d loss / d logits = (softmax - onehot) / batch
    Matrix delta(batch, classes);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* z = logits.row_ptr(b);
      double* dz = delta.row_ptr(b);
      double zmax = z[0];
      for (std::size_t k = 1; k < classes; ++k) zmax = std::max(zmax, z[k]);
      double sum = 0.0;
      for (std::size_t k = 0; k < classes; ++k) {
        dz[k] = std::exp(z[k] - zmax);
        sum += dz[k];
      }
      const auto label = static_cast<std::size_t>(data.labels[idx[b]]);
      for (std::size_t k = 0; k < classes; ++k) {
        dz[k] = dz[k] / sum - (k == label ? 1.0 : 0.0);
        dz[k] /= static_cast<double>(batch);
      }
    }

    std::size_t prunable = weights_.size();
    // Walk specs in reverse; trace.acts[i] is the input to specs_[i].
    for (std::size_t si = specs_.size(); si-- > 0;) {
      const LayerSpec& s = specs_[si];
      const Matrix& in = trace.acts[si];
      const Shape in_shape = trace.shapes[si];
      switch (s.kind) {
        case LayerKind::SoftmaxXentLoss:
          break;  // delta already holds d loss / d logits
        case LayerKind::Flatten:
          break;  // pure reshape, delta unchanged
        case LayerKind::Relu: {
          for (std::size_t i = 0; i < delta.size(); ++i) {
            if (in.data()[i] <= 0.0) delta.data()[i] = 0.0;
          }
          break;
        }
        case LayerKind::Dense: {
          --prunable;
          const Matrix& w = weights_.matrix(prunable);
          Matrix& dw = grads.weights.matrix(prunable);
          auto& db = grads.biases[prunable];
          Matrix next(delta.rows(), s.in_features);
          for (std::size_t r = 0; r < delta.rows(); ++r) {
            const double* dz = delta.row_ptr(r);
            const double* x = in.row_ptr(r);
            double* dx = next.row_ptr(r);
            std::fill(dx, dx + s.in_features, 0.0);
            for (std::size_t o = 0; o < s.out_features; ++o) {
              const double g = dz[o];
              db[o] += g;
              double* dwrow = dw.row_ptr(o);
              const double* wrow = w.row_ptr(o);
              for (std::size_t c = 0; c < s.in_features; ++c) {
                dwrow[c] += g * x[c];
                dx[c] += g * wrow[c];
              }
            }
          }
          delta = std::move(next);
          break;
        }
        case LayerKind::Conv2d: {
          --prunable;
          const Matrix& w = weights_.matrix(prunable);
          Matrix& dw = grads.weights.matrix(prunable);
          auto& db = grads.biases[prunable];
          const std::size_t oh = detail::conv_out_dim(
              in_shape.height, s.kernel_h, s.stride, s.padding, "height");
          const std::size_t ow = detail::conv_out_dim(
              in_shape.width, s.kernel_w, s.stride, s.padding, "width");
          const std::size_t positions = oh * ow;
          const std::size_t patch_w =
              s.in_channels * s.kernel_h * s.kernel_w;
          Matrix next(delta.rows(), in_shape.flat());
          next.fill(0.0);
          Matrix patches(positions, patch_w);
          Matrix dpatches(positions, patch_w);
          for (std::size_t r = 0; r < delta.rows(); ++r) {
            detail::im2col(in.row_ptr(r), in_shape, s, oh, ow, patches);
            const double* dz = delta.row_ptr(r);
            dpatches.fill(0.0);
            for (std::size_t oc = 0; oc < s.out_channels; ++oc) {
              double* dwrow = dw.row_ptr(oc);
              const double* wrow = w.row_ptr(oc);
              for (std::size_t p = 0; p < positions; ++p) {
                const double g = dz[oc * positions + p];
                if (g == 0.0) continue;
                db[oc] += g;
                const double* prow = patches.row_ptr(p);
                double* dprow = dpatches.row_ptr(p);
                for (std::size_t c = 0; c < patch_w; ++c) {
                  dwrow[c] += g * prow[c];
                  dprow[c] += g * wrow[c];
                }
              }
            }
            detail::col2im_add(dpatches, in_shape, s, oh, ow, next.row_ptr(r));
          }
          delta = std::move(next);
          break;
        }
      }
    }
    return grads;
  }

  std::vector<LayerSpec> specs_;
  Shape input_shape_;
  std::vector<PrunableInfo> prunable_info_;
  WeightCollection weights_;
  std::vector<std::vector<double>> biases_;
  std::optional<SparsityMask> mask_;
  int num_classes_ = 0;
};

static_assert(TrainableModel<Model>);

//! Classification accuracy in percent on a whole dataset; NaN for
//! objectives that produce no logits.
template <TrainableModel M>
double evaluate_accuracy(const M& model, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto fwd = model.evaluate(data, idx);
  if (fwd.logits.rows() != idx.size() || fwd.logits.cols() == 0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::size_t hits = 0;
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const double* z = fwd.logits.row_ptr(b);
    std::size_t best = 0;
    for (std::size_t k = 1; k < fwd.logits.cols(); ++k) {
      if (z[k] > z[best]) best = k;
    }
    if (static_cast<int>(best) == data.labels[b]) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(idx.size());
}

}  // namespace prunekit

#endif  // PRUNEKIT_MODEL_HPP_
