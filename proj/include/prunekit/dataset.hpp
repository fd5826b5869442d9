#ifndef PRUNEKIT_DATASET_HPP_
#define PRUNEKIT_DATASET_HPP_

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "prunekit/errors.hpp"
#include "prunekit/matrix.hpp"
#include "prunekit/rng.hpp"

namespace prunekit {

// Spatial shape of one sample. Flat feature vectors use (features, 1, 1).
struct Shape {
  std::size_t channels = 0;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t flat() const { return channels * height * width; }
  bool spatial() const { return height > 1 || width > 1; }
  bool operator==(const Shape&) const = default;
};

enum class Split { Train, Test };

// In-memory dataset: one sample per row of `inputs`, class index labels.
struct Dataset {
  Matrix inputs;  // n x shape.flat(), row-major samples
  std::vector<int> labels;
  Shape input_shape;
  int num_classes = 0;
  Split split = Split::Train;

  std::size_t size() const { return labels.size(); }

  void validate() const {
    if (inputs.rows() != labels.size()) {
      throw std::invalid_argument("Dataset: inputs/labels length mismatch");
    }
    if (inputs.cols() != input_shape.flat()) {
      throw std::invalid_argument("Dataset: input width != shape");
    }
    for (int y : labels) {
      if (y < 0 || y >= num_classes) {
        throw std::invalid_argument("Dataset: label out of range");
      }
    }
  }
};

// Train/test pair plus generator bookkeeping (which input coordinates
// actually drive the labels, when the generator knows).
struct LoadedData {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> informative;  // empty when not applicable
};

struct PlantedSpec {
  std::size_t features = 64;
  std::size_t informative = 8;
  int classes = 2;
  std::size_t train_samples = 512;
  std::size_t test_samples = 256;
  double margin = 0.1;       // minimum logit gap; resample below it
  double label_noise = 0.0;  // fraction of labels flipped uniformly
};

// Classification where the label depends only on a planted subset of
// coordinates: logits = T x[planted], label = argmax. The remaining
// coordinates are pure N(0,1) noise, so their first-layer columns carry
// no signal and a structured pruner should remove them.
inline LoadedData make_planted_dataset(const PlantedSpec& spec,
                                       std::uint64_t seed) {
  if (spec.informative == 0 || spec.informative > spec.features ||
      spec.classes < 2) {
    throw std::invalid_argument("planted dataset: bad spec");
  }
  Rng rng(mix_seed(seed, 101));

  std::vector<std::size_t> coords(spec.features);
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  rng.shuffle(coords);
  std::vector<std::size_t> planted(coords.begin(),
                                   coords.begin() + spec.informative);
  std::sort(planted.begin(), planted.end());

  Matrix teacher(static_cast<std::size_t>(spec.classes), spec.informative);
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    teacher.data()[i] = rng.normal();
  }

  const auto sample_split = [&](std::size_t n, Split split) {
    Dataset d;
    d.inputs = Matrix(n, spec.features);
    d.labels.resize(n);
    d.input_shape = {spec.features, 1, 1};
    d.num_classes = spec.classes;
    d.split = split;
    std::vector<double> x(spec.features);
    std::vector<double> z(static_cast<std::size_t>(spec.classes));
    for (std::size_t s = 0; s < n; ++s) {
      int label = 0;
      while (true) {
        for (auto& v : x) v = rng.normal();
        for (int k = 0; k < spec.classes; ++k) {
          double acc = 0.0;
          for (std::size_t j = 0; j < spec.informative; ++j) {
            acc += teacher(static_cast<std::size_t>(k), j) * x[planted[j]];
          }
          z[static_cast<std::size_t>(k)] = acc;
        }
        std::size_t best = 0;
        for (std::size_t k = 1; k < z.size(); ++k) {
          if (z[k] > z[best]) best = k;
        }
        double second = -1e300;
        for (std::size_t k = 0; k < z.size(); ++k) {
          if (k != best) second = std::max(second, z[k]);
        }
        if (z[best] - second >= spec.margin) {
          label = static_cast<int>(best);
          break;
        }
      }
      if (spec.label_noise > 0.0 && rng.uniform01() < spec.label_noise) {
        label = static_cast<int>(rng.bounded(
            static_cast<std::uint64_t>(spec.classes)));
      }
      for (std::size_t c = 0; c < spec.features; ++c) {
        d.inputs(s, c) = x[c];
      }
      d.labels[s] = label;
    }
    return d;
  };

  LoadedData out;
  out.train = sample_split(spec.train_samples, Split::Train);
  out.test = sample_split(spec.test_samples, Split::Test);
  out.informative = planted;
  return out;
}

struct MoonsSpec {
  std::size_t train_samples = 400;
  std::size_t test_samples = 200;
  double noise = 0.1;
};

// Two interleaved half-circles in the plane, the usual nonlinear
// two-class toy problem.
inline LoadedData make_moons_dataset(const MoonsSpec& spec,
                                     std::uint64_t seed) {
  Rng rng(mix_seed(seed, 102));
  const double pi = 3.14159265358979323846;
  const auto sample_split = [&](std::size_t n, Split split) {
    Dataset d;
    d.inputs = Matrix(n, 2);
    d.labels.resize(n);
    d.input_shape = {2, 1, 1};
    d.num_classes = 2;
    d.split = split;
    for (std::size_t s = 0; s < n; ++s) {
      const int label = static_cast<int>(rng.bounded(2));
      const double t = rng.uniform01() * pi;
      double x, y;
      if (label == 0) {
        x = std::cos(t);
        y = std::sin(t);
      } else {
        x = 1.0 - std::cos(t);
        y = 0.5 - std::sin(t);
      }
      d.inputs(s, 0) = x + spec.noise * rng.normal();
      d.inputs(s, 1) = y + spec.noise * rng.normal();
      d.labels[s] = label;
    }
    return d;
  };
  LoadedData out;
  out.train = sample_split(spec.train_samples, Split::Train);
  out.test = sample_split(spec.test_samples, Split::Test);
  return out;
}

struct TeacherSpec {
  std::size_t features = 16;
  std::size_t hidden = 8;
  int classes = 2;
  std::size_t train_samples = 512;
  std::size_t test_samples = 256;
};

// Labels from a fixed random one-hidden-layer tanh teacher network.
inline LoadedData make_teacher_dataset(const TeacherSpec& spec,
                                       std::uint64_t seed) {
  if (spec.classes < 2 || spec.features == 0 || spec.hidden == 0) {
    throw std::invalid_argument("teacher dataset: bad spec");
  }
  Rng rng(mix_seed(seed, 103));
  Matrix w1(spec.hidden, spec.features);
  Matrix w2(static_cast<std::size_t>(spec.classes), spec.hidden);
  for (std::size_t i = 0; i < w1.size(); ++i) w1.data()[i] = rng.normal();
  for (std::size_t i = 0; i < w2.size(); ++i) w2.data()[i] = rng.normal();

  const auto sample_split = [&](std::size_t n, Split split) {
    Dataset d;
    d.inputs = Matrix(n, spec.features);
    d.labels.resize(n);
    d.input_shape = {spec.features, 1, 1};
    d.num_classes = spec.classes;
    d.split = split;
    std::vector<double> h(spec.hidden);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t c = 0; c < spec.features; ++c) {
        d.inputs(s, c) = rng.normal();
      }
      for (std::size_t j = 0; j < spec.hidden; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < spec.features; ++c) {
          acc += w1(j, c) * d.inputs(s, c);
        }
        h[j] = std::tanh(acc);
      }
      std::size_t best = 0;
      double bestz = -1e300;
      for (int k = 0; k < spec.classes; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < spec.hidden; ++j) {
          acc += w2(static_cast<std::size_t>(k), j) * h[j];
        }
        if (acc > bestz) {
          bestz = acc;
          best = static_cast<std::size_t>(k);
        }
      }
      d.labels[s] = static_cast<int>(best);
    }
    return d;
  };
  LoadedData out;
  out.train = sample_split(spec.train_samples, Split::Train);
  out.test = sample_split(spec.test_samples, Split::Test);
  return out;
}

// ---------------------------------------------------------------------------
// Binary tensor files.
//
// Layout (little-endian):
//   magic   "PKT1"          4 bytes
//   dtype   u8              1 = float32, 2 = float64, 3 = int32
//   rank    u8
//   pad     u16             zero
//   dims    rank x u64
//   payload row-major values
// ---------------------------------------------------------------------------

enum class TensorDType : std::uint8_t {
  Float32 = 1,
  Float64 = 2,
  Int32 = 3,
};

namespace detail {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!os) throw io_error("tensor write failed");
}

inline void read_bytes(std::istream& is, void* p, std::size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    throw io_error("tensor read truncated");
  }
}

template <typename T>
void write_le(std::ostream& os, T v) {
  // Host is little-endian on every supported target.
  write_bytes(os, &v, sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  T v;
  read_bytes(is, &v, sizeof(T));
  return v;
}

}  // namespace detail

inline void write_tensor_file(const std::string& path, TensorDType dtype,
                              const std::vector<std::uint64_t>& dims,
                              const void* payload, std::size_t payload_bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw io_error("cannot open '" + path + "' for writing");
  detail::write_bytes(os, "PKT1", 4);
  detail::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(dtype));
  detail::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(dims.size()));
  detail::write_le<std::uint16_t>(os, 0);
  for (auto d : dims) detail::write_le<std::uint64_t>(os, d);
  detail::write_bytes(os, payload, payload_bytes);
}

struct TensorFile {
  TensorDType dtype;
  std::vector<std::uint64_t> dims;
  std::vector<double> as_double;  // numeric payload widened to double
  std::vector<std::int32_t> as_int32;

  std::uint64_t element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

inline TensorFile read_tensor_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open '" + path + "'");
  char magic[4];
  detail::read_bytes(is, magic, 4);
  if (std::memcmp(magic, "PKT1", 4) != 0) {
    throw io_error("'" + path + "': not a tensor file (bad magic)");
  }
  TensorFile t;
  const auto dtype = detail::read_le<std::uint8_t>(is);
  const auto rank = detail::read_le<std::uint8_t>(is);
  const auto pad = detail::read_le<std::uint16_t>(is);
  if (pad != 0) throw io_error("'" + path + "': malformed header");
  if (dtype < 1 || dtype > 3) {
    throw io_error("'" + path + "': unknown dtype " + std::to_string(dtype));
  }
  t.dtype = static_cast<TensorDType>(dtype);
  t.dims.resize(rank);
  for (auto& d : t.dims) d = detail::read_le<std::uint64_t>(is);
  const std::uint64_t n = t.element_count();
  switch (t.dtype) {
    case TensorDType::Float32: {
      std::vector<float> buf(n);
      detail::read_bytes(is, buf.data(), n * sizeof(float));
      t.as_double.assign(buf.begin(), buf.end());
      break;
    }
    case TensorDType::Float64:
      t.as_double.resize(n);
      detail::read_bytes(is, t.as_double.data(), n * sizeof(double));
      break;
    case TensorDType::Int32:
      t.as_int32.resize(n);
      detail::read_bytes(is, t.as_int32.data(), n * sizeof(std::int32_t));
      break;
  }
  return t;
}

// Reads one split from an inputs tensor (n x features, float) and a labels
// tensor (n, int32).
inline Dataset read_dataset_split(const std::string& inputs_path,
                                  const std::string& labels_path, Split split,
                                  int num_classes, Shape shape = {}) {
  TensorFile xin = read_tensor_file(inputs_path);
  TensorFile yin = read_tensor_file(labels_path);
  if (xin.dtype == TensorDType::Int32) {
    throw io_error("'" + inputs_path + "': inputs must be float tensors");
  }
  if (yin.dtype != TensorDType::Int32) {
    throw io_error("'" + labels_path + "': labels must be int32 tensors");
  }
  if (xin.dims.size() != 2 || yin.dims.size() != 1) {
    throw io_error("dataset tensors must be rank-2 inputs and rank-1 labels");
  }
  if (xin.dims[0] != yin.dims[0]) {
    throw io_error("dataset inputs/labels sample counts differ");
  }
  Dataset d;
  d.inputs = Matrix(xin.dims[0], xin.dims[1], std::move(xin.as_double));
  d.labels.assign(yin.as_int32.begin(), yin.as_int32.end());
  d.input_shape =
      (shape.flat() != 0) ? shape : Shape{xin.dims[1], 1, 1};
  d.num_classes = num_classes;
  d.split = split;
  d.validate();
  return d;
}

inline void write_dataset_split(const Dataset& d,
                                const std::string& inputs_path,
                                const std::string& labels_path) {
  write_tensor_file(inputs_path, TensorDType::Float64,
                    {d.inputs.rows(), d.inputs.cols()}, d.inputs.data(),
                    d.inputs.size() * sizeof(double));
  std::vector<std::int32_t> labels(d.labels.begin(), d.labels.end());
  write_tensor_file(labels_path, TensorDType::Int32, {labels.size()},
                    labels.data(), labels.size() * sizeof(std::int32_t));
}

}  // namespace prunekit

#endif  // PRUNEKIT_DATASET_HPP_
