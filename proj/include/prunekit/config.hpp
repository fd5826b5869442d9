#ifndef PRUNEKIT_CONFIG_HPP_
#define PRUNEKIT_CONFIG_HPP_

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "prunekit/dataset.hpp"
#include "prunekit/errors.hpp"
#include "prunekit/model.hpp"
#include "prunekit/pruner.hpp"

namespace prunekit {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys{
      "model.input",       "model.layers",
      "dataset.kind",      "dataset.features",
      "dataset.informative", "dataset.classes",
      "dataset.train",     "dataset.test",
      "dataset.margin",    "dataset.label_noise",
      "dataset.noise",     "dataset.hidden",
      "dataset.train_inputs", "dataset.train_labels",
      "dataset.test_inputs",  "dataset.test_labels",
      "train.epochs",      "train.batch_size",   "train.lr",
      "prune.lambda",      "prune.rho",          "prune.iterations",
      "prune.primal_epochs", "prune.lr",         "prune.epsilon",
      "prune.retrain_epochs", "prune.batch_size", "prune.reset_adam",
      "direct.epsilon",    "direct.target_rate",
      "seed",
  };
  return keys;
}

}  // namespace detail

// Flat key = value experiment description. '#' starts a comment, keys
// are from a fixed documented set (typos are errors), duplicates are
// errors. The model.*/dataset.* subset is hashed into every artifact so
// mismatched resumes are caught.
class Config {
 public:
  Config() = default;

  static Config from_string(const std::string& text,
                            const std::string& origin = "<string>") {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw io_error(origin + ":" + std::to_string(lineno) +
                       ": expected 'key = value'");
      }
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty() || value.empty()) {
        throw io_error(origin + ":" + std::to_string(lineno) +
                       ": empty key or value");
      }
      if (detail::known_config_keys().count(key) == 0) {
        throw io_error(origin + ":" + std::to_string(lineno) +
                       ": unknown key '" + key + "'");
      }
      if (!cfg.values_.emplace(key, value).second) {
        throw io_error(origin + ":" + std::to_string(lineno) +
                       ": duplicate key '" + key + "'");
      }
    }
    return cfg;
  }

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
      throw io_error("cannot open config file '" + path + "'");
    }
    std::ostringstream body;
    body << in.rdbuf();
    return from_string(body.str(), path);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key,
                         const std::string& def = "") const {
    const auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
  }

  std::string require_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
      throw io_error("config: missing required key '" + key + "'");
    }
    return it->second;
  }

  double get_double(const std::string& key, double def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    return parse_double(key, it->second);
  }

  std::size_t get_size(const std::string& key, std::size_t def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    return static_cast<std::size_t>(parse_u64(key, it->second));
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    return parse_u64(key, it->second);
  }

  int get_int(const std::string& key, int def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    return static_cast<int>(parse_u64(key, it->second));
  }

  bool get_bool(const std::string& key, bool def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw io_error("config: key '" + key + "' is not a boolean (got '" + v +
                   "')");
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

  //! FNV-1a over the sorted model.*/dataset.* entries: the identity of
  //! the experiment's structure, independent of tuning knobs.
  std::uint64_t structural_hash() const {
    std::uint64_t h = 1469598103934665603ULL;  // FNV offset basis
    const auto mix = [&h](const std::string& s) {
      for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;  // FNV prime
      }
    };
    for (const auto& [key, value] : values_) {
      if (key.rfind("model.", 0) == 0 || key.rfind("dataset.", 0) == 0) {
        mix(key);
        mix("=");
        mix(value);
        mix("\n");
      }
    }
    return h;
  }

 private:
  static double parse_double(const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw io_error("config: key '" + key + "' is not a number (got '" + v +
                     "')");
    }
  }

  static std::uint64_t parse_u64(const std::string& key,
                                 const std::string& v) {
    try {
      std::size_t used = 0;
      const unsigned long long x = std::stoull(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return static_cast<std::uint64_t>(x);
    } catch (const std::exception&) {
      throw io_error("config: key '" + key +
                     "' is not a non-negative integer (got '" + v + "')");
    }
  }

  std::map<std::string, std::string> values_;
};

//! "64" -> (64,1,1); "1x8x8" -> (1,8,8).
inline Shape parse_shape(const std::string& text) {
  std::vector<std::size_t> dims;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, 'x')) {
    token = detail::trim(token);
    try {
      std::size_t used = 0;
      dims.push_back(std::stoull(token, &used));
      if (used != token.size() || dims.back() == 0) {
        throw std::invalid_argument(token);
      }
    } catch (const std::exception&) {
      throw io_error("bad shape '" + text + "'");
    }
  }
  if (dims.size() == 1) return {dims[0], 1, 1};
  if (dims.size() == 3) return {dims[0], dims[1], dims[2]};
  throw io_error("bad shape '" + text + "' (want N or CxHxW)");
}

// Layer list syntax, comma separated:
//   dense:OUT | conv:OUT_CH:KHxKW[:sS][:pP] | relu | flatten | softmax-xent
// Input widths are inferred by walking the shape from model.input.
inline std::vector<LayerSpec> parse_layer_specs(const std::string& text,
                                                Shape input) {
  std::vector<LayerSpec> specs;
  Shape shape = input;
  std::istringstream in(text);
  std::string token;
  while (std::getline(in, token, ',')) {
    token = detail::trim(token);
    if (token.empty()) continue;
    std::vector<std::string> parts;
    std::istringstream tin(token);
    std::string part;
    while (std::getline(tin, part, ':')) parts.push_back(detail::trim(part));
    const std::string& head = parts[0];
    if (head == "relu") {
      specs.push_back(LayerSpec::relu());
    } else if (head == "flatten") {
      specs.push_back(LayerSpec::flatten());
      shape = {shape.flat(), 1, 1};
    } else if (head == "softmax-xent") {
      specs.push_back(LayerSpec::softmax_xent());
    } else if (head == "dense") {
      if (parts.size() != 2) {
        throw io_error("bad layer '" + token + "' (want dense:OUT)");
      }
      const Shape in_shape = shape;
      if (in_shape.spatial()) {
        throw io_error("layer '" + token +
                       "': dense needs a flat input; add flatten first");
      }
      std::size_t out = 0;
      try {
        std::size_t used = 0;
        out = std::stoull(parts[1], &used);
        if (used != parts[1].size() || out == 0) {
          throw std::invalid_argument(parts[1]);
        }
      } catch (const std::exception&) {
        throw io_error("bad layer '" + token + "'");
      }
      specs.push_back(LayerSpec::dense(in_shape.channels, out));
      shape = {out, 1, 1};
    } else if (head == "conv") {
      if (parts.size() < 3 || parts.size() > 5) {
        throw io_error("bad layer '" + token +
                       "' (want conv:OC:KHxKW[:sS][:pP])");
      }
      std::size_t oc = 0;
      try {
        std::size_t used = 0;
        oc = std::stoull(parts[1], &used);
        if (used != parts[1].size() || oc == 0) {
          throw std::invalid_argument(parts[1]);
        }
      } catch (const std::exception&) {
        throw io_error("bad layer '" + token + "'");
      }
      std::size_t kh = 0, kw = 0;
      try {
        const auto xpos = parts[2].find('x');
        std::size_t used = 0;
        const std::string hs =
            xpos == std::string::npos ? parts[2] : parts[2].substr(0, xpos);
        kh = std::stoull(hs, &used);
        if (used != hs.size()) throw std::invalid_argument(hs);
        if (xpos == std::string::npos) {
          kw = kh;
        } else {
          const std::string ws = parts[2].substr(xpos + 1);
          kw = std::stoull(ws, &used);
          if (used != ws.size()) throw std::invalid_argument(ws);
        }
        if (kh == 0 || kw == 0) throw std::invalid_argument(parts[2]);
      } catch (const std::exception&) {
        throw io_error("bad kernel size '" + parts[2] + "' in '" + token +
                       "'");
      }
      std::size_t stride = 1, padding = 0;
      for (std::size_t i = 3; i < parts.size(); ++i) {
        if (parts[i].size() < 2 ||
            (parts[i][0] != 's' && parts[i][0] != 'p')) {
          throw io_error("bad layer option '" + parts[i] + "' in '" + token +
                         "'");
        }
        std::size_t v = 0;
        try {
          v = std::stoull(parts[i].substr(1));
        } catch (const std::exception&) {
          throw io_error("bad layer option '" + parts[i] + "'");
        }
        if (parts[i][0] == 's') {
          stride = v;
        } else {
          padding = v;
        }
      }
      specs.push_back(
          LayerSpec::conv2d(shape.channels, oc, kh, kw, stride, padding));
      try {
        const std::size_t oh =
            detail::conv_out_dim(shape.height, kh, stride, padding, "height");
        const std::size_t ow =
            detail::conv_out_dim(shape.width, kw, stride, padding, "width");
        shape = {oc, oh, ow};
      } catch (const std::exception& e) {
        throw io_error("layer '" + token + "': " + e.what());
      }
    } else {
      throw io_error("unknown layer kind '" + head + "'");
    }
  }
  if (specs.empty()) {
    throw io_error("model.layers: no layers given");
  }
  return specs;
}

//! Builds the configured model (uninitialized weights).
inline Model build_model(const Config& cfg) {
  const Shape input = parse_shape(cfg.require_string("model.input"));
  const std::vector<LayerSpec> specs =
      parse_layer_specs(cfg.require_string("model.layers"), input);
  try {
    return Model(specs, input);
  } catch (const std::invalid_argument& e) {
    throw io_error(std::string("model.layers: ") + e.what());
  }
}

//! Pruning hyperparameters with training-section fallbacks.
inline HyperParams hyper_params_from(const Config& cfg, std::uint64_t seed) {
  HyperParams hp;
  hp.lambda = cfg.get_double("prune.lambda", hp.lambda);
  hp.rho = cfg.get_double("prune.rho", hp.rho);
  hp.iterations = cfg.get_size("prune.iterations", hp.iterations);
  hp.primal_epochs = cfg.get_size("prune.primal_epochs", hp.primal_epochs);
  hp.lr = cfg.get_double("prune.lr", cfg.get_double("train.lr", hp.lr));
  hp.zero_epsilon = cfg.get_double("prune.epsilon", hp.zero_epsilon);
  hp.retrain_epochs = cfg.get_size("prune.retrain_epochs", hp.retrain_epochs);
  hp.batch_size = cfg.get_size(
      "prune.batch_size", cfg.get_size("train.batch_size", hp.batch_size));
  hp.reset_adam = cfg.get_bool("prune.reset_adam", hp.reset_adam);
  hp.seed = seed;
  try {
    hp.validate();
  } catch (const std::invalid_argument& e) {
    throw io_error(std::string("config: ") + e.what());
  }
  return hp;
}

//! Deterministic dataset for the configured generator or tensor files.
inline LoadedData load_dataset(const Config& cfg, std::uint64_t seed) {
  // Generators emit flat samples; when the configured model declares a
  // spatial input of the same volume, stamp that geometry on the data so
  // conv models can train on generated features.
  const auto with_model_shape = [&cfg](LoadedData out) {
    if (cfg.has("model.input")) {
      const Shape want = parse_shape(cfg.require_string("model.input"));
      for (Dataset* d : {&out.train, &out.test}) {
        if (want.flat() == d->input_shape.flat()) d->input_shape = want;
      }
    }
    return out;
  };
  const std::string kind = cfg.get_string("dataset.kind", "planted");
  if (kind == "planted") {
    PlantedSpec spec;
    spec.features = cfg.get_size("dataset.features", spec.features);
    spec.informative = cfg.get_size("dataset.informative", spec.informative);
    spec.classes = cfg.get_int("dataset.classes", spec.classes);
    spec.train_samples = cfg.get_size("dataset.train", spec.train_samples);
    spec.test_samples = cfg.get_size("dataset.test", spec.test_samples);
    spec.margin = cfg.get_double("dataset.margin", spec.margin);
    spec.label_noise = cfg.get_double("dataset.label_noise", spec.label_noise);
    try {
      return with_model_shape(make_planted_dataset(spec, seed));
    } catch (const std::invalid_argument& e) {
      throw io_error(std::string("dataset: ") + e.what());
    }
  }
  if (kind == "moons") {
    MoonsSpec spec;
    spec.train_samples = cfg.get_size("dataset.train", spec.train_samples);
    spec.test_samples = cfg.get_size("dataset.test", spec.test_samples);
    spec.noise = cfg.get_double("dataset.noise", spec.noise);
    return with_model_shape(make_moons_dataset(spec, seed));
  }
  if (kind == "teacher") {
    TeacherSpec spec;
    spec.features = cfg.get_size("dataset.features", spec.features);
    spec.hidden = cfg.get_size("dataset.hidden", spec.hidden);
    spec.classes = cfg.get_int("dataset.classes", spec.classes);
    spec.train_samples = cfg.get_size("dataset.train", spec.train_samples);
    spec.test_samples = cfg.get_size("dataset.test", spec.test_samples);
    try {
      return with_model_shape(make_teacher_dataset(spec, seed));
    } catch (const std::invalid_argument& e) {
      throw io_error(std::string("dataset: ") + e.what());
    }
  }
  if (kind == "file") {
    const int classes = cfg.get_int("dataset.classes", 0);
    if (classes < 2) {
      throw io_error("dataset.kind=file requires dataset.classes >= 2");
    }
    Shape shape{};
    if (cfg.has("model.input")) {
      shape = parse_shape(cfg.require_string("model.input"));
    }
    LoadedData out;
    out.train = read_dataset_split(cfg.require_string("dataset.train_inputs"),
                                   cfg.require_string("dataset.train_labels"),
                                   Split::Train, classes, shape);
    out.test = read_dataset_split(cfg.require_string("dataset.test_inputs"),
                                  cfg.require_string("dataset.test_labels"),
                                  Split::Test, classes, shape);
    return out;
  }
  throw io_error("unknown dataset.kind '" + kind + "'");
}

}  // namespace prunekit

#endif  // PRUNEKIT_CONFIG_HPP_
