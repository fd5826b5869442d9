#ifndef PRUNEKIT_METRICS_HPP_
#define PRUNEKIT_METRICS_HPP_

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "prunekit/errors.hpp"
#include "prunekit/pipeline.hpp"
#include "prunekit/pruner.hpp"

namespace prunekit {

using json = nlohmann::json;

// Append-only line-delimited records: one JSON object per line, flushed
// per record so a crashed run keeps everything written so far.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path)
      : path_(path), out_(path, std::ios::trunc) {
    if (!out_) {
      throw io_error("cannot create metrics file '" + path + "'");
    }
  }

  void write(const json& record) {
    out_ << record.dump() << '\n';
    out_.flush();
    if (!out_) {
      throw io_error("write failed for metrics file '" + path_ + "'");
    }
  }

 private:
  std::string path_;
  std::ofstream out_;
};

inline std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw io_error("cannot open metrics file '" + path + "'");
  }
  std::vector<json> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      records.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw io_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return records;
}

inline void write_json_file(const std::string& path, const json& doc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw io_error("cannot create '" + path + "'");
  }
  out << doc.dump(2) << '\n';
  if (!out) {
    throw io_error("write failed for '" + path + "'");
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw io_error("cannot open '" + path + "'");
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw io_error(path + ": " + e.what());
  }
}

inline json to_json(const IterationMetrics& m) {
  return json{{"t", m.t},
              {"loss", m.train_loss},
              {"consensus_x", m.consensus_x},
              {"consensus_y", m.consensus_y},
              {"penalty", m.penalty},
              {"zero_rows", m.zero_rows},
              {"zero_cols", m.zero_cols}};
}

inline json to_json(const CompressionReport& rep) {
  json layers = json::array();
  for (const auto& l : rep.layers) {
    layers.push_back({{"id", l.id},
                      {"rows", l.rows},
                      {"cols", l.cols},
                      {"kept_rows", l.kept_rows},
                      {"kept_cols", l.kept_cols},
                      {"total", l.total},
                      {"remaining", l.remaining},
                      {"rate", l.rate}});
  }
  json out{{"total_params", rep.total_params},
           {"remaining_params", rep.remaining_params},
           {"rate", rep.rate},
           {"layers", layers}};
  if (std::isfinite(rep.base_accuracy)) {
    out["base_accuracy"] = rep.base_accuracy;
  }
  if (std::isfinite(rep.pruned_accuracy)) {
    out["pruned_accuracy"] = rep.pruned_accuracy;
  }
  if (std::isfinite(rep.retrained_accuracy)) {
    out["retrained_accuracy"] = rep.retrained_accuracy;
  }
  return out;
}

inline CompressionReport compression_report_from_json(const json& doc) {
  CompressionReport rep;
  rep.total_params = doc.at("total_params").get<std::size_t>();
  rep.remaining_params = doc.at("remaining_params").get<std::size_t>();
  rep.rate = doc.at("rate").get<double>();
  rep.base_accuracy = doc.value("base_accuracy", rep.base_accuracy);
  rep.pruned_accuracy = doc.value("pruned_accuracy", rep.pruned_accuracy);
  rep.retrained_accuracy =
      doc.value("retrained_accuracy", rep.retrained_accuracy);
  for (const auto& l : doc.at("layers")) {
    LayerCompression lc;
    lc.id = l.at("id").get<std::string>();
    lc.rows = l.at("rows").get<std::size_t>();
    lc.cols = l.at("cols").get<std::size_t>();
    lc.kept_rows = l.at("kept_rows").get<std::size_t>();
    lc.kept_cols = l.at("kept_cols").get<std::size_t>();
    lc.total = l.at("total").get<std::size_t>();
    lc.remaining = l.at("remaining").get<std::size_t>();
    lc.rate = l.at("rate").get<double>();
    rep.layers.push_back(std::move(lc));
  }
  return rep;
}

}  // namespace prunekit

#endif  // PRUNEKIT_METRICS_HPP_
