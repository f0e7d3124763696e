#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cq/mdp.hpp"  // detail::format_double

namespace cq {

/**
 * Long-format metric log: exactly `run_id,seed,step,metric,value`, LF line
 * endings, shortest-round-trip decimals with a `.` separator regardless of
 * locale.  Rows are append-only and flushed on request, so a killed run
 * leaves a parseable prefix.  Opening truncates: a rerun of the same
 * (config, seed) reproduces the file byte for byte instead of growing it.
 */
class MetricWriter {
 public:
  MetricWriter(const std::string& path, std::string run_id, long seed)
      : out_(path, std::ios::binary | std::ios::trunc),
        run_id_(std::move(run_id)), seed_(seed), path_(path) {
    if (!out_) throw std::runtime_error("cannot open metric file '" + path + "'");
    out_ << "run_id,seed,step,metric,value\n";
  }

  void row(long step, std::string_view metric, double value) {
    out_ << run_id_ << ',' << seed_ << ',' << step << ',' << metric << ','
         << detail::format_double(value) << '\n';
  }

  void flush() { out_.flush(); }

  const std::string& path() const { return path_; }

 private:
  std::ofstream out_;
  std::string run_id_;
  long seed_;
  std::string path_;
};

/** One parsed metric row. */
struct MetricRow {
  std::string run_id;
  long seed = 0;
  long step = 0;
  std::string metric;
  double value = 0.0;
};

/** Reads a MetricWriter file back; throws on a malformed header or row. */
inline std::vector<MetricRow> read_metric_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read metric file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "run_id,seed,step,metric,value")
    throw std::runtime_error("bad metric header in '" + path + "'");
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricRow r;
    std::size_t p0 = line.find(',');
    std::size_t p1 = line.find(',', p0 + 1);
    std::size_t p2 = line.find(',', p1 + 1);
    std::size_t p3 = line.find(',', p2 + 1);
    if (p0 == std::string::npos || p1 == std::string::npos ||
        p2 == std::string::npos || p3 == std::string::npos)
      throw std::runtime_error("bad metric row in '" + path + "': " + line);
    r.run_id = line.substr(0, p0);
    r.seed = std::stol(line.substr(p0 + 1, p1 - p0 - 1));
    r.step = std::stol(line.substr(p1 + 1, p2 - p1 - 1));
    r.metric = line.substr(p2 + 1, p3 - p2 - 1);
    r.value = detail::parse_double(line.substr(p3 + 1));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace cq
