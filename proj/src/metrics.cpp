#include "lautum/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "lautum/errors.hpp"

namespace lautum {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricsRecord>& records) {
  std::ofstream os(path, std::ios::binary);  // binary: stable newlines
  if (!os) throw IoError("cannot open metrics file for writing: " + path);
  os << kMetricsCsvHeader << "\n";
  for (const MetricsRecord& r : records) {
    os << r.stage << ',' << r.epoch << ',' << r.iteration << ','
       << fmt(r.ce_loss) << ',' << fmt(r.lautum_value) << ','
       << fmt(r.target_test_acc) << ',' << fmt(r.source_test_acc) << ','
       << fmt(r.wall_time_s) << "\n";
  }
  if (!os) throw IoError("metrics write failed: " + path);
}

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open metrics file: " + path);
  std::string line;
  if (!std::getline(is, line)) {
    throw FormatError(path + ": row 1: missing header");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsCsvHeader) {
    throw FormatError(path + ": row 1: unexpected header '" + line + "'");
  }
  std::vector<MetricsRecord> records;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 8) {
      throw FormatError(path + ": row " + std::to_string(row) + ": expected 8 "
                        "fields, got " + std::to_string(fields.size()));
    }
    MetricsRecord r;
    r.stage = fields[0];
    if (r.stage != "pre" && r.stage != "post") {
      throw FormatError(path + ": row " + std::to_string(row) +
                        ": stage must be 'pre' or 'post'");
    }
    try {
      r.epoch = std::stoi(fields[1]);
      r.iteration = std::stoll(fields[2]);
      r.ce_loss = std::stod(fields[3]);
      r.lautum_value = std::stod(fields[4]);
      r.target_test_acc = std::stod(fields[5]);
      r.source_test_acc = std::stod(fields[6]);
      r.wall_time_s = std::stod(fields[7]);
    } catch (const std::exception&) {
      throw FormatError(path + ": row " + std::to_string(row) +
                        ": numeric parse failure");
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace lautum
