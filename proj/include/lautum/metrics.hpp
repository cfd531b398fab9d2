#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lautum {

// One per-epoch row of the metrics stream.
struct MetricsRecord {
  std::string stage;  // "pre" | "post"
  int epoch = 0;      // 1-based within the stage
  std::int64_t iteration = 0;  // cumulative iterations within the stage
  double ce_loss = 0.0;
  double lautum_value = 0.0;  // 0 in the post stage (not computed there)
  double target_test_acc = 0.0;
  double source_test_acc = 0.0;
  double wall_time_s = 0.0;  // 0 unless timing = real
};

inline constexpr const char* kMetricsCsvHeader =
    "stage,epoch,iteration,ce_loss,lautum_value,target_test_acc,"
    "source_test_acc,wall_time_s";

// Append-only CSV with the fixed header above; byte-deterministic for equal
// record sequences.
void write_metrics_csv(const std::string& path,
                       const std::vector<MetricsRecord>& records);

// Parse failures throw FormatError naming the 1-based row number.
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

}  // namespace lautum
