#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "lautum/dataset.hpp"
#include "lautum/nn.hpp"

namespace lautum {

enum class TrainingMode { kStandardTransfer, kLautum };

std::string to_string(TrainingMode mode);

// Declarative two-stage experiment description. Parsed from flat key=value
// text with one section per stage; every field has a documented default so a
// minimal file is valid.
struct ExperimentConfig {
  // top-level
  TrainingMode mode = TrainingMode::kLautum;
  double lambda = 1e-4;  // ignored (forced 0) in standard_transfer mode
  double alpha = 0.999;
  double jitter = 1e-4;
  Eigen::Index batch_size = 50;
  std::uint64_t seed = 0;
  std::string output_dir;  // empty -> $LAUTUM_OUTPUT_DIR or "."
  std::string run_name = "metrics";
  bool record_wall_time = false;  // "timing = real" voids byte-reproducibility

  // [data]
  std::string data_kind = "synthetic";  // "synthetic" | "idx"
  SyntheticShiftSpec synthetic;
  std::string source_train_images, source_train_labels;
  std::string source_test_images, source_test_labels;
  std::string target_train_images, target_train_labels;
  std::string target_test_images, target_test_labels;

  // [split]
  Eigen::Index labeled_count = 20;
  bool split_seed_set = false;
  std::uint64_t split_seed = 0;  // derived from `seed` unless set explicitly

  // [network]
  std::string arch = "mlp";  // "mlp" | "conv"
  std::vector<Eigen::Index> hidden_dims = {128, 128};

  // [pretrain]
  int epochs_pre = 30;
  nn::AdamParams adam_pre;

  // [finetune]
  int epochs_post = 20;
  nn::AdamParams adam_post;

  void validate() const;
  std::uint64_t effective_split_seed() const;
  std::string effective_output_dir() const;

  // Full key=value echo of the effective configuration, one key per line,
  // in file order. Used by the summary file and plot legends.
  std::string echo() const;
};

struct ParsedConfig {
  ExperimentConfig config;
  std::vector<std::string> warnings;
};

// Parses and validates a config file. Unknown keys or sections, type errors
// and range violations throw ConfigError. Returns contract warnings (e.g.
// lambda forced to 0 in standard_transfer mode) alongside the config.
ParsedConfig parse_config(const std::string& path);

// Same, from in-memory text (used by tests).
ParsedConfig parse_config_text(const std::string& text);

}  // namespace lautum
