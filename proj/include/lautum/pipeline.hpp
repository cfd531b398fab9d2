#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lautum/config.hpp"
#include "lautum/cov_stream.hpp"
#include "lautum/dataset.hpp"
#include "lautum/lautum_reg.hpp"
#include "lautum/metrics.hpp"
#include "lautum/nn.hpp"

namespace lautum {

struct SplitSpec {
  Eigen::Index labeled_count = 0;
  std::uint64_t seed = 0;
};

struct SplitResult {
  Dataset labeled;    // keeps labels
  Dataset unlabeled;  // labels discarded
  std::vector<Eigen::Index> labeled_indices;    // into the source dataset
  std::vector<Eigen::Index> unlabeled_indices;  // complement, ascending
  bool stratified = true;
  std::string warning;  // nonempty when stratification fell back
};

// Deterministic disjoint split of the target training set. Label-stratified
// (largest-remainder allocation) when labeled_count >= class count; otherwise
// falls back to an unstratified draw with a warning.
SplitResult split_target(const Dataset& train, const SplitSpec& spec);

// Fraction of test samples whose argmax logit matches the label; argmax ties
// break toward the lowest class index.
double evaluate_accuracy(const nn::Network& net, const Dataset& testset);

// Test-visible counters. finetune_stage takes no unlabeled data at all, so
// the unlabeled counter cannot move during the post-transfer stage.
struct StageInstrumentation {
  std::uint64_t unlabeled_batches_drawn = 0;
  std::uint64_t source_batches_drawn = 0;
  std::uint64_t labeled_target_batches_drawn = 0;
};

// Pre-transfer stage: epochs over the labeled source set; each iteration
// draws one source batch and one unlabeled target batch (independent
// shuffles, both of size batch_size, partial batches dropped) and applies
// the regularized loss. The accumulator must be built from the unlabeled
// part's covariance. Emits one "pre" record per epoch.
std::vector<MetricsRecord> pretrain_stage(
    const ExperimentConfig& cfg, nn::Network& net, const Dataset& source_train,
    const Dataset& unlabeled_target, const Dataset& source_test,
    const Dataset& target_test, CovarianceAccumulator& acc,
    StageInstrumentation* instr = nullptr);

// Post-transfer stage: fine-tunes the entire network with plain CE on the
// labeled target subset (partial batches kept so tiny label budgets still
// step). Emits one "post" record per epoch.
std::vector<MetricsRecord> finetune_stage(const ExperimentConfig& cfg,
                                          nn::Network& net,
                                          const Dataset& labeled_target,
                                          const Dataset& source_test,
                                          const Dataset& target_test,
                                          StageInstrumentation* instr = nullptr);

struct ExperimentData {
  Dataset source_train, source_test, target_train, target_test;
};

// Resolves the config's data section (synthetic generation or IDX loading).
ExperimentData load_experiment_data(const ExperimentConfig& cfg);

// Builds the network described by the config for the given data dimensions.
nn::Network build_network(const ExperimentConfig& cfg,
                          const ExperimentData& data);

struct ExperimentSummary {
  double final_post_acc = 0.0;
  double best_post_acc = 0.0;
  double early_mean_acc = 0.0;  // mean over post epochs 1..5 (or fewer)
};

struct ExperimentResult {
  std::vector<MetricsRecord> records;
  ExperimentSummary summary;
};

// Full two-stage run: precompute sigma_x from the unlabeled part, pretrain,
// fine-tune. Deterministic from (config, seed) unless timing = real.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                StageInstrumentation* instr = nullptr);

// Writes <run_name>.csv and <run_name>.summary under the output directory;
// returns the CSV path.
std::string write_experiment_outputs(const ExperimentConfig& cfg,
                                     const ExperimentResult& result);

}  // namespace lautum
