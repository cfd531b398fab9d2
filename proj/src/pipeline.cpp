#include "lautum/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "lautum/errors.hpp"
#include "lautum/rng.hpp"

namespace lautum {

namespace {

// Epoch-scoped shuffling index stream. With drop_last the tail shorter than
// one batch is skipped and the pool reshuffles on exhaustion, so every batch
// served has exactly batch_size elements.
class BatchSampler {
 public:
  BatchSampler(Eigen::Index n, Eigen::Index batch_size, std::uint64_t seed)
      : batch_size_(batch_size), rng_(seed), perm_(n) {
    std::iota(perm_.begin(), perm_.end(), Eigen::Index{0});
    reshuffle();
  }

  Eigen::Index batches_per_epoch() const {
    return static_cast<Eigen::Index>(perm_.size()) / batch_size_;
  }

  std::vector<Eigen::Index> next_batch() {
    if (cursor_ + batch_size_ > static_cast<Eigen::Index>(perm_.size())) {
      reshuffle();
    }
    std::vector<Eigen::Index> idx(perm_.begin() + cursor_,
                                  perm_.begin() + cursor_ + batch_size_);
    cursor_ += batch_size_;
    return idx;
  }

  void reshuffle() {
    rng_.shuffle(perm_);
    cursor_ = 0;
  }

 private:
  Eigen::Index batch_size_;
  Rng rng_;
  std::vector<Eigen::Index> perm_;
  Eigen::Index cursor_ = 0;
};

Eigen::MatrixXd gather_cols(const Eigen::MatrixXd& m,
                            const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(i) = m.col(idx[i]);
  return out;
}

Eigen::MatrixXd gather_onehot(const Dataset& ds,
                              const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd y =
      Eigen::MatrixXd::Zero(ds.num_classes, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    y(ds.labels[static_cast<std::size_t>(idx[i])], i) = 1.0;
  }
  return y;
}

class WallClock {
 public:
  explicit WallClock(bool enabled) : enabled_(enabled) {
    if (enabled_) start_ = std::chrono::steady_clock::now();
  }
  double elapsed() const {
    if (!enabled_) return 0.0;
    const auto now = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(now - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

SplitResult split_target(const Dataset& train, const SplitSpec& spec) {
  train.validate();
  const Eigen::Index n = train.size();
  if (spec.labeled_count < 1 || spec.labeled_count > n) {
    throw ConfigError("labeled_count " + std::to_string(spec.labeled_count) +
                      " outside [1, " + std::to_string(n) + "]");
  }

  SplitResult result;
  std::vector<Eigen::Index> labeled_idx;
  Rng rng(mix_seed(spec.seed, 0x73747261 /*"stra"*/));

  if (spec.labeled_count < train.num_classes) {
    result.stratified = false;
    result.warning = "labeled_count " + std::to_string(spec.labeled_count) +
                     " < class count " + std::to_string(train.num_classes) +
                     "; falling back to an unstratified split";
    std::vector<Eigen::Index> all(n);
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    rng.shuffle(all);
    labeled_idx.assign(all.begin(), all.begin() + spec.labeled_count);
  } else {
    // Largest-remainder allocation of the label budget across classes,
    // proportional to class frequency, capped by class size.
    std::vector<std::vector<Eigen::Index>> per_class(train.num_classes);
    for (Eigen::Index i = 0; i < n; ++i) {
      per_class[static_cast<std::size_t>(train.labels[static_cast<std::size_t>(i)])]
          .push_back(i);
    }
    for (auto& cls : per_class) rng.shuffle(cls);

    const int k = train.num_classes;
    std::vector<Eigen::Index> take(k, 0);
    std::vector<double> remainder(k, 0.0);
    Eigen::Index assigned = 0;
    for (int c = 0; c < k; ++c) {
      const double quota =
          static_cast<double>(spec.labeled_count) *
          static_cast<double>(per_class[c].size()) / static_cast<double>(n);
      take[c] = std::min<Eigen::Index>(static_cast<Eigen::Index>(quota),
                                       per_class[c].size());
      remainder[c] = quota - static_cast<double>(take[c]);
      assigned += take[c];
    }
    while (assigned < spec.labeled_count) {
      int best = -1;
      for (int c = 0; c < k; ++c) {
        if (take[c] >= static_cast<Eigen::Index>(per_class[c].size())) continue;
        if (best < 0 || remainder[c] > remainder[best]) best = c;
      }
      if (best < 0) break;  // all classes exhausted (labeled_count == n)
      ++take[best];
      remainder[best] -= 1.0;
      ++assigned;
    }
    for (int c = 0; c < k; ++c) {
      labeled_idx.insert(labeled_idx.end(), per_class[c].begin(),
                         per_class[c].begin() + take[c]);
    }
  }

  std::sort(labeled_idx.begin(), labeled_idx.end());
  result.labeled_indices = labeled_idx;
  std::vector<char> is_labeled(n, 0);
  for (Eigen::Index i : labeled_idx) is_labeled[static_cast<std::size_t>(i)] = 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!is_labeled[static_cast<std::size_t>(i)]) {
      result.unlabeled_indices.push_back(i);
    }
  }

  result.labeled.inputs = gather_cols(train.inputs, result.labeled_indices);
  result.labeled.labels.reserve(labeled_idx.size());
  for (Eigen::Index i : result.labeled_indices) {
    result.labeled.labels.push_back(train.labels[static_cast<std::size_t>(i)]);
  }
  result.labeled.num_classes = train.num_classes;
  result.labeled.name = train.name + "-labeled";
  result.labeled.split = train.split;

  result.unlabeled.inputs = gather_cols(train.inputs, result.unlabeled_indices);
  result.unlabeled.labels.assign(result.unlabeled_indices.size(), 0);
  result.unlabeled.num_classes = train.num_classes;
  result.unlabeled.name = train.name + "-unlabeled";
  result.unlabeled.split = train.split;
  return result;
}

double evaluate_accuracy(const nn::Network& net, const Dataset& testset) {
  if (testset.size() < 1) throw DataError("empty test set");
  const Eigen::MatrixXd logits = net.forward(testset.inputs);
  Eigen::Index correct = 0;
  for (Eigen::Index s = 0; s < logits.cols(); ++s) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < logits.rows(); ++k) {
      if (logits(k, s) > logits(best, s)) best = k;  // ties keep lowest index
    }
    if (best == testset.labels[static_cast<std::size_t>(s)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(testset.size());
}

std::vector<MetricsRecord> pretrain_stage(
    const ExperimentConfig& cfg, nn::Network& net, const Dataset& source_train,
    const Dataset& unlabeled_target, const Dataset& source_test,
    const Dataset& target_test, CovarianceAccumulator& acc,
    StageInstrumentation* instr) {
  source_train.validate();
  if (source_train.size() < cfg.batch_size) {
    throw ConfigError("source training set smaller than one batch");
  }
  if (unlabeled_target.size() < cfg.batch_size) {
    throw ConfigError(
        "unlabeled target pool smaller than one batch; reduce batch_size or "
        "labeled_count");
  }

  LautumRegConfig reg;
  reg.lambda = cfg.lambda;
  reg.alpha = cfg.alpha;
  reg.jitter = cfg.jitter;
  reg.batch_size = cfg.batch_size;

  nn::AdamState adam(net, cfg.adam_pre);
  BatchSampler source_sampler(source_train.size(), cfg.batch_size,
                              mix_seed(cfg.seed, 0x70726573 /*"pres"*/));
  BatchSampler target_sampler(unlabeled_target.size(), cfg.batch_size,
                              mix_seed(cfg.seed, 0x70726574 /*"pret"*/));
  const Eigen::Index iters = source_sampler.batches_per_epoch();

  WallClock clock(cfg.record_wall_time);
  std::vector<MetricsRecord> records;
  std::int64_t iteration = 0;
  for (int epoch = 1; epoch <= cfg.epochs_pre; ++epoch) {
    source_sampler.reshuffle();
    double ce_sum = 0.0;
    double lautum_sum = 0.0;
    std::int64_t lautum_n = 0;
    for (Eigen::Index it = 0; it < iters; ++it) {
      const auto src_idx = source_sampler.next_batch();
      const auto tgt_idx = target_sampler.next_batch();
      if (instr != nullptr) {
        ++instr->source_batches_drawn;
        ++instr->unlabeled_batches_drawn;
      }
      const Eigen::MatrixXd src_x = gather_cols(source_train.inputs, src_idx);
      const Eigen::MatrixXd src_y = gather_onehot(source_train, src_idx);
      const Eigen::MatrixXd tgt_x =
          gather_cols(unlabeled_target.inputs, tgt_idx);

      const PretrainLossResult step =
          pretrain_loss(net, src_x, src_y, tgt_x, acc, reg);
      nn::adam_step(net, step.grads, adam);

      ce_sum += step.ce;
      if (!step.lautum_skipped) {
        lautum_sum += step.lautum;
        ++lautum_n;
      }
      ++iteration;
    }
    MetricsRecord rec;
    rec.stage = "pre";
    rec.epoch = epoch;
    rec.iteration = iteration;
    rec.ce_loss = ce_sum / static_cast<double>(iters);
    rec.lautum_value = lautum_n > 0 ? lautum_sum / static_cast<double>(lautum_n)
                                    : 0.0;
    rec.target_test_acc = evaluate_accuracy(net, target_test);
    rec.source_test_acc = evaluate_accuracy(net, source_test);
    rec.wall_time_s = clock.elapsed();
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<MetricsRecord> finetune_stage(const ExperimentConfig& cfg,
                                          nn::Network& net,
                                          const Dataset& labeled_target,
                                          const Dataset& source_test,
                                          const Dataset& target_test,
                                          StageInstrumentation* instr) {
  if (labeled_target.size() < 1) {
    throw ConfigError("post-transfer stage needs at least one labeled sample");
  }
  labeled_target.validate();

  nn::AdamState adam(net, cfg.adam_post);
  const Eigen::Index n = labeled_target.size();
  const Eigen::Index batch = std::min<Eigen::Index>(cfg.batch_size, n);
  const Eigen::Index iters = (n + batch - 1) / batch;  // keep partial batches

  Rng shuffle_rng(mix_seed(cfg.seed, 0x706f7374 /*"post"*/));
  std::vector<Eigen::Index> perm(n);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});

  WallClock clock(cfg.record_wall_time);
  std::vector<MetricsRecord> records;
  std::int64_t iteration = 0;
  for (int epoch = 1; epoch <= cfg.epochs_post; ++epoch) {
    shuffle_rng.shuffle(perm);
    double ce_sum = 0.0;
    for (Eigen::Index it = 0; it < iters; ++it) {
      const Eigen::Index lo = it * batch;
      const Eigen::Index hi = std::min(n, lo + batch);
      const std::vector<Eigen::Index> idx(perm.begin() + lo, perm.begin() + hi);
      if (instr != nullptr) ++instr->labeled_target_batches_drawn;
      const Eigen::MatrixXd x = gather_cols(labeled_target.inputs, idx);
      const Eigen::MatrixXd y = gather_onehot(labeled_target, idx);
      nn::ForwardCache cache;
      const Eigen::MatrixXd logits = net.forward(x, &cache);
      const nn::CeLossResult ce = nn::softmax_ce_loss(logits, y);
      const nn::Gradients grads = net.backward(cache, ce.dlogits);
      nn::adam_step(net, grads, adam);
      ce_sum += ce.loss;
      ++iteration;
    }
    MetricsRecord rec;
    rec.stage = "post";
    rec.epoch = epoch;
    rec.iteration = iteration;
    rec.ce_loss = ce_sum / static_cast<double>(iters);
    rec.lautum_value = 0.0;
    rec.target_test_acc = evaluate_accuracy(net, target_test);
    rec.source_test_acc = evaluate_accuracy(net, source_test);
    rec.wall_time_s = clock.elapsed();
    records.push_back(std::move(rec));
  }
  return records;
}

ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
  ExperimentData data;
  if (cfg.data_kind == "synthetic") {
    SyntheticShiftData gen = gen_synthetic_shift(cfg.synthetic);
    data.source_train = std::move(gen.source_train);
    data.source_test = std::move(gen.source_test);
    data.target_train = std::move(gen.target_train);
    data.target_test = std::move(gen.target_test);
  } else {
    data.source_train = load_idx(cfg.source_train_images, cfg.source_train_labels);
    data.source_test = load_idx(cfg.source_test_images, cfg.source_test_labels);
    data.target_train = load_idx(cfg.target_train_images, cfg.target_train_labels);
    data.target_test = load_idx(cfg.target_test_images, cfg.target_test_labels);
    data.source_test.split = "test";
    data.target_test.split = "test";
  }
  if (data.target_train.dim() != data.target_test.dim()) {
    throw DataError("target train/test dimensions disagree");
  }
  if (data.source_train.dim() != data.source_test.dim()) {
    throw DataError("source train/test dimensions disagree");
  }
  return data;
}

nn::Network build_network(const ExperimentConfig& cfg,
                          const ExperimentData& data) {
  if (data.source_train.dim() != data.target_train.dim()) {
    throw DataError(
        "a single network serves both domains; source and target input "
        "dimensions must agree");
  }
  const Eigen::Index d = data.target_train.dim();
  const int k = data.target_train.num_classes;
  nn::NetworkSpec spec;
  spec.seed = mix_seed(cfg.seed, 0x696e6974 /*"init"*/);
  if (cfg.arch == "mlp") {
    spec.input = {1, 1, d};
    for (Eigen::Index h : cfg.hidden_dims) {
      spec.layers.push_back(nn::LayerSpec::dense(h));
      spec.layers.push_back(nn::LayerSpec::relu());
    }
    spec.layers.push_back(nn::LayerSpec::dense(k));
  } else {
    // conv: requires square-ish image geometry from the loader
    const Eigen::Index side = static_cast<Eigen::Index>(
        std::llround(std::sqrt(static_cast<double>(d))));
    if (side * side != d) {
      throw ConfigError("conv arch requires square images, got dim " +
                        std::to_string(d));
    }
    spec.input = {1, side, side};
    spec.layers = {nn::LayerSpec::conv3x3(16), nn::LayerSpec::relu(),
                   nn::LayerSpec::maxpool2(),  nn::LayerSpec::conv3x3(32),
                   nn::LayerSpec::relu(),      nn::LayerSpec::maxpool2(),
                   nn::LayerSpec::flatten(),   nn::LayerSpec::dense(k)};
  }
  return nn::Network(spec, k);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                StageInstrumentation* instr) {
  cfg.validate();
  ExperimentData data = load_experiment_data(cfg);

  SplitSpec split_spec{cfg.labeled_count, cfg.effective_split_seed()};
  SplitResult split = split_target(data.target_train, split_spec);

  const Eigen::MatrixXd sigma_x =
      precompute_target_cov(split.unlabeled.inputs, cfg.jitter);

  nn::Network net = build_network(cfg, data);
  CovarianceAccumulator acc(sigma_x, net.class_count(), cfg.alpha, cfg.jitter,
                            cfg.batch_size);

  ExperimentResult result;
  std::vector<MetricsRecord> pre =
      pretrain_stage(cfg, net, data.source_train, split.unlabeled,
                     data.source_test, data.target_test, acc, instr);
  std::vector<MetricsRecord> post = finetune_stage(
      cfg, net, split.labeled, data.source_test, data.target_test, instr);

  result.records = std::move(pre);
  result.records.insert(result.records.end(), post.begin(), post.end());

  double best = 0.0, sum_early = 0.0;
  int early_n = 0;
  for (const MetricsRecord& r : result.records) {
    if (r.stage != "post") continue;
    best = std::max(best, r.target_test_acc);
    if (r.epoch <= 5) {
      sum_early += r.target_test_acc;
      ++early_n;
    }
  }
  result.summary.final_post_acc = post.empty() ? 0.0 : post.back().target_test_acc;
  result.summary.best_post_acc = best;
  result.summary.early_mean_acc =
      early_n > 0 ? sum_early / static_cast<double>(early_n) : 0.0;
  return result;
}

std::string write_experiment_outputs(const ExperimentConfig& cfg,
                                     const ExperimentResult& result) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.effective_output_dir());
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string());

  const fs::path csv_path = dir / (cfg.run_name + ".csv");
  write_metrics_csv(csv_path.string(), result.records);

  const fs::path summary_path = dir / (cfg.run_name + ".summary");
  std::ofstream os(summary_path, std::ios::binary);
  if (!os) throw IoError("cannot write " + summary_path.string());
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.12g", result.summary.final_post_acc);
  os << "final_target_test_acc = " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.12g", result.summary.best_post_acc);
  os << "best_target_test_acc = " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.12g", result.summary.early_mean_acc);
  os << "early_epoch_mean_acc = " << buf << "\n";
  os << "[config]\n" << cfg.echo();
  if (!os) throw IoError("summary write failed");
  return csv_path.string();
}

}  // namespace lautum
