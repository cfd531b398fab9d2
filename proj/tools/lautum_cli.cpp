// Command-line driver: identity verification, single experiments, lambda
// sweeps and plotting.

#include <CLI11.hpp>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include "lautum/config.hpp"
#include "lautum/errors.hpp"
#include "lautum/info_measures.hpp"
#include "lautum/pipeline.hpp"
#include "lautum/rng.hpp"
#include "lautum/svg_plot.hpp"

namespace {

using namespace lautum;

// ---- verify-info ----

std::vector<double> random_positive_pmf(Rng& rng, std::size_t n) {
  std::vector<double> p(n);
  double sum = 0.0;
  for (double& v : p) sum += v = 0.05 + rng.uniform();
  for (double& v : p) v /= sum;
  return p;
}

DiscreteClassifier random_classifier(Rng& rng, int nx, int ny, int nw) {
  std::vector<double> f(static_cast<std::size_t>(nx) * ny * nw);
  for (int x = 0; x < nx; ++x) {
    for (int w = 0; w < nw; ++w) {
      double sum = 0.0;
      std::vector<double> col(static_cast<std::size_t>(ny));
      for (int y = 0; y < ny; ++y) sum += col[y] = 0.05 + rng.uniform();
      for (int y = 0; y < ny; ++y)
        f[(static_cast<std::size_t>(x) * ny + y) * nw + w] = col[y] / sum;
    }
  }
  return DiscreteClassifier(nx, ny, nw, std::move(f));
}

Eigen::MatrixXd random_spd(Rng& rng, Eigen::Index n) {
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) a(i, j) = rng.normal();
  return a * a.transpose() / static_cast<double>(n) +
         0.8 * Eigen::MatrixXd::Identity(n, n);
}

GaussianBlocks random_blocks(Rng& rng, Eigen::Index d, Eigen::Index k) {
  const Eigen::MatrixXd full = random_spd(rng, d + k);
  return GaussianBlocks(full.topLeftCorner(d, d),
                        full.bottomRightCorner(k, k),
                        full.topRightCorner(d, k));
}

bool report(const char* name, bool pass, double worst, double tol) {
  std::printf("%-58s %s  (max residual %.3e, tolerance %.0e)\n", name,
              pass ? "PASS" : "FAIL", worst, tol);
  return pass;
}

int cmd_verify_info(bool with_mc) {
  bool all = true;

  {  // Theorem-1 identities on 1000 random strictly positive joints
    Rng rng(1001);
    double worst_a = 0.0, worst_b = 0.0, worst_c = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
      const int nx = 2 + static_cast<int>(rng.below(3));
      const int ny = 2 + static_cast<int>(rng.below(3));
      const int nw = 2 + static_cast<int>(rng.below(3));
      const DiscreteJoint joint(
          nx, ny, nw,
          random_positive_pmf(rng, static_cast<std::size_t>(nx) * ny * nw));
      const DiscreteClassifier clf = random_classifier(rng, nx, ny, nw);
      const Theorem1Terms t = decompose_theorem1(joint, clf);
      worst_a = std::max(worst_a, std::abs(t.star - (t.lautum_w_xy +
                                                     t.cond_entropy -
                                                     t.lautum_w_x)));
      worst_b = std::max(
          worst_b,
          std::abs(t.ce - (t.joint_kl_term + t.cond_entropy - t.lautum_w_x)));
      worst_c = std::max(
          worst_c,
          std::abs((t.joint_kl_term - t.cond_kl_term) - t.lautum_w_x));
    }
    all &= report("star identity (1000 random joints)", worst_a <= 1e-12,
                  worst_a, 1e-12);
    all &= report("full decomposition identity (1000 random joints)",
                  worst_b <= 1e-12, worst_b, 1e-12);
    // informational: the conditional-KL reading deviates by exactly L(w;x)
    std::printf("%-58s info  (joint-KL minus conditional-KL equals L(w;x); "
                "max deviation %.3e)\n",
                "conditional-KL reading residual", worst_c);
  }

  {  // independence => zero
    Rng rng(1002);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd px(3), py(2);
      double sx = 0, sy = 0;
      for (int i = 0; i < 3; ++i) sx += px(i) = 0.1 + rng.uniform();
      for (int j = 0; j < 2; ++j) sy += py(j) = 0.1 + rng.uniform();
      px /= sx;
      py /= sy;
      const Eigen::MatrixXd prod = px * py.transpose();
      worst = std::max(worst, std::abs(discrete_mutual_info(prod)));
      worst = std::max(worst, std::abs(discrete_lautum(prod)));
      const GaussianBlocks blocks(random_spd(rng, 3), random_spd(rng, 2),
                                  Eigen::MatrixXd::Zero(3, 2));
      worst = std::max(worst, std::abs(gaussian_lautum_paper(blocks)));
      worst = std::max(worst, std::abs(gaussian_lautum_kl(blocks)));
      worst = std::max(worst, std::abs(gaussian_mutual_info(blocks)));
    }
    all &= report("independence gives zero (all four measures)",
                  worst <= 1e-12, worst, 1e-12);
  }

  {  // proportionality between the printed formula and the KL definition
    Rng rng(1003);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(5));
      const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.below(5));
      const GaussianBlocks blocks = random_blocks(rng, d, k);
      const double paper = gaussian_lautum_paper(blocks);
      const double kl = gaussian_lautum_kl(blocks);
      if (kl > 1e-12) {
        worst = std::max(worst, std::abs(paper - 2.0 * kl) / (2.0 * kl));
      }
    }
    all &= report("printed Gaussian formula = 2 x KL (200 random blocks)",
                  worst <= 1e-9, worst, 1e-9);
  }

  if (with_mc) {
    Rng rng(1004);
    double worst = 0.0;
    for (int c = 0; c < 10; ++c) {
      const GaussianBlocks blocks = random_blocks(
          rng, 1 + static_cast<Eigen::Index>(rng.below(4)),
          1 + static_cast<Eigen::Index>(rng.below(4)));
      const double kl = gaussian_lautum_kl(blocks);
      // Monte-Carlo estimate: fixed seed, 1e6 samples
      Rng mc_rng(mix_seed(9000, static_cast<std::uint64_t>(c)));
      Eigen::LLT<Eigen::MatrixXd> llt0(blocks.block_diagonal());
      Eigen::LLT<Eigen::MatrixXd> llt1(blocks.full());
      const Eigen::MatrixXd l0 = llt0.matrixL();
      const Eigen::MatrixXd l1 = llt1.matrixL();
      const double logdet0 = 2.0 * l0.diagonal().array().log().sum();
      const double logdet1 = 2.0 * l1.diagonal().array().log().sum();
      double acc = 0.0;
      const std::size_t n = 1000000;
      Eigen::VectorXd u(l0.rows());
      for (std::size_t i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < u.size(); ++j) u(j) = mc_rng.normal();
        const Eigen::VectorXd z = l0 * u;
        const double q0 = u.squaredNorm();
        const double q1 =
            l1.triangularView<Eigen::Lower>().solve(z).squaredNorm();
        acc += -0.5 * (logdet0 + q0) + 0.5 * (logdet1 + q1);
      }
      const double mc = acc / static_cast<double>(n);
      if (kl > 1e-6) worst = std::max(worst, std::abs(mc - kl) / kl);
    }
    all &= report("Monte-Carlo KL cross-check (10 cases, 1e6 samples)",
                  worst <= 0.02, worst, 0.02);
  }

  std::printf("verify-info: %s\n", all ? "ALL CHECKS PASSED" : "FAILURES");
  return all ? 0 : 2;
}

// ---- experiment helpers ----

std::string lambda_token(double lambda) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", lambda);
  return buf;
}

int cmd_run_experiment(const std::string& config_path, long long seed_override,
                       bool seed_set, const std::string& out_override) {
  ParsedConfig parsed = parse_config(config_path);
  for (const std::string& w : parsed.warnings) {
    std::fprintf(stderr, "warning: %s\n", w.c_str());
  }
  ExperimentConfig cfg = parsed.config;
  if (seed_set) cfg.seed = static_cast<std::uint64_t>(seed_override);
  if (!out_override.empty()) cfg.output_dir = out_override;

  const ExperimentResult result = run_experiment(cfg);
  const std::string csv = write_experiment_outputs(cfg, result);
  std::printf("wrote %s\n", csv.c_str());
  std::printf("final_target_test_acc = %.4f\n", result.summary.final_post_acc);
  std::printf("best_target_test_acc  = %.4f\n", result.summary.best_post_acc);
  std::printf("early_epoch_mean_acc  = %.4f\n", result.summary.early_mean_acc);
  return 0;
}

int cmd_sweep(const std::string& config_path, std::vector<double> lambdas,
              std::vector<long long> seeds, unsigned jobs,
              const std::string& out_override) {
  ParsedConfig parsed = parse_config(config_path);
  for (const std::string& w : parsed.warnings) {
    std::fprintf(stderr, "warning: %s\n", w.c_str());
  }
  if (lambdas.empty() || seeds.empty()) {
    throw ConfigError("sweep needs at least one lambda and one seed");
  }

  struct Cell {
    double lambda;
    long long seed;
    ExperimentSummary summary;
  };
  std::vector<Cell> cells;
  for (double l : lambdas) {
    for (long long s : seeds) cells.push_back({l, s, {}});
  }

  const ExperimentConfig base = parsed.config;
  std::atomic<std::size_t> next{0};
  std::mutex io_mutex;
  std::vector<std::string> errors;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      Cell& cell = cells[i];
      ExperimentConfig cfg = base;
      cfg.mode = TrainingMode::kLautum;  // lambda = 0 cells equal standard
      cfg.lambda = cell.lambda;
      cfg.seed = static_cast<std::uint64_t>(cell.seed);
      if (!out_override.empty()) cfg.output_dir = out_override;
      cfg.run_name = base.run_name + "_lambda" + lambda_token(cell.lambda) +
                     "_seed" + std::to_string(cell.seed);
      try {
        const ExperimentResult result = run_experiment(cfg);
        write_experiment_outputs(cfg, result);
        cell.summary = result.summary;
        std::lock_guard<std::mutex> lock(io_mutex);
        std::printf("lambda=%-10s seed=%-4lld early=%.4f best=%.4f final=%.4f\n",
                    lambda_token(cell.lambda).c_str(), cell.seed,
                    result.summary.early_mean_acc, result.summary.best_post_acc,
                    result.summary.final_post_acc);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(io_mutex);
        errors.push_back("lambda=" + lambda_token(cell.lambda) + " seed=" +
                         std::to_string(cell.seed) + ": " + e.what());
      }
    }
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned n_threads =
      std::min<unsigned>(jobs == 0 ? hw : jobs,
                         static_cast<unsigned>(cells.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  if (!errors.empty()) {
    for (const std::string& e : errors) {
      std::fprintf(stderr, "error: %s\n", e.c_str());
    }
    return 2;
  }

  // aggregate per lambda
  namespace fs = std::filesystem;
  ExperimentConfig out_cfg = base;
  if (!out_override.empty()) out_cfg.output_dir = out_override;
  const fs::path dir(out_cfg.effective_output_dir());
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path agg_path = dir / (base.run_name + "_sweep_summary.txt");
  std::ofstream os(agg_path, std::ios::binary);
  if (!os) throw IoError("cannot write " + agg_path.string());
  os << "lambda,n_seeds,early_mean,early_std,best_mean,best_std,final_mean,"
        "final_std\n";
  for (double l : lambdas) {
    std::vector<const Cell*> group;
    for (const Cell& c : cells) {
      if (c.lambda == l) group.push_back(&c);
    }
    auto stats = [&](auto getter) {
      double mean = 0.0;
      for (const Cell* c : group) mean += getter(c->summary);
      mean /= static_cast<double>(group.size());
      double var = 0.0;
      for (const Cell* c : group) {
        const double d = getter(c->summary) - mean;
        var += d * d;
      }
      var /= static_cast<double>(group.size());
      return std::pair<double, double>(mean, std::sqrt(var));
    };
    const auto early =
        stats([](const ExperimentSummary& s) { return s.early_mean_acc; });
    const auto best =
        stats([](const ExperimentSummary& s) { return s.best_post_acc; });
    const auto fin =
        stats([](const ExperimentSummary& s) { return s.final_post_acc; });
    char line[256];
    std::snprintf(line, sizeof(line),
                  "%g,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", l, group.size(),
                  early.first, early.second, best.first, best.second,
                  fin.first, fin.second);
    os << line;
  }
  std::printf("wrote %s\n", agg_path.string().c_str());
  return 0;
}

template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const DomainError& e) {
    std::fprintf(stderr, "numerical domain error: %s\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    // config, data, shape, batch, distribution, format: validation failures
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Lautum-regularized semi-supervised transfer learning toolkit"};
  app.require_subcommand(1);

  auto* verify = app.add_subcommand(
      "verify-info",
      "run the information-measure identity suite and report pass/fail");
  bool with_mc = false;
  verify->add_flag("--mc", with_mc,
                   "include the Monte-Carlo cross-checks (slower)");

  auto* run = app.add_subcommand("run-experiment",
                                 "run one two-stage transfer experiment");
  std::string run_config;
  long long run_seed = 0;
  std::string run_out;
  run->add_option("--config", run_config, "experiment config file")
      ->required();
  auto* seed_opt =
      run->add_option("--seed", run_seed, "override the config seed");
  run->add_option("--out", run_out, "override the output directory");

  auto* sweep = app.add_subcommand(
      "sweep", "run a lambda x seed grid of experiments and aggregate");
  std::string sweep_config;
  std::vector<double> sweep_lambdas;
  std::vector<long long> sweep_seeds;
  unsigned sweep_jobs = 0;
  std::string sweep_out;
  sweep->add_option("--config", sweep_config, "experiment config file")
      ->required();
  sweep->add_option("--lambda", sweep_lambdas, "lambda values")
      ->required()
      ->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds, "seeds")->required()->delimiter(
      ',');
  sweep->add_option("--jobs", sweep_jobs,
                    "parallel worker threads (0 = hardware)");
  sweep->add_option("--out", sweep_out, "override the output directory");

  auto* plot = app.add_subcommand(
      "plot", "render post-transfer accuracy curves from metrics CSVs");
  std::string plot_out;
  std::vector<std::string> plot_csvs;
  plot->add_option("--out", plot_out, "output SVG path")->required();
  plot->add_option("csvs", plot_csvs, "metrics CSV files")->required();

  CLI11_PARSE(app, argc, argv);

  if (verify->parsed()) {
    return guarded([&] { return cmd_verify_info(with_mc); });
  }
  if (run->parsed()) {
    return guarded([&] {
      return cmd_run_experiment(run_config, run_seed, seed_opt->count() > 0,
                                run_out);
    });
  }
  if (sweep->parsed()) {
    return guarded([&] {
      return cmd_sweep(sweep_config, sweep_lambdas, sweep_seeds, sweep_jobs,
                       sweep_out);
    });
  }
  if (plot->parsed()) {
    return guarded([&] {
      render_plot(plot_csvs, plot_out);
      std::printf("wrote %s\n", plot_out.c_str());
      return 0;
    });
  }
  return 1;
}
