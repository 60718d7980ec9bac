#pragma once

// Multi-seed experiment runs, aggregation, convergence detection and the
// comparison report.
//
// On-disk run artifact (one directory per algorithm/seed):
//   config.json     resolved single-seed config
//   run.json        status, config hash, seed, error (if any), eval summary
//   metrics.jsonl   one line per finished epoch (append-only)
//   checkpoints/    epoch_NNNN.ckpt at the configured interval, final.ckpt

#include "bcr/env/environment.hpp"
#include "bcr/harness/config.hpp"
#include "bcr/human/human_model.hpp"
#include "bcr/ppo/ppo.hpp"

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bcr::harness {

std::unique_ptr<env::Environment> make_environment(const ExperimentConfig& config,
                                                   std::uint64_t seed);
human::HumanModel make_human(const ExperimentConfig& config, const env::Environment& environment,
                             std::uint64_t seed);

struct RunArtifact {
  std::string name;
  std::string algorithm;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<ppo::EpochMetrics> metrics;
  std::optional<ppo::EvalResult> eval;
  std::filesystem::path dir;
  bool ok = false;
  bool interrupted = false;
  std::string error_kind;
  std::string error;
};

struct RunOptions {
  // Empty: nothing is written.
  std::filesystem::path output_root;
  const std::atomic<bool>* stop = nullptr;
  std::function<void(const std::string& run, const ppo::EpochMetrics&)> on_epoch;
  bool evaluate = true;
};

// Artifact directory of one run under `root`.
std::filesystem::path run_directory(const std::filesystem::path& root, const ExperimentConfig& config,
                                    std::uint64_t seed);

// Trains and evaluates one (config, seed). Errors propagate.
RunArtifact run_single(const ExperimentConfig& config, std::uint64_t seed, const RunOptions& options);

// Every (config, seed) pair, up to `workers` at once. A failed run is
// recorded in its artifact (ok = false) and the matrix continues. Output
// order follows the input order regardless of scheduling.
std::vector<RunArtifact> run_matrix(const std::vector<ExperimentConfig>& configs,
                                    const RunOptions& options, int workers = 1);

// Reads every run directory below `root` (any depth).
std::vector<RunArtifact> load_artifacts(const std::filesystem::path& root);

// mean_sparse per epoch.
std::vector<double> sparse_curve(const RunArtifact& artifact);

struct Aggregate {
  std::string algorithm;
  int runs = 0;
  std::vector<double> mean;
  std::vector<double> std;  // sample standard deviation (0 for one run)
  std::vector<std::vector<double>> curves;
};

// Pointwise mean and sample std. Throws ContractError when empty or the
// curves differ in length.
Aggregate aggregate(const std::string& algorithm, const std::vector<std::vector<double>>& curves);
Aggregate aggregate(const std::string& algorithm, const std::vector<RunArtifact>& artifacts);

// Trailing moving average; entry i (i >= window - 1) averages curve[i-window+1..i].
std::vector<double> moving_average(std::span<const double> curve, int window);

// First epoch whose trailing moving average reaches the plateau level
// max - (1 - threshold) * |max| (threshold * max for a positive max). With
// kFullCurve the max is over the whole curve; with kRunningMax it is over
// the moving averages up to that epoch. Throws ContractError when the curve
// is shorter than the window.
int detect_convergence(std::span<const double> curve, int window = 10, double threshold = 0.9,
                       ConvergenceReference reference = ConvergenceReference::kFullCurve);

// Number of trailing epochs in the final window (at least one).
int final_window_length(int epochs, double fraction);

struct AlgorithmSummary {
  std::string algorithm;
  int runs = 0;
  double final_mean = 0.0;
  // Sample std of the per-seed final-window means.
  double final_seed_std = 0.0;
  // Sample std of all (seed, epoch) values inside the final window.
  double final_pooled_std = 0.0;
  std::vector<double> final_per_seed;
  int convergence_epoch = 0;
  std::optional<double> eval_mean;
  // Relative to the reference algorithm; empty for the reference itself or
  // when undefined (zero denominator).
  std::optional<double> uplift_pct;
  std::optional<double> efficiency_gain_pct;
};

struct ComparisonReport {
  std::string reference;
  std::vector<AlgorithmSummary> rows;
  std::vector<Aggregate> aggregates;

  const AlgorithmSummary* find(const std::string& algorithm) const;
};

// Percent uplift of `value` over `base`: 100 * (value - base) / |base|.
std::optional<double> uplift_percent(double value, double base);
// 100 * (1 - epochs_ref / epochs_base).
std::optional<double> efficiency_gain_percent(double epochs_ref, double epochs_base);

// Rows follow `aggregates` order; uplift and efficiency are of `reference`
// over each other algorithm. `evals` (optional) holds per-algorithm mean
// evaluation rewards in the same order.
ComparisonReport compare_report(const std::vector<Aggregate>& aggregates,
                                const std::string& reference, const ReportSettings& settings,
                                const std::vector<std::optional<double>>& evals = {});

// Groups artifacts by algorithm (reference first, the rest by name).
ComparisonReport compare_artifacts(const std::vector<RunArtifact>& artifacts,
                                   const std::string& reference, const ReportSettings& settings);

std::string report_csv(const ComparisonReport& report);
std::string report_text(const ComparisonReport& report);
// epoch, then <algorithm>_mean, <algorithm>_std per algorithm.
std::string plot_data_csv(const ComparisonReport& report);

// Writes report.csv, report.txt and plot_data.csv into `dir`.
void write_report(const ComparisonReport& report, const std::filesystem::path& dir);

}  // namespace bcr::harness
