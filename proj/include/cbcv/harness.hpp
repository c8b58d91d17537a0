#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cbcv/clustering.hpp"
#include "cbcv/data.hpp"
#include "cbcv/learners.hpp"
#include "cbcv/splitters.hpp"

namespace cbcv {

inline constexpr int kRecordSchemaVersion = 1;

struct ExperimentConfig {
  std::vector<std::string> datasets;
  std::vector<SplitterSpec> splitters;
  std::vector<LearnerSpec> learners;
  /// dataset name -> learner id -> tuned spec; overrides `learners` entries.
  std::map<std::string, std::map<std::string, LearnerSpec>> tuned;
  std::vector<int> fold_counts{2, 10};
  int holdout_reps = 100;
  int cv_reps = 20;
  double train_fraction = 0.9;
  std::uint64_t master_seed = 0;
  std::optional<MetricKind> metric_override;
  F1Average f1_average = F1Average::Macro;
  bool standardize = true;
  LoadOptions load;
  int workers = 1;
  /// Timing-labelled run: cells execute serially regardless of `workers`.
  bool timing_run = false;
  ClusterCountOptions cluster_count;
  /// Grid for `tune`; kinds absent here use the default grids.
  std::map<LearnerKind, Grid> grids;
};

/// Throws on violated invariants (reps >= 2, 0 < train_fraction < 1, ...).
void validate(const ExperimentConfig& cfg);

/// The learner actually used for one dataset (tuned spec if present).
LearnerSpec learner_for(const ExperimentConfig& cfg, const std::string& dataset, const LearnerSpec& base);

/// Everything needed to score a prediction set.
struct EvalContext {
  MetricKind metric = MetricKind::Accuracy;
  F1Average f1_average = F1Average::Macro;
  /// Full dataset, consulted by the oracle learner only.
  const Dataset* reference = nullptr;
};

/// Metric for a dataset: accuracy when balanced, F1 when imbalanced.
MetricKind default_metric(const Dataset& ds);

/// Mean metric over `reps` stratified holdouts (rep r seeded derive_seed(seed, r)).
double estimate_true_performance(const Dataset& ds, const LearnerSpec& learner, int reps, double train_fraction,
                                 std::uint64_t seed, const EvalContext& ctx);

struct CvRun {
  double score = 0.0;
  double seconds = 0.0;       // whole routine, fold construction through scoring
  double fold_seconds = 0.0;  // sum of per-fold train + score time
};

/// One complete cross-validation on `ds` with the given (resolved) splitter.
CvRun run_cv_once(const Dataset& ds, const LearnerSpec& learner, const SplitterSpec& splitter,
                  const EvalContext& ctx);

struct CvEstimate {
  std::vector<double> estimates;
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> wall_seconds;
  std::vector<double> fold_seconds;
};

/// Sample mean and (n - 1)-denominator standard deviation.
double mean_of(std::span<const double> v);
double sample_std(std::span<const double> v);

/// cv_reps stratified subsamples (subsample i seeded seed + i), one CV run on
/// each. Per-rep splitter/learner seeds derive from their spec seeds.
CvEstimate expected_cv_estimate(const Dataset& ds, const LearnerSpec& learner, const SplitterSpec& splitter,
                                int cv_reps, double train_fraction, std::uint64_t seed, const EvalContext& ctx);

struct EvalRecord {
  int schema_version = kRecordSchemaVersion;
  std::string dataset;
  std::string learner;
  std::string splitter;
  std::string splitter_kind;
  int k_splits = 0;
  std::string balance;  // "balanced" | "imbalanced"
  double imbalance = 0.0;
  MetricKind metric = MetricKind::Accuracy;
  std::vector<double> cv_estimates;
  double cv_mean = 0.0;
  double true_perf = 0.0;
  double bias = 0.0;
  double std = 0.0;
  std::vector<double> wall_seconds;
  std::vector<double> fold_seconds;
  std::map<std::string, double> learner_params;
  std::map<std::string, double> splitter_params;
  int workers = 1;

  std::string key() const;
};

std::string cell_key(const std::string& dataset, const std::string& learner, const std::string& splitter, int k);

struct CellStatus {
  std::string key;
  std::string dataset;
  std::string learner;
  std::string splitter;
  int k_splits = 0;
  std::string status;  // done | failed | pending
  std::string error;
};

struct RunOptions {
  /// Empty: keep everything in memory.
  std::string results_dir;
  bool resume = false;
  /// Overrides cfg.workers when > 0.
  int workers = 0;
  std::function<void(const CellStatus&)> on_cell_done;
};

struct RunResult {
  std::vector<EvalRecord> records;  // grid order
  std::vector<CellStatus> cells;    // grid order
  std::size_t executed_cells = 0;   // computed in this invocation
  std::size_t failed_cells = 0;
};

/// Full grid product datasets x learners x splitters x fold_counts. Per-cell
/// failures are recorded and the grid continues. With a results directory,
/// records are appended to records.jsonl as cells finish and the manifest is
/// rewritten at the end; `resume` skips cells already present.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

/// One frozen learner per (dataset, configured learner).
struct TunedEntry {
  std::string dataset;
  LearnerSpec learner;
  double score = 0.0;  // best mean balanced accuracy
};

struct TuneResult {
  std::vector<TunedEntry> entries;  // dataset-major, learner order
  std::vector<std::string> errors;  // one message per failed pair
};

/// Grid search for every (dataset, learner) pair with cfg.grids (default
/// grids for kinds not listed). The winning spec keeps the base learner's
/// label so it replaces that learner in later runs.
TuneResult tune_learners(const ExperimentConfig& cfg, int workers = 0);

}  // namespace cbcv
