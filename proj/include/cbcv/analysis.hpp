#pragma once

// Summary tables over a finished run: Friedman p-values, win counts, long
// bias/std distributions and execution-time totals.

#include <optional>
#include <string>
#include <vector>

#include "cbcv/harness.hpp"
#include "cbcv/stats.hpp"

namespace cbcv {

struct AnalysisOptions {
  BlockUnit block_unit = BlockUnit::DatasetLearner;
  /// Rank signed bias in the Friedman tables instead of |bias|.
  bool raw_bias = false;
  PValueMethod p_method = PValueMethod::Auto;
};

struct FriedmanRow {
  std::string balance;
  int k_splits = 0;
  Measure measure = Measure::Bias;
  std::size_t n_blocks = 0;
  std::size_t n_treatments = 0;
  /// Unset when the group has fewer than 2 complete blocks.
  std::optional<FriedmanResult> result;
};

struct WinRow {
  std::string balance;  // "balanced", "imbalanced" or "all"
  int k_splits = 0;
  Measure measure = Measure::Bias;
  std::string splitter;
  int wins = 0;
};

struct TimingRow {
  std::string splitter;
  std::string splitter_kind;
  int k_splits = 0;
  std::size_t n_runs = 0;
  double total_seconds = 0.0;
  double mean_seconds = 0.0;
  /// 1 = fastest mean among splitters with the same k.
  int rank = 0;
  bool kmeans_based = false;
};

struct AnalysisResult {
  std::vector<FriedmanRow> friedman;
  std::vector<WinRow> wins;
  std::vector<TimingRow> timing;
  /// Human-readable notes (e.g. why the Friedman table was skipped).
  std::vector<std::string> messages;
  bool friedman_skipped = false;
};

AnalysisResult analyze_records(const std::vector<EvalRecord>& records, const AnalysisOptions& options = {});

/// Writes friedman.csv (unless skipped), wins.csv, distributions.csv and
/// timing.csv into out_dir.
void write_analysis(const AnalysisResult& result, const std::vector<EvalRecord>& records, const std::string& out_dir);

/// Reads <results_dir>/records.jsonl, analyzes, writes into out_dir
/// (results_dir when empty).
AnalysisResult analyze_results_dir(const std::string& results_dir, const std::string& out_dir = {},
                                   const AnalysisOptions& options = {});

}  // namespace cbcv
