#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cbcv/harness.hpp"

namespace cbcv {

/// Rows are blocks, columns are treatments. Rectangular, no missing cells.
struct BlockTable {
  std::vector<std::string> blocks;
  std::vector<std::string> treatments;
  std::vector<std::vector<double>> values;
};

void validate(const BlockTable& t);

/// Ranks 1..k within one row, tied values sharing their average rank.
std::vector<double> average_ranks(std::span<const double> row);

enum class PValueMethod {
  /// Exact permutation distribution when the number of distinct within-row
  /// rank arrangements is at most kExactLimit, chi-square otherwise.
  Auto,
  ChiSquare,
};

inline constexpr double kExactLimit = 1e6;

struct FriedmanResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool exact = false;
  std::size_t n_blocks = 0;
  std::size_t n_treatments = 0;
};

/// Tie-corrected Friedman chi-square. Needs at least 2 blocks and 2
/// treatments. A table without any within-row variation gives statistic 0
/// and p 1.
FriedmanResult friedman_test(const BlockTable& t, PValueMethod method = PValueMethod::Auto);

/// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double dof);

enum class Measure { Bias, Std };
const char* to_string(Measure m);

/// |bias| (signed bias when raw_bias), or std.
double measure_value(const EvalRecord& r, Measure m, bool raw_bias = false);

struct WinCount {
  std::string treatment;
  int wins = 0;
};

/// One row per (dataset, learner, k); the treatment(s) with the smallest
/// |bias| (or std) get a win each. Rows missing a treatment are skipped.
/// Treatments are reported in first-appearance order.
std::vector<WinCount> win_counts(const std::vector<EvalRecord>& records, Measure m);

enum class BlockUnit { DatasetLearner, Dataset };

/// Block table over the given records (callers pre-filter by balance and k).
/// With Dataset blocks the measure is averaged over learners. Incomplete
/// rows are dropped.
BlockTable build_block_table(const std::vector<EvalRecord>& records, Measure m, BlockUnit unit,
                             bool raw_bias = false);

}  // namespace cbcv
