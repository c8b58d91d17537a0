#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cbcv/common.hpp"

namespace cbcv {

/// Feature matrix plus dense class labels in [0, K).
/// Immutable once loaded; every splitter partitions its rows.
struct Dataset {
  std::string name;
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  /// Rows dropped at load because a cell was missing ("", "?", "NA", "nan").
  std::size_t rejected_rows = 0;

  std::size_t n_instances() const noexcept { return labels.size(); }
  std::size_t n_features() const noexcept { return features.cols(); }
  int n_classes() const noexcept { return static_cast<int>(class_names.size()); }

  /// Row indices of each class, ascending.
  std::vector<std::vector<std::size_t>> indices_by_class() const;
  /// Sub-dataset over the given rows (order kept); class_names are preserved
  /// so label ids stay comparable with the parent.
  Dataset subset(std::span<const std::size_t> rows) const;
};

/// Checks the structural invariants (label range, shape, finiteness).
void validate(const Dataset& ds);

struct ClassDistribution {
  std::vector<std::size_t> counts;
  std::vector<double> proportions;

  std::size_t total() const;
};

ClassDistribution class_distribution(const Dataset& ds);

struct LoadOptions {
  std::string label_column = "target";
  char delimiter = '\t';
};

/// File name without directory and .tsv/.csv/.txt/.gz extensions.
std::string dataset_name_from_path(const std::string& path);

/// Loads a header-first delimited text file (PMLB layout by default).
/// Labels are re-encoded to 0..K-1 in sorted label order (numeric order when
/// every label parses as a number).
Dataset load_dataset(const std::string& path, const LoadOptions& options = {});
Dataset parse_dataset(const std::string& text, const std::string& name,
                      const LoadOptions& options = {});

/// Writes the dataset back out in the same layout (class names as labels).
void save_dataset(const Dataset& ds, const std::string& path, char delimiter = '\t');

/// Z-score each column using the population (divide-by-n) standard deviation.
/// Constant columns become all zeros.
Dataset standardize(const Dataset& ds);

/// K * sum_i (n_i/N - 1/K)^2. 0 for uniform classes, approaches 1 as one
/// class dominates.
double imbalance_index(const ClassDistribution& dist);
double imbalance_index(const Dataset& ds);

enum class BalanceClass { Balanced, Imbalanced };

inline constexpr double kImbalanceThreshold = 0.20;

BalanceClass classify_balance(double imbalance);
BalanceClass classify_balance(const Dataset& ds);
const char* to_string(BalanceClass b);

struct SubsampleSpec {
  double fraction = 0.9;
  bool stratified = true;
  std::uint64_t seed = 0;
};

struct Subsample {
  std::vector<std::size_t> indices;  // ascending original row indices
  Dataset data;
};

/// Per-class target counts for a stratified draw: floor(fraction * n_i), with
/// the remaining round(fraction * N) - sum(floor) seats going to the classes
/// with the largest fractional parts (lower class id on ties).
std::vector<std::size_t> stratified_counts(std::span<const std::size_t> class_sizes,
                                           double fraction);

Subsample stratified_subsample(const Dataset& ds, const SubsampleSpec& spec);

struct HoldoutSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

HoldoutSplit stratified_holdout_split(const Dataset& ds, double train_fraction,
                                      std::uint64_t seed);

}  // namespace cbcv
