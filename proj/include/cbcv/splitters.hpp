#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cbcv/clustering.hpp"
#include "cbcv/data.hpp"

namespace cbcv {

/// Fold id per instance for k folds.
struct FoldAssignment {
  int k = 0;
  std::vector<int> fold_of;

  std::vector<std::size_t> fold_sizes() const;
  std::vector<std::size_t> members(int fold) const;
};

/// Throws unless every instance has a fold in [0, k) and (for n >= k) every
/// fold is nonempty.
void validate(const FoldAssignment& fa);

enum class SplitterKind {
  KFold,
  Scv,
  Scbcv,
  ScbcvMini,
  Kcbcv,
  KcbcvMini,
  Acbcv,
  DbscanBcv,
  Dbscv,
  Dobscv,
};

const char* to_string(SplitterKind kind);
SplitterKind splitter_kind_from_string(std::string_view s);
bool is_cluster_based(SplitterKind kind);
inline constexpr SplitterKind kAllSplitterKinds[] = {
    SplitterKind::KFold,     SplitterKind::Scv,   SplitterKind::Scbcv,     SplitterKind::ScbcvMini,
    SplitterKind::Kcbcv,     SplitterKind::KcbcvMini, SplitterKind::Acbcv, SplitterKind::DbscanBcv,
    SplitterKind::Dbscv,     SplitterKind::Dobscv};

struct SplitterSpec {
  SplitterKind kind = SplitterKind::Scv;
  int k_splits = 10;
  /// k-means family and agglomerative. Unset means "estimate per dataset".
  std::optional<int> k_clusters;
  /// DBSCAN. Unset means "estimate per dataset".
  std::optional<DbscanParams> dbscan;
  Linkage linkage = Linkage::Average;
  int batch_size = 1024;
  int kmeans_max_iterations = 300;
  std::uint64_t seed = 0;
  /// Display name; defaults to the kind name (plus k_clusters when fixed).
  std::string label;

  std::string id() const;
};

/// Uniform random permutation cut into k near-equal folds (the first n % k
/// folds get one extra instance).
FoldAssignment split_kfold(const Dataset& ds, int k, std::uint64_t seed);

/// Per class: shuffle, then deal round-robin. One dealing cursor runs across
/// classes so fold sizes differ by at most one.
FoldAssignment split_scv(const Dataset& ds, int k, std::uint64_t seed);

/// Stratified cluster-based CV. Per class (in class-id order): fit k-means
/// (or mini-batch k-means) with min(k_clusters, class size) centers, sort each
/// cluster's members by distance to its centroid (ties by instance index),
/// append the clusters in id order to one global index list, then deal that
/// list round-robin over the folds.
FoldAssignment split_scbcv(const Dataset& ds, int k_splits, int k_clusters, std::uint64_t seed,
                           bool minibatch, int batch_size = 1024, int max_iterations = 300);

/// Shared core of KCBCV / ACBCV / DBSCANBCV: members of each cluster sorted
/// by stored distance (ties by index), clusters concatenated in id order with
/// noise last as one pseudo-cluster sorted by index, dealt round-robin.
FoldAssignment split_cluster_unstratified(std::size_t n, int k_splits, const ClusteringResult& clustering);

/// Per class: start at a random instance, then repeatedly walk to the nearest
/// unassigned same-class instance, assigning successive folds cyclically.
FoldAssignment split_dbscv(const Dataset& ds, int k, std::uint64_t seed);

/// Per class: pick a random unassigned instance and its k-1 nearest
/// unassigned same-class neighbours; they fill folds 0..k-1 in order of
/// distance. Fewer than k leftovers are dealt round-robin.
FoldAssignment split_dobscv(const Dataset& ds, int k, std::uint64_t seed);

/// Dispatches on spec.kind. Cluster-based kinds need their parameters set
/// (see resolve_cluster_params).
FoldAssignment make_folds(const Dataset& ds, const SplitterSpec& spec);

/// Fills unset k_clusters / DBSCAN parameters from the dataset.
SplitterSpec resolve_cluster_params(const SplitterSpec& spec, const Dataset& ds, std::uint64_t seed);

struct FoldPair {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Pair j tests on fold j and trains on the rest; indices ascending.
std::vector<FoldPair> materialize_folds(const FoldAssignment& fa);

}  // namespace cbcv
