#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "cbcv/common.hpp"
#include "cbcv/data.hpp"

namespace cbcv {

inline constexpr int kNoise = -1;

/// Cluster id per instance. Non-noise ids are contiguous in [0, n_clusters);
/// kNoise only appears in DBSCAN results.
struct ClusteringResult {
  std::vector<int> assignment;
  int n_clusters = 0;
  std::optional<Matrix> centroids;
  /// Distance of each instance to its own cluster's center (centroid for the
  /// k-means family, member mean for agglomerative/DBSCAN, 0 for noise).
  std::optional<std::vector<double>> distances;

  std::size_t noise_count() const;
};

/// Total squared distance of every instance to its assigned centroid.
double inertia(const Matrix& X, const ClusteringResult& r);

/// Called after every assignment step with (iteration, inertia).
using IterationTrace = std::function<void(int, double)>;

struct KMeansConfig {
  int k = 2;
  int max_iterations = 300;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
  bool minibatch = false;
  int batch_size = 1024;
};

/// Lloyd iterations from k-means++ seeding. Stops when the fraction of
/// instances changing cluster drops below `tolerance` (or nothing changes),
/// or after max_iterations. Empty clusters take the instance farthest from
/// its centroid.
ClusteringResult kmeans_fit(const Matrix& X, const KMeansConfig& cfg, const IterationTrace& trace = {});

/// Mini-batch k-means: each iteration draws min(batch_size, n) instances,
/// assigns them and moves each center toward its batch members with
/// per-center learning rate 1/count. Stops when the summed squared center
/// shift drops below `tolerance`; a final full pass fills the assignment.
ClusteringResult minibatch_kmeans_fit(const Matrix& X, const KMeansConfig& cfg);

/// Dispatches on cfg.minibatch.
ClusteringResult fit_kmeans_family(const Matrix& X, const KMeansConfig& cfg);

struct DbscanParams {
  double epsilon = 0.5;
  int min_samples = 5;
};

void validate(const DbscanParams& p);

/// Core points have at least min_samples points (themselves included) within
/// epsilon. Clusters are grown from cores in instance order; a border point
/// joins the first cluster that reaches it.
ClusteringResult dbscan_fit(const Matrix& X, const DbscanParams& params);

enum class Linkage { Single, Complete, Average };

const char* to_string(Linkage l);
Linkage linkage_from_string(std::string_view s);

struct Merge {
  std::size_t a;  // representative (lowest original index) of each side
  std::size_t b;
  double distance;
};

/// Full bottom-up merge history: n-1 merges. The pair with the smallest
/// linkage distance merges first; ties go to the lexicographically smallest
/// (a, b) of cluster representatives.
std::vector<Merge> build_dendrogram(const Matrix& X, Linkage linkage);

/// Applies the first n - n_clusters merges. Labels are numbered by the
/// smallest member index.
std::vector<int> cut_dendrogram(std::size_t n, std::span<const Merge> merges, std::size_t n_clusters);

ClusteringResult agglomerative_fit(const Matrix& X, std::size_t n_clusters, Linkage linkage = Linkage::Average);

/// Per-instance distance to the mean of its cluster (0 for noise).
std::vector<double> distances_to_cluster_means(const Matrix& X, std::span<const int> assignment, int n_clusters);

struct ClusterCountOptions {
  int repetitions = 10;
  std::size_t sample_size = 100;
  double gap_ratio = 1.5;
  int min_clusters = 2;
  int max_clusters = 7;
  Linkage linkage = Linkage::Average;
};

/// Candidate count from one dendrogram: scanning from the top, the first
/// cluster count c whose next merge is more than gap_ratio times the merge
/// that produced it. 1 when no such gap exists.
int cluster_count_from_merges(std::span<const Merge> merges, std::size_t n, double gap_ratio);

/// Median (lower middle) candidate over repeated random samples, clamped.
int estimate_cluster_count(const Dataset& ds, std::uint64_t seed, const ClusterCountOptions& options = {});

/// Index of the knee of a descending curve: the point farthest below the
/// chord joining the endpoints once both axes are scaled to [0, 1]. Returns
/// nullopt when that point is an endpoint or the curve is flat/linear.
std::optional<std::size_t> find_knee(std::span<const double> descending);

/// Distances to the k-th nearest other point, sorted descending.
std::vector<double> k_distance_curve(const Matrix& X, std::size_t k);

/// min_samples = 2 * n_features; epsilon = knee of the descending
/// (min_samples - 1)-NN distance curve, or its median when no knee exists.
DbscanParams estimate_dbscan_params(const Dataset& ds);

}  // namespace cbcv
