#include "cbcv/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace cbcv {

std::size_t ClusteringResult::noise_count() const {
  return static_cast<std::size_t>(std::count(assignment.begin(), assignment.end(), kNoise));
}

double inertia(const Matrix& X, const ClusteringResult& r) {
  require(r.centroids.has_value(), "inertia: result has no centroids");
  double s = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i)
    s += squared_distance(X.row(i), r.centroids->row(static_cast<std::size_t>(r.assignment[i])));
  return s;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_fit_input(const Matrix& X, int k) {
  require(X.rows() > 0 && X.cols() > 0, "k-means: empty matrix");
  require(k >= 1, "k-means: k must be positive");
  require(static_cast<std::size_t>(k) <= X.rows(), "k-means: k exceeds the number of instances");
}

// Nearest center; ties go to the lower center index.
std::size_t nearest_center(std::span<const double> x, const Matrix& centers, double& best_d2) {
  std::size_t best = 0;
  best_d2 = kInf;
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    const double d2 = squared_distance(x, centers.row(c));
    if (d2 < best_d2) {
      best_d2 = d2;
      best = c;
    }
  }
  return best;
}

Matrix kmeanspp_init(const Matrix& X, std::size_t k, Rng& rng) {
  const std::size_t n = X.rows();
  Matrix centers(k, X.cols());
  std::vector<bool> chosen(n, false);
  std::size_t first = rng.uniform_index(n);
  chosen[first] = true;
  std::copy(X.row(first).begin(), X.row(first).end(), centers.row(0).begin());

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(X.row(i), centers.row(0));

  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      const double r = rng.uniform01() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        acc += d2[i];
        pick = i;
        if (acc > r) break;
      }
    }
    if (pick == n) {
      // Every remaining point coincides with a center; take any unchosen one.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) free.push_back(i);
      pick = free[rng.uniform_index(free.size())];
    }
    chosen[pick] = true;
    std::copy(X.row(pick).begin(), X.row(pick).end(), centers.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(X.row(i), centers.row(c)));
  }
  return centers;
}

// Gives each empty cluster the instance farthest from its current center
// (among clusters that can spare one) and moves that center onto it.
void repair_empty_clusters(const Matrix& X, Matrix& centers, std::vector<int>& assignment,
                           std::vector<double>& d2) {
  const std::size_t k = centers.rows();
  std::vector<std::size_t> sizes(k, 0);
  for (int a : assignment) ++sizes[static_cast<std::size_t>(a)];
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] > 0) continue;
    std::size_t far = X.rows();
    double far_d2 = -1.0;
    for (std::size_t i = 0; i < X.rows(); ++i) {
      if (sizes[static_cast<std::size_t>(assignment[i])] < 2) continue;
      if (d2[i] > far_d2) {
        far_d2 = d2[i];
        far = i;
      }
    }
    if (far == X.rows()) continue;  // unreachable when k <= n
    --sizes[static_cast<std::size_t>(assignment[far])];
    assignment[far] = static_cast<int>(c);
    ++sizes[c];
    d2[far] = 0.0;
    std::copy(X.row(far).begin(), X.row(far).end(), centers.row(c).begin());
  }
}

Matrix cluster_means(const Matrix& X, std::span<const int> assignment, std::size_t k) {
  Matrix means(k, X.cols());
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    if (assignment[i] < 0) continue;
    const auto c = static_cast<std::size_t>(assignment[i]);
    ++sizes[c];
    auto m = means.row(c);
    auto x = X.row(i);
    for (std::size_t j = 0; j < X.cols(); ++j) m[j] += x[j];
  }
  for (std::size_t c = 0; c < k; ++c)
    if (sizes[c] > 0)
      for (double& v : means.row(c)) v /= static_cast<double>(sizes[c]);
  return means;
}

ClusteringResult finish(const Matrix& X, Matrix centers, std::vector<int> assignment) {
  ClusteringResult r;
  r.n_clusters = static_cast<int>(centers.rows());
  std::vector<double> dist(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i)
    dist[i] = euclidean_distance(X.row(i), centers.row(static_cast<std::size_t>(assignment[i])));
  r.assignment = std::move(assignment);
  r.centroids = std::move(centers);
  r.distances = std::move(dist);
  return r;
}

}  // namespace

ClusteringResult kmeans_fit(const Matrix& X, const KMeansConfig& cfg, const IterationTrace& trace) {
  check_fit_input(X, cfg.k);
  require(cfg.max_iterations >= 1, "k-means: max_iterations must be positive");
  const std::size_t n = X.rows();
  const auto k = static_cast<std::size_t>(cfg.k);

  Rng rng(cfg.seed);
  Matrix centers = kmeanspp_init(X, k, rng);
  std::vector<int> assignment(n, -1);
  std::vector<double> d2(n);

  for (int it = 0; it < cfg.max_iterations; ++it) {
    std::size_t changes = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const int c = static_cast<int>(nearest_center(X.row(i), centers, d2[i]));
      if (c != assignment[i]) {
        ++changes;
        assignment[i] = c;
      }
    }
    repair_empty_clusters(X, centers, assignment, d2);
    if (trace) trace(it, std::accumulate(d2.begin(), d2.end(), 0.0));
    centers = cluster_means(X, assignment, k);
    if (it > 0 && (changes == 0 || static_cast<double>(changes) / static_cast<double>(n) < cfg.tolerance)) break;
  }
  return finish(X, std::move(centers), std::move(assignment));
}

ClusteringResult minibatch_kmeans_fit(const Matrix& X, const KMeansConfig& cfg) {
  check_fit_input(X, cfg.k);
  require(cfg.batch_size >= 1, "mini-batch k-means: batch_size must be positive");
  require(cfg.max_iterations >= 1, "mini-batch k-means: max_iterations must be positive");
  const std::size_t n = X.rows();
  const std::size_t d = X.cols();
  const auto k = static_cast<std::size_t>(cfg.k);
  const std::size_t batch = std::min(static_cast<std::size_t>(cfg.batch_size), n);

  Rng rng(cfg.seed);
  Matrix centers = kmeanspp_init(X, k, rng);
  std::vector<std::size_t> counts(k, 0);
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  Matrix sums(k, d);
  std::vector<std::size_t> batch_counts(k);

  for (int it = 0; it < cfg.max_iterations; ++it) {
    if (batch < n) {
      // Partial Fisher-Yates: the first `batch` slots become a uniform sample.
      for (std::size_t i = 0; i < batch; ++i) std::swap(pool[i], pool[i + rng.uniform_index(n - i)]);
    }
    std::fill(sums.row(0).begin(), sums.row(0).begin() + static_cast<std::ptrdiff_t>(k * d), 0.0);
    std::fill(batch_counts.begin(), batch_counts.end(), 0);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t i = batch < n ? pool[b] : b;
      double best_d2;
      const std::size_t c = nearest_center(X.row(i), centers, best_d2);
      ++batch_counts[c];
      auto s = sums.row(c);
      auto x = X.row(i);
      for (std::size_t j = 0; j < d; ++j) s[j] += x[j];
    }

    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t m = batch_counts[c];
      if (m == 0) continue;
      auto center = centers.row(c);
      auto s = sums.row(c);
      const bool fresh = counts[c] == 0;
      counts[c] += m;
      const double rate = 1.0 / static_cast<double>(counts[c]);
      for (std::size_t j = 0; j < d; ++j) {
        // Equivalent to one 1/count streaming step per batch member.
        const double next = fresh ? s[j] / static_cast<double>(m)
                                  : center[j] + (s[j] - static_cast<double>(m) * center[j]) * rate;
        shift += (next - center[j]) * (next - center[j]);
        center[j] = next;
      }
    }
    if (shift < cfg.tolerance) break;
  }

  std::vector<int> assignment(n);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) assignment[i] = static_cast<int>(nearest_center(X.row(i), centers, d2[i]));
  repair_empty_clusters(X, centers, assignment, d2);
  return finish(X, std::move(centers), std::move(assignment));
}

ClusteringResult fit_kmeans_family(const Matrix& X, const KMeansConfig& cfg) {
  return cfg.minibatch ? minibatch_kmeans_fit(X, cfg) : kmeans_fit(X, cfg);
}

void validate(const DbscanParams& p) {
  require(std::isfinite(p.epsilon) && p.epsilon > 0.0, "DBSCAN: epsilon must be finite and positive");
  require(p.min_samples >= 1, "DBSCAN: min_samples must be at least 1");
}

std::vector<double> distances_to_cluster_means(const Matrix& X, std::span<const int> assignment, int n_clusters) {
  const Matrix means = cluster_means(X, assignment, static_cast<std::size_t>(n_clusters));
  std::vector<double> dist(X.rows(), 0.0);
  for (std::size_t i = 0; i < X.rows(); ++i)
    if (assignment[i] >= 0) dist[i] = euclidean_distance(X.row(i), means.row(static_cast<std::size_t>(assignment[i])));
  return dist;
}

ClusteringResult dbscan_fit(const Matrix& X, const DbscanParams& params) {
  validate(params);
  const std::size_t n = X.rows();
  const double eps2 = params.epsilon * params.epsilon;

  auto neighbors = [&](std::size_t p) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n; ++j)
      if (squared_distance(X.row(p), X.row(j)) <= eps2) out.push_back(j);
    return out;
  };

  std::vector<bool> core(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (squared_distance(X.row(i), X.row(j)) <= eps2) ++count;
    core[i] = count >= static_cast<std::size_t>(params.min_samples);
  }

  constexpr int kUnassigned = -2;
  std::vector<int> label(n, kUnassigned);
  int cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != kUnassigned || !core[i]) continue;
    std::deque<std::size_t> frontier{i};
    label[i] = cluster;
    while (!frontier.empty()) {
      const std::size_t p = frontier.front();
      frontier.pop_front();
      for (std::size_t q : neighbors(p)) {
        if (label[q] != kUnassigned) continue;
        label[q] = cluster;
        if (core[q]) frontier.push_back(q);
      }
    }
    ++cluster;
  }
  for (int& l : label)
    if (l == kUnassigned) l = kNoise;

  ClusteringResult r;
  r.n_clusters = cluster;
  r.distances = distances_to_cluster_means(X, label, cluster);
  r.assignment = std::move(label);
  return r;
}

const char* to_string(Linkage l) {
  switch (l) {
    case Linkage::Single: return "single";
    case Linkage::Complete: return "complete";
    case Linkage::Average: return "average";
  }
  return "average";
}

Linkage linkage_from_string(std::string_view s) {
  if (s == "single") return Linkage::Single;
  if (s == "complete") return Linkage::Complete;
  if (s == "average") return Linkage::Average;
  fail(ErrorKind::InvalidArgument, "unknown linkage '" + std::string(s) + "'");
}

namespace {

// Condensed strictly-upper-triangular distance storage.
class PairTable {
 public:
  explicit PairTable(std::size_t n) : n_(n), d_(n * (n - 1) / 2) {}
  double& at(std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    return d_[i * n_ - i * (i + 1) / 2 + (j - i - 1)];
  }

 private:
  std::size_t n_;
  std::vector<double> d_;
};

std::vector<Merge> build_dendrogram_impl(const Matrix& X, Linkage linkage, std::size_t max_merges) {
  const std::size_t n = X.rows();
  std::vector<Merge> merges;
  if (n < 2) return merges;
  PairTable dist(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist.at(i, j) = euclidean_distance(X.row(i), X.row(j));

  std::vector<bool> active(n, true);
  std::vector<std::size_t> size(n, 1);
  std::vector<std::size_t> nn(n, n);
  std::vector<double> nn_dist(n, kInf);

  auto rescan = [&](std::size_t i) {
    nn[i] = n;
    nn_dist[i] = kInf;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!active[j]) continue;
      const double d = dist.at(i, j);
      if (d < nn_dist[i]) {
        nn_dist[i] = d;
        nn[i] = j;
      }
    }
  };
  for (std::size_t i = 0; i < n; ++i) rescan(i);

  const std::size_t total = std::min(max_merges, n - 1);
  merges.reserve(total);
  for (std::size_t step = 0; step < total; ++step) {
    std::size_t a = n;
    for (std::size_t i = 0; i < n; ++i)
      if (active[i] && nn[i] < n && (a == n || nn_dist[i] < nn_dist[a])) a = i;
    const std::size_t b = nn[a];
    merges.push_back({a, b, nn_dist[a]});

    const double na = static_cast<double>(size[a]);
    const double nb = static_cast<double>(size[b]);
    for (std::size_t x = 0; x < n; ++x) {
      if (!active[x] || x == a || x == b) continue;
      const double da = dist.at(a, x);
      const double db = dist.at(b, x);
      double merged = 0.0;
      switch (linkage) {
        case Linkage::Single: merged = std::min(da, db); break;
        case Linkage::Complete: merged = std::max(da, db); break;
        case Linkage::Average: merged = (na * da + nb * db) / (na + nb); break;
      }
      dist.at(a, x) = merged;
    }
    active[b] = false;
    size[a] += size[b];

    rescan(a);
    for (std::size_t i = 0; i < b; ++i) {
      if (!active[i] || i == a) continue;
      if (nn[i] == a || nn[i] == b) {
        rescan(i);
      } else if (i < a) {
        const double d = dist.at(i, a);
        if (d < nn_dist[i] || (d == nn_dist[i] && a < nn[i])) {
          nn_dist[i] = d;
          nn[i] = a;
        }
      }
    }
  }
  return merges;
}

}  // namespace

std::vector<Merge> build_dendrogram(const Matrix& X, Linkage linkage) {
  return build_dendrogram_impl(X, linkage, X.rows());
}

std::vector<int> cut_dendrogram(std::size_t n, std::span<const Merge> merges, std::size_t n_clusters) {
  require(n_clusters >= 1 && n_clusters <= n, "cut_dendrogram: n_clusters must be in [1, n]");
  require(merges.size() >= n - n_clusters, "cut_dendrogram: not enough merges");
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t m = 0; m < n - n_clusters; ++m) {
    const std::size_t ra = find(merges[m].a);
    const std::size_t rb = find(merges[m].b);
    parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<int> labels(n);
  std::vector<int> id_of_root(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    if (id_of_root[r] < 0) id_of_root[r] = next++;
    labels[i] = id_of_root[r];
  }
  return labels;
}

ClusteringResult agglomerative_fit(const Matrix& X, std::size_t n_clusters, Linkage linkage) {
  const std::size_t n = X.rows();
  require(n > 0, "agglomerative: empty matrix");
  require(n_clusters >= 1 && n_clusters <= n, "agglomerative: n_clusters must be in [1, n]");
  const auto merges = build_dendrogram_impl(X, linkage, n - n_clusters);
  ClusteringResult r;
  r.assignment = cut_dendrogram(n, merges, n_clusters);
  r.n_clusters = static_cast<int>(n_clusters);
  r.distances = distances_to_cluster_means(X, r.assignment, r.n_clusters);
  return r;
}

int cluster_count_from_merges(std::span<const Merge> merges, std::size_t n, double gap_ratio) {
  if (n < 3 || merges.size() + 1 < n) return 1;
  // merges[j] takes the state from n - j to n - j - 1 clusters.
  for (std::size_t c = 2; c + 1 <= n; ++c) {
    const double next = merges[n - c].distance;      // c -> c - 1
    const double current = merges[n - c - 1].distance;  // c + 1 -> c
    const bool gap = current > 0.0 ? next / current > gap_ratio : next > 0.0;
    if (gap) return static_cast<int>(c);
  }
  return 1;
}

int estimate_cluster_count(const Dataset& ds, std::uint64_t seed, const ClusterCountOptions& options) {
  const std::size_t n = ds.n_instances();
  if (n < 10) fail(ErrorKind::Data, "estimate_cluster_count: dataset too small (need at least 10 instances)");
  require(options.repetitions >= 1, "estimate_cluster_count: repetitions must be positive");
  require(options.min_clusters <= options.max_clusters, "estimate_cluster_count: empty clamp range");
  const std::size_t m = std::min(options.sample_size, n);

  std::vector<int> candidates;
  std::vector<std::size_t> all(n);
  for (int r = 0; r < options.repetitions; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    std::iota(all.begin(), all.end(), 0);
    rng.shuffle(all);
    std::vector<std::size_t> sample(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(sample.begin(), sample.end());
    const Matrix X = ds.features.select_rows(sample);
    candidates.push_back(cluster_count_from_merges(build_dendrogram(X, options.linkage), m, options.gap_ratio));
  }
  std::sort(candidates.begin(), candidates.end());
  const int median = candidates[(candidates.size() - 1) / 2];
  return std::clamp(median, options.min_clusters, options.max_clusters);
}

std::optional<std::size_t> find_knee(std::span<const double> y) {
  const std::size_t m = y.size();
  if (m < 3) return std::nullopt;
  const double top = y.front();
  const double bottom = y.back();
  if (!(top > bottom)) return std::nullopt;
  std::size_t best = 0;
  double best_gap = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double xn = static_cast<double>(i) / static_cast<double>(m - 1);
    const double yn = (y[i] - bottom) / (top - bottom);
    // Perpendicular distance below the chord (0,1)-(1,0), up to a 1/sqrt(2) factor.
    const double gap = 1.0 - xn - yn;
    if (gap > best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  if (best_gap <= 1e-12 || best == 0 || best == m - 1) return std::nullopt;
  return best;
}

std::vector<double> k_distance_curve(const Matrix& X, std::size_t k) {
  const std::size_t n = X.rows();
  require(k >= 1 && k < n, "k_distance_curve: need 1 <= k < n");
  std::vector<double> curve(n);
  std::vector<double> row(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t t = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row[t++] = euclidean_distance(X.row(i), X.row(j));
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k - 1), row.end());
    curve[i] = row[k - 1];
  }
  std::sort(curve.begin(), curve.end(), std::greater<>());
  return curve;
}

DbscanParams estimate_dbscan_params(const Dataset& ds) {
  const std::size_t d = ds.n_features();
  const std::size_t n = ds.n_instances();
  require(d >= 1, "estimate_dbscan_params: dataset has no features");
  DbscanParams p;
  p.min_samples = static_cast<int>(2 * d);
  if (n <= 2 * d)
    fail(ErrorKind::Data, "estimate_dbscan_params: need more than 2 * n_features instances (have " +
                              std::to_string(n) + ")");
  const auto curve = k_distance_curve(ds.features, static_cast<std::size_t>(p.min_samples - 1));
  if (const auto knee = find_knee(curve)) {
    p.epsilon = curve[*knee];
  } else {
    std::vector<double> sorted(curve.rbegin(), curve.rend());
    p.epsilon = sorted[(sorted.size() - 1) / 2];
  }
  if (!(p.epsilon > 0.0)) {
    // Duplicate-heavy data: fall back to the smallest positive k-distance.
    double smallest = kInf;
    for (double v : curve)
      if (v > 0.0) smallest = std::min(smallest, v);
    if (!std::isfinite(smallest)) fail(ErrorKind::Data, "estimate_dbscan_params: all k-distances are zero");
    p.epsilon = smallest;
  }
  return p;
}

}  // namespace cbcv
