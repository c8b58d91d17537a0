#pragma once

// Brute-force reference implementations used by the unit and acceptance
// tests. Each one follows the plain description of the procedure and shares
// no code with the library beyond the seeded RNG and seed derivation, which
// are part of the reproducibility contract.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "cbcv/clustering.hpp"
#include "cbcv/common.hpp"
#include "cbcv/data.hpp"
#include "cbcv/splitters.hpp"
#include "cbcv/synth.hpp"

namespace oracle {

using cbcv::Dataset;
using cbcv::Matrix;

inline double dist(const Matrix& X, std::size_t a, std::size_t b) {
  double s = 0.0;
  for (std::size_t j = 0; j < X.cols(); ++j) {
    const double d = X(a, j) - X(b, j);
    s += d * d;
  }
  return std::sqrt(s);
}

inline double imbalance(const std::vector<double>& proportions) {
  const double K = static_cast<double>(proportions.size());
  double s = 0.0;
  for (double p : proportions) s += (p - 1.0 / K) * (p - 1.0 / K);
  return K * s;
}

/// True when two labelings describe the same partition (noise must match).
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] < 0) != (b[i] < 0)) return false;
    if (a[i] < 0) continue;
    if (auto [it, ok] = ab.emplace(a[i], b[i]); !ok && it->second != b[i]) return false;
    if (auto [it, ok] = ba.emplace(b[i], a[i]); !ok && it->second != a[i]) return false;
  }
  return true;
}

/// Smallest within-cluster sum of squares over every partition of the rows
/// into exactly k nonempty groups.
inline double best_partition_inertia(const Matrix& X, int k) {
  const std::size_t n = X.rows();
  const std::size_t d = X.cols();
  std::vector<int> lab(n, 0);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int used) {
    // Canonical labelings only: row i may open at most one new group.
    if (n - i < static_cast<std::size_t>(k - used)) return;
    if (i == n) {
      if (used != k) return;
      std::vector<double> sum(static_cast<std::size_t>(k) * d, 0.0);
      std::vector<double> cnt(static_cast<std::size_t>(k), 0.0);
      for (std::size_t r = 0; r < n; ++r) {
        cnt[static_cast<std::size_t>(lab[r])] += 1;
        for (std::size_t j = 0; j < d; ++j) sum[static_cast<std::size_t>(lab[r]) * d + j] += X(r, j);
      }
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < d; ++j) {
          const double m = sum[static_cast<std::size_t>(lab[r]) * d + j] / cnt[static_cast<std::size_t>(lab[r])];
          s += (X(r, j) - m) * (X(r, j) - m);
        }
      best = std::min(best, s);
      return;
    }
    for (int g = 0; g <= std::min(used, k - 1); ++g) {
      lab[i] = g;
      rec(i + 1, std::max(used, g + 1));
    }
  };
  rec(0, 0);
  return best;
}

/// DBSCAN by closure: core points (at least min_samples points, self
/// included, within eps) linked when within eps; components of the core graph
/// are numbered by their smallest member; a non-core point within eps of a
/// core joins the lowest-numbered such component, otherwise it is noise.
inline std::vector<int> dbscan(const Matrix& X, double eps, int min_samples) {
  const std::size_t n = X.rows();
  std::vector<std::vector<bool>> near(n, std::vector<bool>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) near[i][j] = dist(X, i, j) <= eps + 1e-12 * eps;
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i)
    core[i] = std::count(near[i].begin(), near[i].end(), true) >= min_samples;
  // Transitive closure of the core-core adjacency (Warshall).
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) reach[i][j] = core[i] && core[j] && (i == j || near[i][j]);
  for (std::size_t m = 0; m < n; ++m)
    for (std::size_t i = 0; i < n; ++i)
      if (reach[i][m])
        for (std::size_t j = 0; j < n; ++j)
          if (reach[m][j]) reach[i][j] = true;
  std::vector<int> comp(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || comp[i] >= 0) continue;
    for (std::size_t j = 0; j < n; ++j)
      if (reach[i][j]) comp[j] = next;
    ++next;
  }
  std::vector<int> out(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) {
      out[i] = comp[i];
      continue;
    }
    int best = -1;
    for (std::size_t j = 0; j < n; ++j)
      if (core[j] && near[i][j] && (best < 0 || comp[j] < best)) best = comp[j];
    out[i] = best;
  }
  return out;
}

/// Average linkage by repeated full recomputation: every step evaluates the
/// mean pairwise distance between every pair of current clusters.
inline std::vector<int> average_linkage(const Matrix& X, std::size_t n_clusters) {
  const std::size_t n = X.rows();
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters.push_back({i});
  while (clusters.size() > n_clusters) {
    std::size_t ba = 0, bb = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < clusters.size(); ++a)
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        double s = 0.0;
        for (std::size_t i : clusters[a])
          for (std::size_t j : clusters[b]) s += dist(X, i, j);
        s /= static_cast<double>(clusters[a].size() * clusters[b].size());
        if (s < best) {
          best = s;
          ba = a;
          bb = b;
        }
      }
    clusters[ba].insert(clusters[ba].end(), clusters[bb].begin(), clusters[bb].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
  }
  std::vector<int> out(n);
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (std::size_t i : clusters[c]) out[i] = static_cast<int>(c);
  return out;
}

/// Stratified cluster-based dealing, step by step: split by class, cluster
/// each class, order each cluster's members by distance to their centroid,
/// chain everything into one list and hand out folds 0,1,..,k-1,0,1,..
inline std::vector<int> scbcv(const Dataset& ds, int k_splits, int k_clusters, std::uint64_t seed, bool minibatch) {
  const std::size_t n = ds.n_instances();
  std::vector<std::size_t> chain;
  for (int c = 0; c < ds.n_classes(); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (ds.labels[i] == c) members.push_back(i);
    if (members.empty()) continue;
    cbcv::KMeansConfig cfg;
    cfg.k = std::min<int>(k_clusters, static_cast<int>(members.size()));
    cfg.seed = cbcv::derive_seed(seed, static_cast<std::uint64_t>(c));
    cfg.minibatch = minibatch;
    const Matrix Xc = ds.features.select_rows(members);
    const auto fit = minibatch ? cbcv::minibatch_kmeans_fit(Xc, cfg) : cbcv::kmeans_fit(Xc, cfg);
    for (int cl = 0; cl < fit.n_clusters; ++cl) {
      std::vector<std::pair<double, std::size_t>> items;
      for (std::size_t p = 0; p < members.size(); ++p) {
        if (fit.assignment[p] != cl) continue;
        double s = 0.0;
        for (std::size_t j = 0; j < Xc.cols(); ++j) {
          const double d = Xc(p, j) - (*fit.centroids)(static_cast<std::size_t>(cl), j);
          s += d * d;
        }
        items.emplace_back(std::sqrt(s), members[p]);
      }
      std::sort(items.begin(), items.end());
      for (const auto& it : items) chain.push_back(it.second);
    }
  }
  std::vector<int> fold(n, -1);
  for (std::size_t p = 0; p < chain.size(); ++p) fold[chain[p]] = static_cast<int>(p % static_cast<std::size_t>(k_splits));
  return fold;
}

/// Nearest-neighbour walk: per class a random start, then always step to
/// the closest unvisited same-class point; successive points take successive
/// folds (the fold counter continues across classes).
inline std::vector<int> dbscv(const Dataset& ds, int k, std::uint64_t seed) {
  const std::size_t n = ds.n_instances();
  cbcv::Rng rng(seed);
  std::vector<int> fold(n, -1);
  int next_fold = 0;
  for (int c = 0; c < ds.n_classes(); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (ds.labels[i] == c) members.push_back(i);
    if (members.empty()) continue;
    std::size_t at = members[rng.uniform_index(members.size())];
    std::set<std::size_t> left(members.begin(), members.end());
    while (true) {
      fold[at] = next_fold;
      next_fold = (next_fold + 1) % k;
      left.erase(at);
      if (left.empty()) break;
      std::size_t best = *left.begin();
      for (std::size_t j : left)
        if (dist(ds.features, at, j) < dist(ds.features, at, best)) best = j;
      at = best;
    }
  }
  return fold;
}

/// Neighbour groups: per class, while at least k points remain, a random
/// remaining point goes to fold 0 and its k-1 nearest remaining same-class
/// points go to folds 1..k-1 by increasing distance; the final leftovers of
/// every class are handed out 0,1,2,.. with one counter for the whole dataset.
inline std::vector<int> dobscv(const Dataset& ds, int k, std::uint64_t seed) {
  const std::size_t n = ds.n_instances();
  cbcv::Rng rng(seed);
  std::vector<int> fold(n, -1);
  int leftover_fold = 0;
  for (int c = 0; c < ds.n_classes(); ++c) {
    std::vector<std::size_t> remaining;
    for (std::size_t i = 0; i < n; ++i)
      if (ds.labels[i] == c) remaining.push_back(i);
    while (remaining.size() >= static_cast<std::size_t>(k)) {
      const std::size_t anchor = remaining[rng.uniform_index(remaining.size())];
      std::vector<std::pair<double, std::size_t>> others;
      for (std::size_t j : remaining)
        if (j != anchor) others.emplace_back(dist(ds.features, anchor, j), j);
      std::sort(others.begin(), others.end());
      fold[anchor] = 0;
      for (int f = 1; f < k; ++f) fold[others[static_cast<std::size_t>(f - 1)].second] = f;
      std::vector<std::size_t> keep;
      for (std::size_t j : remaining)
        if (fold[j] < 0) keep.push_back(j);
      remaining = keep;
    }
    for (std::size_t j : remaining) {
      fold[j] = leftover_fold;
      leftover_fold = (leftover_fold + 1) % k;
    }
  }
  return fold;
}

/// Friedman statistic with average ranks and the tie correction, computed
/// straight from the definition.
inline double friedman_statistic(const std::vector<std::vector<double>>& t) {
  const double n = static_cast<double>(t.size());
  const std::size_t k = t[0].size();
  const double kd = static_cast<double>(k);
  std::vector<double> rsum(k, 0.0);
  double ties = 0.0;
  for (const auto& row : t) {
    for (std::size_t j = 0; j < k; ++j) {
      double less = 0, equal = 0;
      for (double v : row) {
        less += v < row[j];
        equal += v == row[j];
      }
      rsum[j] += less + (equal + 1.0) / 2.0;
    }
    std::map<double, double> g;
    for (double v : row) g[v] += 1;
    for (auto& [_, c] : g) ties += c * c * c - c;
  }
  const double corr = 1.0 - ties / (n * (kd * kd * kd - kd));
  if (corr <= 0) return 0.0;
  double s = 0.0;
  for (double r : rsum) s += (r / n - (kd + 1) / 2) * (r / n - (kd + 1) / 2);
  return 12.0 * n / (kd * (kd + 1)) * s / corr;
}

/// Exact permutation p-value: every within-row reordering of the values,
/// (k!)^n tables in total, counted when its statistic reaches the observed one.
inline double friedman_permutation_p(const std::vector<std::vector<double>>& t) {
  const double observed = friedman_statistic(t);
  const std::size_t n = t.size();
  const std::size_t k = t[0].size();
  std::vector<std::vector<std::vector<double>>> perms(n);
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    do {
      std::vector<double> row(k);
      for (std::size_t j = 0; j < k; ++j) row[j] = t[r][idx[j]];
      perms[r].push_back(row);
    } while (std::next_permutation(idx.begin(), idx.end()));
  }
  std::vector<std::vector<double>> cur(n);
  double hits = 0, total = 0;
  std::function<void(std::size_t)> rec = [&](std::size_t r) {
    if (r == n) {
      total += 1;
      if (friedman_statistic(cur) >= observed - 1e-9) hits += 1;
      return;
    }
    for (const auto& p : perms[r]) {
      cur[r] = p;
      rec(r + 1);
    }
  };
  rec(0);
  return hits / total;
}

/// Gaussian-blob dataset with a random number of rows and classes.
inline Dataset random_dataset(cbcv::Rng& rng, std::size_t n_min, std::size_t n_max, int k_min, int k_max,
                              std::size_t d = 2) {
  const int K = k_min + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(k_max - k_min + 1)));
  std::size_t n = n_min + rng.uniform_index(n_max - n_min + 1);
  n = std::max<std::size_t>(n, 2 * static_cast<std::size_t>(K));
  cbcv::BlobSpec spec;
  spec.n_instances = n;
  spec.n_features = d;
  spec.class_weights.clear();
  for (int c = 0; c < K; ++c) spec.class_weights.push_back(0.2 + rng.uniform01());
  spec.clusters_per_class = 1 + static_cast<int>(rng.uniform_index(3));
  spec.separation = 3.0;
  spec.spread = 1.0;
  spec.seed = rng.next();
  Dataset ds = cbcv::make_blobs(spec);
  // Shuffle rows so classes are interleaved.
  std::vector<std::size_t> perm(ds.n_instances());
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  return ds.subset(perm);
}

}  // namespace oracle
