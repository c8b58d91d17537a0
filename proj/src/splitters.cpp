#include "cbcv/splitters.hpp"

#include <algorithm>
#include <numeric>

namespace cbcv {

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(std::max(k, 0)), 0);
  for (int f : fold_of) ++sizes[static_cast<std::size_t>(f)];
  return sizes;
}

std::vector<std::size_t> FoldAssignment::members(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == fold) out.push_back(i);
  return out;
}

void validate(const FoldAssignment& fa) {
  if (fa.k < 1) fail(ErrorKind::Internal, "fold assignment: k must be positive");
  for (int f : fa.fold_of)
    if (f < 0 || f >= fa.k) fail(ErrorKind::Internal, "fold assignment: fold id out of range");
  if (fa.fold_of.size() >= static_cast<std::size_t>(fa.k))
    for (std::size_t s : fa.fold_sizes())
      if (s == 0) fail(ErrorKind::Internal, "fold assignment: empty fold");
}

const char* to_string(SplitterKind kind) {
  switch (kind) {
    case SplitterKind::KFold: return "kfold";
    case SplitterKind::Scv: return "scv";
    case SplitterKind::Scbcv: return "scbcv";
    case SplitterKind::ScbcvMini: return "scbcv_mini";
    case SplitterKind::Kcbcv: return "kcbcv";
    case SplitterKind::KcbcvMini: return "kcbcv_mini";
    case SplitterKind::Acbcv: return "acbcv";
    case SplitterKind::DbscanBcv: return "dbscanbcv";
    case SplitterKind::Dbscv: return "dbscv";
    case SplitterKind::Dobscv: return "dobscv";
  }
  return "?";
}

SplitterKind splitter_kind_from_string(std::string_view s) {
  for (SplitterKind k : kAllSplitterKinds)
    if (s == to_string(k)) return k;
  fail(ErrorKind::InvalidArgument, "unknown splitter kind '" + std::string(s) + "'");
}

bool is_cluster_based(SplitterKind kind) {
  switch (kind) {
    case SplitterKind::Scbcv:
    case SplitterKind::ScbcvMini:
    case SplitterKind::Kcbcv:
    case SplitterKind::KcbcvMini:
    case SplitterKind::Acbcv:
    case SplitterKind::DbscanBcv: return true;
    default: return false;
  }
}

std::string SplitterSpec::id() const {
  if (!label.empty()) return label;
  std::string s = to_string(kind);
  if (kind == SplitterKind::DbscanBcv) return s;
  if (is_cluster_based(kind) && k_clusters) s += std::to_string(*k_clusters);
  return s;
}

namespace {

void check_k(std::size_t n, int k) {
  require(k >= 2, "splitter: k_splits must be at least 2");
  require(static_cast<std::size_t>(k) <= n, "splitter: k_splits (" + std::to_string(k) +
                                                ") exceeds the number of instances (" + std::to_string(n) + ")");
}

FoldAssignment deal(std::size_t n, int k, std::span<const std::size_t> order) {
  FoldAssignment fa{k, std::vector<int>(n, -1)};
  for (std::size_t p = 0; p < order.size(); ++p) fa.fold_of[order[p]] = static_cast<int>(p % static_cast<std::size_t>(k));
  return fa;
}

struct Element {
  std::size_t index;
  double distance;
};

void sort_by_distance(std::vector<Element>& v) {
  std::sort(v.begin(), v.end(), [](const Element& a, const Element& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
  });
}

}  // namespace

FoldAssignment split_kfold(const Dataset& ds, int k, std::uint64_t seed) {
  const std::size_t n = ds.n_instances();
  check_k(n, k);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(perm);
  const auto uk = static_cast<std::size_t>(k);
  FoldAssignment fa{k, std::vector<int>(n)};
  std::size_t pos = 0;
  for (std::size_t f = 0; f < uk; ++f) {
    const std::size_t size = n / uk + (f < n % uk ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) fa.fold_of[perm[pos++]] = static_cast<int>(f);
  }
  return fa;
}

FoldAssignment split_scv(const Dataset& ds, int k, std::uint64_t seed) {
  check_k(ds.n_instances(), k);
  Rng rng(seed);
  std::vector<std::size_t> order;
  for (auto members : ds.indices_by_class()) {
    rng.shuffle(members);
    order.insert(order.end(), members.begin(), members.end());
  }
  return deal(ds.n_instances(), k, order);
}

FoldAssignment split_scbcv(const Dataset& ds, int k_splits, int k_clusters, std::uint64_t seed, bool minibatch,
                           int batch_size, int max_iterations) {
  check_k(ds.n_instances(), k_splits);
  require(k_clusters >= 1, "scbcv: k_clusters must be positive");
  std::vector<std::size_t> index_list;
  index_list.reserve(ds.n_instances());

  const auto by_class = ds.indices_by_class();
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const auto& members = by_class[c];
    if (members.empty()) continue;
    KMeansConfig cfg;
    cfg.k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(k_clusters), members.size()));
    cfg.seed = derive_seed(seed, static_cast<std::uint64_t>(c));
    cfg.minibatch = minibatch;
    cfg.batch_size = batch_size;
    cfg.max_iterations = max_iterations;
    const ClusteringResult fit = fit_kmeans_family(ds.features.select_rows(members), cfg);

    std::vector<std::vector<Element>> clusters(static_cast<std::size_t>(fit.n_clusters));
    for (std::size_t i = 0; i < members.size(); ++i)
      clusters[static_cast<std::size_t>(fit.assignment[i])].push_back({members[i], (*fit.distances)[i]});
    for (auto& cluster : clusters) {
      sort_by_distance(cluster);
      for (const Element& e : cluster) index_list.push_back(e.index);
    }
  }
  return deal(ds.n_instances(), k_splits, index_list);
}

FoldAssignment split_cluster_unstratified(std::size_t n, int k_splits, const ClusteringResult& clustering) {
  check_k(n, k_splits);
  if (clustering.assignment.empty()) fail(ErrorKind::InvalidArgument, "cluster split: empty clustering");
  require(clustering.assignment.size() == n, "cluster split: clustering does not cover all instances");
  require(clustering.distances.has_value(), "cluster split: clustering carries no distances");

  std::vector<std::vector<Element>> clusters(static_cast<std::size_t>(clustering.n_clusters));
  std::vector<std::size_t> noise;
  for (std::size_t i = 0; i < n; ++i) {
    const int a = clustering.assignment[i];
    if (a == kNoise) {
      noise.push_back(i);
    } else {
      require(a >= 0 && a < clustering.n_clusters, "cluster split: cluster id out of range");
      clusters[static_cast<std::size_t>(a)].push_back({i, (*clustering.distances)[i]});
    }
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  for (auto& cluster : clusters) {
    sort_by_distance(cluster);
    for (const Element& e : cluster) order.push_back(e.index);
  }
  order.insert(order.end(), noise.begin(), noise.end());
  return deal(n, k_splits, order);
}

FoldAssignment split_dbscv(const Dataset& ds, int k, std::uint64_t seed) {
  const std::size_t n = ds.n_instances();
  check_k(n, k);
  Rng rng(seed);
  FoldAssignment fa{k, std::vector<int>(n, -1)};
  int cursor = 0;
  for (const auto& members : ds.indices_by_class()) {
    if (members.empty()) continue;
    std::vector<bool> taken(members.size(), false);
    std::size_t current = rng.uniform_index(members.size());
    for (std::size_t step = 0; step < members.size(); ++step) {
      taken[current] = true;
      fa.fold_of[members[current]] = cursor;
      cursor = (cursor + 1) % k;
      // Nearest untaken member; the ascending scan keeps the lower index on ties.
      std::size_t next = members.size();
      double best = 0.0;
      for (std::size_t j = 0; j < members.size(); ++j) {
        if (taken[j]) continue;
        const double d2 = squared_distance(ds.features.row(members[current]), ds.features.row(members[j]));
        if (next == members.size() || d2 < best) {
          best = d2;
          next = j;
        }
      }
      current = next;
    }
  }
  return fa;
}

FoldAssignment split_dobscv(const Dataset& ds, int k, std::uint64_t seed) {
  const std::size_t n = ds.n_instances();
  check_k(n, k);
  const auto uk = static_cast<std::size_t>(k);
  Rng rng(seed);
  FoldAssignment fa{k, std::vector<int>(n, -1)};
  std::size_t remainder_cursor = 0;
  for (const auto& members : ds.indices_by_class()) {
    std::vector<std::size_t> pool = members;  // ascending
    while (pool.size() >= uk) {
      const std::size_t anchor_pos = rng.uniform_index(pool.size());
      const std::size_t anchor = pool[anchor_pos];
      std::vector<Element> others;
      others.reserve(pool.size() - 1);
      for (std::size_t p = 0; p < pool.size(); ++p)
        if (p != anchor_pos) others.push_back({pool[p], squared_distance(ds.features.row(anchor), ds.features.row(pool[p]))});
      std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(uk - 1), others.end(),
                        [](const Element& a, const Element& b) {
                          return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
                        });
      fa.fold_of[anchor] = 0;
      for (std::size_t f = 1; f < uk; ++f) fa.fold_of[others[f - 1].index] = static_cast<int>(f);
      std::erase_if(pool, [&](std::size_t i) { return fa.fold_of[i] >= 0; });
    }
    for (std::size_t i : pool) {
      fa.fold_of[i] = static_cast<int>(remainder_cursor);
      remainder_cursor = (remainder_cursor + 1) % uk;
    }
  }
  return fa;
}

FoldAssignment make_folds(const Dataset& ds, const SplitterSpec& spec) {
  const std::size_t n = ds.n_instances();
  auto need_k_clusters = [&] {
    if (!spec.k_clusters) fail(ErrorKind::InvalidArgument, std::string(to_string(spec.kind)) + ": k_clusters not set");
    require(*spec.k_clusters >= 1, "k_clusters must be positive");
    return *spec.k_clusters;
  };
  auto global_kmeans = [&](bool minibatch) {
    check_k(n, spec.k_splits);
    KMeansConfig cfg;
    cfg.k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(need_k_clusters()), n));
    cfg.seed = spec.seed;
    cfg.minibatch = minibatch;
    cfg.batch_size = spec.batch_size;
    cfg.max_iterations = spec.kmeans_max_iterations;
    return split_cluster_unstratified(n, spec.k_splits, fit_kmeans_family(ds.features, cfg));
  };

  switch (spec.kind) {
    case SplitterKind::KFold: return split_kfold(ds, spec.k_splits, spec.seed);
    case SplitterKind::Scv: return split_scv(ds, spec.k_splits, spec.seed);
    case SplitterKind::Scbcv:
    case SplitterKind::ScbcvMini:
      return split_scbcv(ds, spec.k_splits, need_k_clusters(), spec.seed, spec.kind == SplitterKind::ScbcvMini,
                         spec.batch_size, spec.kmeans_max_iterations);
    case SplitterKind::Kcbcv: return global_kmeans(false);
    case SplitterKind::KcbcvMini: return global_kmeans(true);
    case SplitterKind::Acbcv: {
      check_k(n, spec.k_splits);
      const auto c = std::min<std::size_t>(static_cast<std::size_t>(need_k_clusters()), n);
      return split_cluster_unstratified(n, spec.k_splits, agglomerative_fit(ds.features, c, spec.linkage));
    }
    case SplitterKind::DbscanBcv: {
      check_k(n, spec.k_splits);
      if (!spec.dbscan) fail(ErrorKind::InvalidArgument, "dbscanbcv: DBSCAN parameters not set");
      return split_cluster_unstratified(n, spec.k_splits, dbscan_fit(ds.features, *spec.dbscan));
    }
    case SplitterKind::Dbscv: return split_dbscv(ds, spec.k_splits, spec.seed);
    case SplitterKind::Dobscv: return split_dobscv(ds, spec.k_splits, spec.seed);
  }
  fail(ErrorKind::Internal, "unhandled splitter kind");
}

SplitterSpec resolve_cluster_params(const SplitterSpec& spec, const Dataset& ds, std::uint64_t seed) {
  SplitterSpec out = spec;
  if (!is_cluster_based(spec.kind)) return out;
  if (spec.kind == SplitterKind::DbscanBcv) {
    if (!out.dbscan) out.dbscan = estimate_dbscan_params(ds);
  } else if (!out.k_clusters) {
    out.k_clusters = estimate_cluster_count(ds, seed);
  }
  return out;
}

std::vector<FoldPair> materialize_folds(const FoldAssignment& fa) {
  std::vector<FoldPair> pairs(static_cast<std::size_t>(fa.k));
  for (std::size_t i = 0; i < fa.fold_of.size(); ++i)
    for (std::size_t f = 0; f < pairs.size(); ++f)
      (static_cast<int>(f) == fa.fold_of[i] ? pairs[f].test : pairs[f].train).push_back(i);
  return pairs;
}

}  // namespace cbcv
