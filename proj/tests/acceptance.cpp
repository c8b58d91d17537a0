// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"

#include "cbcv/analysis.hpp"
#include "cbcv/harness.hpp"
#include "cbcv/io.hpp"
#include "cbcv/stats.hpp"

using namespace cbcv;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
  double limit_seconds = 0.0;  // 0: no time limit
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cbcv_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string source_path(const std::string& rel) { return std::string(CBCV_SOURCE_DIR) + "/" + rel; }

// Result directories produced along the way; every record in them is audited.
std::vector<fs::path> g_run_dirs;

// ---------------------------------------------------------------- 1

Outcome imbalance_values() {
  const auto t0 = Clock::now();
  const double a = imbalance_index(ClassDistribution{{735, 265}, {0.735, 0.265}});
  const double b = imbalance_index(ClassDistribution{{985, 15}, {0.985, 0.015}});
  const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  Outcome o;
  o.pass = std::abs(a - 0.22) <= 0.005 && std::abs(b - 0.94) <= 0.005 && ms < 1.0 &&
           classify_balance(a) == BalanceClass::Imbalanced && classify_balance(b) == BalanceClass::Imbalanced;
  o.detail = "I(0.735,0.265)=" + fmt("%.4f", a) + " I(0.985,0.015)=" + fmt("%.4f", b) + " in " + fmt("%.4f", ms) +
             " ms";
  return o;
}

// ---------------------------------------------------------------- 2

bool stratified_kind(SplitterKind k) {
  return k == SplitterKind::Scv || k == SplitterKind::Scbcv || k == SplitterKind::ScbcvMini ||
         k == SplitterKind::Dbscv || k == SplitterKind::Dobscv;
}

// Empty string when the assignment satisfies every property.
std::string partition_violation(const Dataset& ds, const FoldAssignment& fa, int k, SplitterKind kind) {
  const std::size_t n = ds.n_instances();
  if (fa.k != k || fa.fold_of.size() != n) return "shape";
  std::vector<int> seen(n, 0);
  const auto pairs = materialize_folds(fa);
  for (const auto& p : pairs) {
    if (p.test.empty()) return "empty fold";
    if (p.test.size() + p.train.size() != n) return "train/test not complementary";
    for (auto i : p.test) ++seen[i];
  }
  for (int s : seen)
    if (s != 1) return "coverage/disjointness";
  std::size_t lo = n, hi = 0;
  for (const auto& p : pairs) {
    lo = std::min(lo, p.test.size());
    hi = std::max(hi, p.test.size());
  }
  if (hi - lo > 1) return "fold sizes differ by more than one";
  if (stratified_kind(kind))
    for (int c = 0; c < ds.n_classes(); ++c) {
      std::vector<std::size_t> per(static_cast<std::size_t>(k), 0);
      for (std::size_t i = 0; i < n; ++i)
        if (ds.labels[i] == c) ++per[static_cast<std::size_t>(fa.fold_of[i])];
      if (*std::max_element(per.begin(), per.end()) - *std::min_element(per.begin(), per.end()) > 1)
        return "class " + std::to_string(c) + " counts differ by more than one";
    }
  return {};
}

Outcome partition_suite() {
  constexpr int kTrials = 500;
  Rng rng(20240601);
  std::map<std::string, int> failures;
  std::string first_failure;
  int checks = 0;
  for (int t = 0; t < kTrials; ++t) {
    const int K = 2 + static_cast<int>(rng.uniform_index(4));
    const int k = rng.uniform_index(2) == 0 ? 2 : 10;
    const std::size_t n_min = std::max<std::size_t>({6, 2 * static_cast<std::size_t>(K), static_cast<std::size_t>(k)});
    const std::size_t n = n_min + rng.uniform_index(200 - n_min + 1);
    const std::size_t d = 2 + rng.uniform_index(3);
    const Dataset ds = oracle::random_dataset(rng, n, n, K, K, d);
    const std::uint64_t seed = rng.next();
    for (SplitterKind kind : kAllSplitterKinds) {
      SplitterSpec spec;
      spec.kind = kind;
      spec.k_splits = k;
      spec.seed = seed;
      if (ds.n_instances() < 10) {
        // Too few rows for the cluster-count / k-distance estimates.
        spec.k_clusters = 2;
        spec.dbscan = DbscanParams{1.0, 3};
      }
      std::string why;
      try {
        spec = resolve_cluster_params(spec, ds, seed);
        why = partition_violation(ds, make_folds(ds, spec), k, kind);
      } catch (const std::exception& e) {
        why = std::string("threw: ") + e.what();
      }
      ++checks;
      if (!why.empty()) {
        ++failures[to_string(kind)];
        if (first_failure.empty())
          first_failure = std::string(to_string(kind)) + " trial " + std::to_string(t) + ": " + why;
      }
    }
  }
  Outcome o;
  o.limit_seconds = 60.0;
  o.pass = failures.empty();
  o.detail = std::to_string(kTrials) + " trials x " + std::to_string(std::size(kAllSplitterKinds)) + " kinds, " +
             std::to_string(checks) + " partitions checked";
  if (!o.pass) o.detail += "; first failure: " + first_failure;
  return o;
}

// ---------------------------------------------------------------- 3

Outcome algorithm_oracles() {
  constexpr int kTrials = 200;
  Rng rng(777);
  int mismatch = 0;
  std::string first;
  for (int t = 0; t < kTrials; ++t) {
    const std::size_t d = 1 + rng.uniform_index(3);
    const Dataset ds = oracle::random_dataset(rng, 6, 12, 2, 3, d);
    const int k = 2 + static_cast<int>(rng.uniform_index(2));
    const int kc = 1 + static_cast<int>(rng.uniform_index(4));
    const std::uint64_t seed = rng.next();
    const std::pair<const char*, bool> cases[] = {
        {"scbcv", split_scbcv(ds, k, kc, seed, false).fold_of == oracle::scbcv(ds, k, kc, seed, false)},
        {"scbcv_mini", split_scbcv(ds, k, kc, seed, true).fold_of == oracle::scbcv(ds, k, kc, seed, true)},
        {"dbscv", split_dbscv(ds, k, seed).fold_of == oracle::dbscv(ds, k, seed)},
        {"dobscv", split_dobscv(ds, k, seed).fold_of == oracle::dobscv(ds, k, seed)},
    };
    for (const auto& [name, ok] : cases)
      if (!ok) {
        ++mismatch;
        if (first.empty()) first = std::string(name) + " trial " + std::to_string(t);
      }
  }
  Outcome o;
  o.limit_seconds = 30.0;
  o.pass = mismatch == 0;
  o.detail = std::to_string(kTrials) + " trials (n<=12), scbcv/scbcv_mini/dbscv/dobscv fold-by-fold";
  if (!o.pass) o.detail += "; " + std::to_string(mismatch) + " mismatches, first " + first;
  return o;
}

// ---------------------------------------------------------------- 4

Outcome clustering_oracles() {
  Rng rng(4242);
  int km_bad = 0, db_bad = 0, ag_bad = 0;
  // k-means: k groups around well separated centres, so a correct Lloyd
  // implementation started from k-means++ seeds lands on the global optimum.
  for (int t = 0; t < 50; ++t) {
    const int k = 2 + static_cast<int>(rng.uniform_index(2));
    const std::size_t n = static_cast<std::size_t>(k) + 1 + rng.uniform_index(10 - static_cast<std::size_t>(k));
    Matrix centres(static_cast<std::size_t>(k), 2);
    for (int c = 0; c < k; ++c) {
      const double angle = 2.0 * M_PI * c / k + rng.uniform01();
      centres(static_cast<std::size_t>(c), 0) = 12.0 * std::cos(angle);
      centres(static_cast<std::size_t>(c), 1) = 12.0 * std::sin(angle);
    }
    Matrix X(n, 2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < 2; ++j) X(i, j) = centres(i % static_cast<std::size_t>(k), j) + rng.normal();
    KMeansConfig cfg;
    cfg.k = k;
    cfg.seed = rng.next();
    const double got = inertia(X, kmeans_fit(X, cfg));
    const double best = oracle::best_partition_inertia(X, k);
    if (std::abs(got - best) > 1e-9 * std::max(1.0, best)) ++km_bad;
  }
  // Unstructured data, reported only: Lloyd may stop in a local optimum there.
  int km_free_hits = 0;
  for (int t = 0; t < 50; ++t) {
    const int k = 2 + static_cast<int>(rng.uniform_index(2));
    const std::size_t n = static_cast<std::size_t>(k) + 1 + rng.uniform_index(10 - static_cast<std::size_t>(k));
    Matrix X(n, 2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < 2; ++j) X(i, j) = rng.normal();
    KMeansConfig cfg;
    cfg.k = k;
    cfg.seed = rng.next();
    const double best = oracle::best_partition_inertia(X, k);
    if (std::abs(inertia(X, kmeans_fit(X, cfg)) - best) <= 1e-9 * std::max(1.0, best)) ++km_free_hits;
  }
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.uniform_index(19);
    Matrix X(n, 2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < 2; ++j) X(i, j) = rng.normal();
    const double eps = 0.2 + rng.uniform01();
    const int ms = 2 + static_cast<int>(rng.uniform_index(4));
    if (dbscan_fit(X, {eps, ms}).assignment != oracle::dbscan(X, eps, ms)) ++db_bad;
  }
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.uniform_index(7);
    Matrix X(n, 2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < 2; ++j) X(i, j) = rng.normal();
    const std::size_t c = 1 + rng.uniform_index(n);
    if (!oracle::same_partition(agglomerative_fit(X, c).assignment, oracle::average_linkage(X, c))) ++ag_bad;
  }
  Outcome o;
  o.limit_seconds = 60.0;
  o.pass = km_bad == 0 && db_bad == 0 && ag_bad == 0;
  o.detail = "kmeans " + std::to_string(50 - km_bad) + "/50 optimal (unstructured data: " +
             std::to_string(km_free_hits) + "/50), dbscan " + std::to_string(50 - db_bad) + "/50, average linkage " +
             std::to_string(50 - ag_bad) + "/50";
  return o;
}

// ---------------------------------------------------------------- 5

Outcome oracle_null_test() {
  ExperimentConfig cfg;
  cfg.datasets = {source_path("data/blobs_balanced.tsv"), source_path("data/blobs_imbalanced.tsv")};
  for (const char* kind : {"scbcv", "scbcv_mini", "kcbcv", "kcbcv_mini", "acbcv", "dbscanbcv"}) {
    SplitterSpec s;
    s.kind = splitter_kind_from_string(kind);
    cfg.splitters.push_back(s);
  }
  cfg.learners = {LearnerSpec{LearnerKind::Oracle, {}, 0, ""}};
  cfg.fold_counts = {2, 10};
  cfg.holdout_reps = 5;
  cfg.cv_reps = 5;
  cfg.master_seed = 99;
  cfg.workers = 2;
  RunOptions opt;
  opt.results_dir = scratch("null").string();
  g_run_dirs.push_back(opt.results_dir);
  const RunResult res = run_experiment(cfg, opt);
  double worst_bias = 0.0, worst_std = 0.0;
  for (const auto& r : res.records) {
    worst_bias = std::max(worst_bias, std::abs(r.bias));
    worst_std = std::max(worst_std, std::abs(r.std));
  }
  Outcome o;
  o.limit_seconds = 30.0;
  o.pass = res.failed_cells == 0 && res.records.size() == 24 && worst_bias <= 1e-12 && worst_std <= 1e-12;
  o.detail = std::to_string(res.records.size()) + " records (2 datasets x 6 splitters x k in {2,10}), " +
             std::to_string(res.failed_cells) + " failed, max |bias| " + fmt("%.3g", worst_bias) + ", max std " +
             fmt("%.3g", worst_std);
  for (const auto& c : res.cells)
    if (c.status == "failed") {
      o.detail += "; " + c.key + ": " + c.error;
      break;
    }
  return o;
}

// ---------------------------------------------------------------- 7

Outcome friedman_check() {
  Rng rng(31337);
  double worst = 0.0;
  int exact_used = 0;
  for (int t = 0; t < 20; ++t) {
    BlockTable table;
    table.treatments = {"a", "b", "c"};
    const bool ties = t % 2 == 1;
    for (int b = 0; b < 5; ++b) {
      table.blocks.push_back("b" + std::to_string(b));
      std::vector<double> row(3);
      for (auto& v : row) v = ties ? static_cast<double>(rng.uniform_index(3)) : rng.uniform01() + 0.3 * b;
      table.values.push_back(row);
    }
    if (ties) {
      bool all_flat = true;
      for (const auto& row : table.values) all_flat &= row[0] == row[1] && row[1] == row[2];
      if (all_flat) table.values[0] = {0, 1, 2};
    }
    const auto r = friedman_test(table);
    exact_used += r.exact;
    worst = std::max(worst, std::abs(r.p_value - oracle::friedman_permutation_p(table.values)));
  }
  BlockTable flat{{"b0", "b1", "b2", "b3", "b4"},
                  {"a", "b", "c"},
                  {{0.1, 0.1, 0.1}, {0.5, 0.5, 0.5}, {-2, -2, -2}, {7, 7, 7}, {0, 0, 0}}};
  const auto f = friedman_test(flat);
  const auto f_chi = friedman_test(flat, PValueMethod::ChiSquare);
  Outcome o;
  o.limit_seconds = 60.0;
  o.pass = worst <= 0.02 && f.p_value == 1.0 && f_chi.p_value == 1.0;
  o.detail = "20 tables 5x3 (" + std::to_string(exact_used) + " exact), max |p - p_perm| " + fmt("%.3g", worst) +
             "; identical rows p=" + fmt("%.17g", f.p_value) + " (chi-square path " + fmt("%.17g", f_chi.p_value) +
             ")";
  return o;
}

// ---------------------------------------------------------------- 8

// records.jsonl lines with the timing fields removed, in file order.
std::vector<std::string> non_timing_lines(const fs::path& dir) {
  std::ifstream in(dir / "records.jsonl");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Json j = Json::parse(line);
    for (const char* key : {"wall_seconds", "fold_seconds", "workers"}) j.erase(key);
    out.push_back(j.dump());
  }
  return out;
}

Outcome determinism() {
  const ExperimentConfig cfg = load_config(source_path("configs/smoke.json"));
  std::vector<std::vector<std::string>> runs;
  std::vector<std::string> labels;
  auto run = [&](const std::string& name, int workers) {
    RunOptions opt;
    opt.results_dir = scratch("smoke_" + name).string();
    opt.workers = workers;
    g_run_dirs.push_back(opt.results_dir);
    run_experiment(cfg, opt);
    runs.push_back(non_timing_lines(opt.results_dir));
    labels.push_back(name);
  };
  run("first", 0);
  run("second", 0);
  run("workers1", 1);
  run("workers3", 3);
  run("workers8", 8);
  bool same = !runs[0].empty();
  std::string diff;
  for (std::size_t i = 1; i < runs.size(); ++i)
    if (runs[i] != runs[0]) {
      same = false;
      if (diff.empty()) diff = labels[i];
    }
  Outcome o;
  o.pass = same;
  o.detail = "smoke config x5 (2 repeats at configured workers, then 1, 3, 8 workers), " +
             std::to_string(runs[0].size()) + " records each";
  if (!same) o.detail += "; differs: " + diff;
  return o;
}

// ---------------------------------------------------------------- 9, 10

fs::path g_desk_dir;

Outcome desk_trend() {
  const ExperimentConfig cfg = load_config(source_path("configs/desk.json"));
  RunOptions opt;
  opt.results_dir = scratch("desk").string();
  g_desk_dir = opt.results_dir;
  g_run_dirs.push_back(opt.results_dir);
  const auto t0 = Clock::now();
  const RunResult res = run_experiment(cfg, opt);
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();

  std::map<std::string, std::pair<double, int>> imb;
  for (const auto& r : res.records)
    if (r.balance == "imbalanced") {
      imb[r.splitter].first += std::abs(r.bias);
      imb[r.splitter].second += 1;
    }
  double best = std::numeric_limits<double>::infinity();
  std::string best_name;
  std::string table;
  for (const auto& [name, acc] : imb) {
    const double m = acc.first / acc.second;
    if (m < best) {
      best = m;
      best_name = name;
    }
    table += " " + name + "=" + fmt("%.4f", m);
  }
  const double scv = imb.contains("scv") ? imb["scv"].first / imb["scv"].second : -1.0;
  Outcome o;
  o.limit_seconds = 900.0;
  o.pass = res.failed_cells == 0 && scv >= 0 && scv <= 2.0 * best;
  o.detail = std::to_string(res.records.size()) + " records in " + fmt("%.1f", secs) +
             " s; imbalanced mean |bias|:" + table + "; scv/best(" + best_name + ")=" + fmt("%.3f", scv / best);
  return o;
}

Outcome timing_summary() {
  Outcome o;
  if (g_desk_dir.empty()) {
    o.detail = "no desk-scale run to summarize";
    return o;
  }
  const fs::path out = scratch("desk_analysis");
  const AnalysisResult a = analyze_results_dir(g_desk_dir.string(), out.string());
  bool positive = !a.timing.empty();
  bool ranked = true;
  std::set<std::string> kmeans_reported;
  std::string table;
  std::map<int, std::size_t> rows_per_k;
  for (const auto& t : a.timing) ++rows_per_k[t.k_splits];
  for (const auto& t : a.timing) {
    positive &= t.n_runs > 0 && t.total_seconds > 0.0 && t.mean_seconds > 0.0;
    const bool km = t.splitter_kind == "scbcv" || t.splitter_kind == "scbcv_mini" || t.splitter_kind == "kcbcv" ||
                    t.splitter_kind == "kcbcv_mini";
    if (km != t.kmeans_based) ranked = false;
    if (t.rank < 1 || static_cast<std::size_t>(t.rank) > rows_per_k[t.k_splits]) ranked = false;
    if (km) kmeans_reported.insert(t.splitter);
    table += " k=" + std::to_string(t.k_splits) + ":" + t.splitter + "#" + std::to_string(t.rank) + "(" +
             fmt("%.4f", t.mean_seconds) + "s)";
  }
  for (const auto& r : read_records((g_desk_dir / "records.jsonl").string()))
    for (double s : r.wall_seconds) positive &= s > 0.0;
  o.pass = positive && ranked && kmeans_reported.size() >= 2 && fs::exists(out / "timing.csv");
  o.detail = std::to_string(a.timing.size()) + " timing rows, " + std::to_string(kmeans_reported.size()) +
             " k-means-based splitters ranked:" + table;
  return o;
}

// ---------------------------------------------------------------- 6

Outcome record_audit() {
  std::size_t n = 0;
  double worst = 0.0;
  bool ok = !g_run_dirs.empty();
  for (const auto& dir : g_run_dirs) {
    std::ifstream in(dir / "records.jsonl");
    if (!in) {
      ok = false;
      continue;
    }
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const Json j = Json::parse(line);
      const auto est = j.at("cv_estimates").get<std::vector<double>>();
      if (est.size() < 2) {
        ok = false;
        continue;
      }
      double mean = 0.0;
      for (double e : est) mean += e;
      mean /= static_cast<double>(est.size());
      double ss = 0.0;
      for (double e : est) ss += (e - mean) * (e - mean);
      const double sd = std::sqrt(ss / static_cast<double>(est.size() - 1));
      const double bias = mean - j.at("true_perf").get<double>();
      worst = std::max({worst, std::abs(mean - j.at("cv_mean").get<double>()),
                        std::abs(bias - j.at("bias").get<double>()), std::abs(sd - j.at("std").get<double>())});
      ++n;
    }
  }
  Outcome o;
  o.pass = ok && n > 0 && worst <= 1e-12;
  o.detail = std::to_string(n) + " persisted records from " + std::to_string(g_run_dirs.size()) +
             " runs, max deviation " + fmt("%.3g", worst);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> check;
  };
  // The audit runs last so it sees the records of every earlier run.
  const std::vector<Criterion> criteria = {
      {1, "imbalance index values", imbalance_values},
      {2, "splitter partition properties", partition_suite},
      {3, "splitter step-by-step equivalence", algorithm_oracles},
      {4, "clustering oracles", clustering_oracles},
      {5, "oracle-learner null test", oracle_null_test},
      {7, "Friedman test against permutation", friedman_check},
      {8, "determinism", determinism},
      {9, "desk-scale trend", desk_trend},
      {10, "timing summary", timing_summary},
      {6, "stored summaries audit", record_audit},
  };
  std::map<int, std::string> lines;
  bool all = true;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (o.limit_seconds > 0 && secs >= o.limit_seconds) {
      o.pass = false;
      o.detail += "; exceeded " + fmt("%.0f", o.limit_seconds) + " s";
    }
    all &= o.pass;
    char head[160];
    std::snprintf(head, sizeof head, "criterion %2d %s [%.2f s] %s: ", c.id, o.pass ? "PASS" : "FAIL", secs, c.name);
    lines[c.id] = head + o.detail;
    std::fflush(stdout);
  }
  for (const auto& [_, line] : lines) std::printf("%s\n", line.c_str());
  std::printf("%s\n", all ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
  return all ? 0 : 1;
}
