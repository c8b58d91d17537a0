#include "cbcv/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "cbcv/io.hpp"

namespace cbcv {

namespace fs = std::filesystem;

void validate(const ExperimentConfig& cfg) {
  require(!cfg.datasets.empty(), "config: no datasets");
  require(!cfg.splitters.empty(), "config: no splitters");
  require(!cfg.learners.empty(), "config: no learners");
  require(!cfg.fold_counts.empty(), "config: no fold counts");
  for (int k : cfg.fold_counts) require(k >= 2, "config: fold counts must be at least 2");
  require(cfg.holdout_reps >= 2, "config: holdout_reps must be at least 2");
  require(cfg.cv_reps >= 2, "config: cv_reps must be at least 2");
  require(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0, "config: train_fraction must be in (0, 1)");
  require(cfg.workers >= 1, "config: workers must be positive");
  for (const auto& l : cfg.learners) validate(l);
  std::set<std::string> ids;
  for (const auto& s : cfg.splitters)
    require(ids.insert(s.id()).second, "config: duplicate splitter id '" + s.id() + "'");
  ids.clear();
  for (const auto& l : cfg.learners)
    require(ids.insert(l.id()).second, "config: duplicate learner id '" + l.id() + "'");
}

LearnerSpec learner_for(const ExperimentConfig& cfg, const std::string& dataset, const LearnerSpec& base) {
  if (const auto ds = cfg.tuned.find(dataset); ds != cfg.tuned.end())
    if (const auto it = ds->second.find(base.id()); it != ds->second.end()) {
      LearnerSpec out = it->second;
      out.label = base.label;
      return out;
    }
  return base;
}

MetricKind default_metric(const Dataset& ds) {
  return classify_balance(ds) == BalanceClass::Balanced ? MetricKind::Accuracy : MetricKind::F1;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double fit_and_score(const Dataset& ds, std::span<const std::size_t> train_rows, std::span<const std::size_t> test_rows,
                     const LearnerSpec& learner, const EvalContext& ctx) {
  const Dataset train_part = ds.subset(train_rows);
  const Dataset test_part = ds.subset(test_rows);
  const auto model = train(learner, train_part.features, train_part.labels, ds.n_classes(), ctx.reference);
  const auto pred = predict(model, test_part.features);
  return score(ctx.metric, confusion(test_part.labels, pred, ds.n_classes()), ctx.f1_average);
}

LearnerSpec reseeded(const LearnerSpec& l, std::uint64_t salt) {
  LearnerSpec out = l;
  out.seed = derive_seed(l.seed, salt);
  return out;
}

}  // namespace

double estimate_true_performance(const Dataset& ds, const LearnerSpec& learner, int reps, double train_fraction,
                                 std::uint64_t seed, const EvalContext& ctx) {
  require(reps >= 1, "estimate_true_performance: reps must be positive");
  double total = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto rep = static_cast<std::uint64_t>(r);
    const auto split = stratified_holdout_split(ds, train_fraction, derive_seed(seed, rep));
    total += fit_and_score(ds, split.train, split.test, reseeded(learner, rep), ctx);
  }
  return total / static_cast<double>(reps);
}

CvRun run_cv_once(const Dataset& ds, const LearnerSpec& learner, const SplitterSpec& splitter,
                  const EvalContext& ctx) {
  CvRun run;
  const auto t0 = Clock::now();
  const FoldAssignment folds = make_folds(ds, splitter);
  const auto pairs = materialize_folds(folds);
  double total = 0.0;
  for (const auto& pair : pairs) {
    const auto tf = Clock::now();
    total += fit_and_score(ds, pair.train, pair.test, learner, ctx);
    run.fold_seconds += seconds_since(tf);
  }
  run.score = total / static_cast<double>(pairs.size());
  run.seconds = seconds_since(t0);
  return run;
}

double mean_of(std::span<const double> v) {
  require(!v.empty(), "mean_of: empty input");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  require(v.size() >= 2, "sample_std: need at least two values");
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

CvEstimate expected_cv_estimate(const Dataset& ds, const LearnerSpec& learner, const SplitterSpec& splitter,
                                int cv_reps, double train_fraction, std::uint64_t seed, const EvalContext& ctx) {
  require(cv_reps >= 2, "expected_cv_estimate: cv_reps must be at least 2");
  CvEstimate est;
  for (int i = 0; i < cv_reps; ++i) {
    const auto rep = static_cast<std::uint64_t>(i);
    const Subsample sub = stratified_subsample(ds, {train_fraction, true, seed + rep});
    SplitterSpec s = splitter;
    s.seed = derive_seed(splitter.seed, rep);
    const CvRun run = run_cv_once(sub.data, reseeded(learner, rep), s, ctx);
    est.estimates.push_back(run.score);
    est.wall_seconds.push_back(run.seconds);
    est.fold_seconds.push_back(run.fold_seconds);
  }
  est.mean = mean_of(est.estimates);
  est.std = sample_std(est.estimates);
  return est;
}

std::string cell_key(const std::string& dataset, const std::string& learner, const std::string& splitter, int k) {
  return dataset + "|" + learner + "|" + splitter + "|k=" + std::to_string(k);
}

std::string EvalRecord::key() const { return cell_key(dataset, learner, splitter, k_splits); }

namespace {

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body) {
  if (count == 0) return;
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), count);
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) body(i);
    });
}

struct DatasetSlot {
  std::string path;
  std::string name;
  std::optional<Dataset> data;
  std::string load_error;
  std::optional<int> k_clusters;
  std::string k_clusters_error;
  std::optional<DbscanParams> dbscan;
  std::string dbscan_error;
};

struct Cell {
  std::size_t dataset;
  std::size_t learner;
  std::size_t splitter;
  int k;
  CellStatus status;
};

std::string describe(const std::exception& e) { return e.what(); }

Json manifest_json(const ExperimentConfig& cfg, const std::vector<Cell>& cells, const std::string& started,
                   const std::string& finished) {
  Json j;
  j["schema_version"] = kRecordSchemaVersion;
  j["tool"] = "cbcv";
  j["tool_version"] = CBCV_VERSION;
  j["config"] = to_json(cfg);
  j["started_at"] = started;
  j["finished_at"] = finished;
  Json list = Json::array();
  for (const auto& c : cells) {
    Json e;
    e["key"] = c.status.key;
    e["dataset"] = c.status.dataset;
    e["learner"] = c.status.learner;
    e["splitter"] = c.status.splitter;
    e["k_splits"] = c.status.k_splits;
    e["status"] = c.status.status;
    if (!c.status.error.empty()) e["error"] = c.status.error;
    list.push_back(std::move(e));
  }
  j["cells"] = std::move(list);
  return j;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  validate(cfg);
  int workers = options.workers > 0 ? options.workers : cfg.workers;
  if (cfg.timing_run) workers = 1;
  const std::string started = utc_now();

  std::vector<DatasetSlot> datasets;
  for (const auto& path : cfg.datasets) {
    DatasetSlot slot;
    slot.path = path;
    slot.name = dataset_name_from_path(path);
    datasets.push_back(std::move(slot));
  }
  {
    std::set<std::string> names;
    for (const auto& d : datasets) require(names.insert(d.name).second, "config: duplicate dataset name '" + d.name + "'");
  }

  std::vector<Cell> cells;
  for (std::size_t d = 0; d < datasets.size(); ++d)
    for (std::size_t l = 0; l < cfg.learners.size(); ++l)
      for (std::size_t s = 0; s < cfg.splitters.size(); ++s)
        for (int k : cfg.fold_counts) {
          Cell c{d, l, s, k, {}};
          c.status = {cell_key(datasets[d].name, cfg.learners[l].id(), cfg.splitters[s].id(), k),
                      datasets[d].name, cfg.learners[l].id(), cfg.splitters[s].id(), k, "pending", {}};
          cells.push_back(std::move(c));
        }

  // Records already on disk (resume) or produced by this run, by key.
  std::map<std::string, EvalRecord> done;
  fs::path records_path;
  std::ofstream records_out;
  std::mutex out_mutex;
  if (!options.results_dir.empty()) {
    fs::create_directories(options.results_dir);
    records_path = fs::path(options.results_dir) / "records.jsonl";
    if (options.resume && fs::exists(records_path))
      for (auto& r : read_records(records_path.string())) done.emplace(r.key(), std::move(r));
    // Rewrite what survived so a truncated tail line does not linger.
    std::vector<EvalRecord> kept;
    for (const auto& c : cells)
      if (auto it = done.find(c.status.key); it != done.end()) kept.push_back(it->second);
    write_records(kept, records_path.string());
    records_out.open(records_path, std::ios::app);
    if (!records_out) fail(ErrorKind::Io, "cannot write '" + records_path.string() + "'");
  }

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (done.contains(cells[i].status.key))
      cells[i].status.status = "done";
    else
      pending.push_back(i);
  }

  // Datasets and per-dataset clustering hyperparameters, only where needed.
  std::vector<bool> needs_dataset(datasets.size(), false);
  for (std::size_t i : pending) needs_dataset[cells[i].dataset] = true;
  parallel_for(datasets.size(), workers, [&](std::size_t d) {
    if (!needs_dataset[d]) return;
    DatasetSlot& slot = datasets[d];
    try {
      Dataset ds = load_dataset(slot.path, cfg.load);
      validate(ds);
      slot.data = cfg.standardize ? standardize(ds) : std::move(ds);
    } catch (const std::exception& e) {
      slot.load_error = describe(e);
      return;
    }
    bool want_k = false;
    bool want_dbscan = false;
    for (const auto& s : cfg.splitters) {
      if (!is_cluster_based(s.kind)) continue;
      if (s.kind == SplitterKind::DbscanBcv)
        want_dbscan = want_dbscan || !s.dbscan;
      else
        want_k = want_k || !s.k_clusters;
    }
    if (want_k) try {
        slot.k_clusters = estimate_cluster_count(*slot.data, derive_seed(cfg.master_seed, "clusters|" + slot.name),
                                                 cfg.cluster_count);
      } catch (const std::exception& e) {
        slot.k_clusters_error = describe(e);
      }
    if (want_dbscan) try {
        slot.dbscan = estimate_dbscan_params(*slot.data);
      } catch (const std::exception& e) {
        slot.dbscan_error = describe(e);
      }
  });

  // True performance once per (dataset, learner) with pending cells.
  struct TruePerf {
    std::optional<double> value;
    std::string error;
  };
  std::map<std::pair<std::size_t, std::size_t>, TruePerf> true_perf;
  for (std::size_t i : pending) true_perf[{cells[i].dataset, cells[i].learner}];
  std::vector<std::pair<std::size_t, std::size_t>> tp_keys;
  for (const auto& [key, _] : true_perf) tp_keys.push_back(key);

  auto context_for = [&](const Dataset& ds) {
    EvalContext ctx;
    ctx.metric = cfg.metric_override.value_or(default_metric(ds));
    ctx.f1_average = cfg.f1_average;
    ctx.reference = &ds;
    return ctx;
  };
  auto learner_spec = [&](std::size_t d, std::size_t l) {
    LearnerSpec spec = learner_for(cfg, datasets[d].name, cfg.learners[l]);
    spec.seed = derive_seed(cfg.master_seed, "learner|" + datasets[d].name + "|" + cfg.learners[l].id());
    return spec;
  };

  parallel_for(tp_keys.size(), workers, [&](std::size_t t) {
    const auto [d, l] = tp_keys[t];
    TruePerf& slot = true_perf[tp_keys[t]];
    if (!datasets[d].data) return;
    const Dataset& ds = *datasets[d].data;
    try {
      slot.value = estimate_true_performance(
          ds, learner_spec(d, l), cfg.holdout_reps, cfg.train_fraction,
          derive_seed(cfg.master_seed, "holdout|" + datasets[d].name + "|" + cfg.learners[l].id()), context_for(ds));
    } catch (const std::exception& e) {
      slot.error = describe(e);
    }
  });

  std::atomic<std::size_t> failed{0};
  parallel_for(pending.size(), workers, [&](std::size_t p) {
    Cell& cell = cells[pending[p]];
    const DatasetSlot& slot = datasets[cell.dataset];
    try {
      if (!slot.data) fail(ErrorKind::Data, "dataset unavailable: " + slot.load_error);
      const Dataset& ds = *slot.data;
      const TruePerf& tp = true_perf.at({cell.dataset, cell.learner});
      if (!tp.value) fail(ErrorKind::Data, "true performance unavailable: " + tp.error);

      SplitterSpec splitter = cfg.splitters[cell.splitter];
      splitter.k_splits = cell.k;
      splitter.seed = derive_seed(cfg.master_seed, "split|" + cell.status.key);
      if (is_cluster_based(splitter.kind)) {
        if (splitter.kind == SplitterKind::DbscanBcv && !splitter.dbscan) {
          if (!slot.dbscan) fail(ErrorKind::Data, "DBSCAN parameter estimation failed: " + slot.dbscan_error);
          splitter.dbscan = slot.dbscan;
        } else if (splitter.kind != SplitterKind::DbscanBcv && !splitter.k_clusters) {
          if (!slot.k_clusters) fail(ErrorKind::Data, "cluster count estimation failed: " + slot.k_clusters_error);
          splitter.k_clusters = slot.k_clusters;
        }
      }

      const LearnerSpec learner = learner_spec(cell.dataset, cell.learner);
      const EvalContext ctx = context_for(ds);
      const CvEstimate est = expected_cv_estimate(ds, learner, splitter, cfg.cv_reps, cfg.train_fraction,
                                                  derive_seed(cfg.master_seed, "cv|" + slot.name), ctx);

      EvalRecord r;
      r.dataset = slot.name;
      r.learner = cell.status.learner;
      r.splitter = cell.status.splitter;
      r.splitter_kind = to_string(splitter.kind);
      r.k_splits = cell.k;
      r.imbalance = imbalance_index(ds);
      r.balance = to_string(classify_balance(r.imbalance));
      r.metric = ctx.metric;
      r.cv_estimates = est.estimates;
      r.cv_mean = est.mean;
      r.true_perf = *tp.value;
      r.bias = r.cv_mean - r.true_perf;
      r.std = est.std;
      r.wall_seconds = est.wall_seconds;
      r.fold_seconds = est.fold_seconds;
      r.learner_params = learner.hyperparams;
      if (splitter.k_clusters && splitter.kind != SplitterKind::DbscanBcv && is_cluster_based(splitter.kind))
        r.splitter_params["k_clusters"] = *splitter.k_clusters;
      if (splitter.dbscan && splitter.kind == SplitterKind::DbscanBcv) {
        r.splitter_params["epsilon"] = splitter.dbscan->epsilon;
        r.splitter_params["min_samples"] = splitter.dbscan->min_samples;
      }
      r.workers = workers;

      std::lock_guard lock(out_mutex);
      if (records_out.is_open()) {
        records_out << to_json(r).dump() << '\n';
        records_out.flush();
      }
      cell.status.status = "done";
      done.emplace(r.key(), std::move(r));
    } catch (const std::exception& e) {
      std::lock_guard lock(out_mutex);
      cell.status.status = "failed";
      cell.status.error = describe(e);
      ++failed;
    }
    if (options.on_cell_done) {
      std::lock_guard lock(out_mutex);
      options.on_cell_done(cell.status);
    }
  });

  RunResult result;
  result.executed_cells = pending.size();
  result.failed_cells = failed;
  for (const auto& c : cells) {
    result.cells.push_back(c.status);
    if (auto it = done.find(c.status.key); it != done.end()) result.records.push_back(it->second);
  }

  if (!options.results_dir.empty()) {
    records_out.close();
    write_records(result.records, records_path.string());
    const fs::path manifest = fs::path(options.results_dir) / "manifest.json";
    write_text_file(manifest.string(), manifest_json(cfg, cells, started, utc_now()).dump(2) + "\n");
  }
  return result;
}

TuneResult tune_learners(const ExperimentConfig& cfg, int workers) {
  validate(cfg);
  if (workers <= 0) workers = cfg.workers;
  struct Job {
    std::size_t dataset;
    std::size_t learner;
    std::optional<TunedEntry> entry;
    std::string error;
  };
  std::vector<std::optional<Dataset>> data(cfg.datasets.size());
  std::vector<std::string> load_errors(cfg.datasets.size());
  parallel_for(cfg.datasets.size(), workers, [&](std::size_t d) {
    try {
      Dataset ds = load_dataset(cfg.datasets[d], cfg.load);
      data[d] = cfg.standardize ? standardize(ds) : std::move(ds);
    } catch (const std::exception& e) {
      load_errors[d] = describe(e);
    }
  });

  std::vector<Job> jobs;
  for (std::size_t d = 0; d < cfg.datasets.size(); ++d)
    for (std::size_t l = 0; l < cfg.learners.size(); ++l) jobs.push_back({d, l, {}, {}});

  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    Job& job = jobs[i];
    const LearnerSpec& base = cfg.learners[job.learner];
    const std::string name = dataset_name_from_path(cfg.datasets[job.dataset]);
    try {
      if (!data[job.dataset]) fail(ErrorKind::Data, load_errors[job.dataset]);
      const auto g = cfg.grids.find(base.kind);
      const Grid grid = g != cfg.grids.end() ? g->second : default_grid(base.kind);
      auto found = grid_search(*data[job.dataset], base.kind, grid,
                               derive_seed(cfg.master_seed, "tune|" + name + "|" + base.id()));
      found.best.label = base.label;
      found.best.seed = 0;
      double best = 0.0;
      for (const auto& [params, sc] : found.scores)
        if (params == found.best.hyperparams) best = sc;
      job.entry = TunedEntry{name, found.best, best};
    } catch (const std::exception& e) {
      job.error = name + " / " + base.id() + ": " + describe(e);
    }
  });

  TuneResult out;
  for (auto& job : jobs) {
    if (job.entry)
      out.entries.push_back(std::move(*job.entry));
    else
      out.errors.push_back(std::move(job.error));
  }
  return out;
}

}  // namespace cbcv
