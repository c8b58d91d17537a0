#include "cbcv/cbcv.h"

#include <cstring>
#include <fstream>
#include <string>

#include "cbcv/analysis.hpp"
#include "cbcv/harness.hpp"
#include "cbcv/io.hpp"
#include "cbcv/synth.hpp"

struct cbcv_dataset {
  cbcv::Dataset ds;
};

struct cbcv_folds {
  cbcv::FoldAssignment fa;
};

struct cbcv_config {
  cbcv::ExperimentConfig cfg;
};

namespace {

thread_local std::string g_last_error;

cbcv_status code_for(cbcv::ErrorKind kind) {
  switch (kind) {
    case cbcv::ErrorKind::InvalidArgument: return CBCV_INVALID_ARGUMENT;
    case cbcv::ErrorKind::Io: return CBCV_IO_ERROR;
    case cbcv::ErrorKind::Parse: return CBCV_PARSE_ERROR;
    case cbcv::ErrorKind::Data: return CBCV_DATA_ERROR;
    case cbcv::ErrorKind::Internal: return CBCV_INTERNAL_ERROR;
  }
  return CBCV_INTERNAL_ERROR;
}

template <class F>
cbcv_status guarded(F&& body) {
  g_last_error.clear();
  try {
    return body();
  } catch (const cbcv::Error& e) {
    g_last_error = e.what();
    return code_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return CBCV_PARSE_ERROR;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CBCV_INTERNAL_ERROR;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CBCV_INTERNAL_ERROR;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void need(const void* p, const char* what) {
  if (!p) cbcv::fail(cbcv::ErrorKind::InvalidArgument, std::string(what) + " is NULL");
}

cbcv::Json report(const cbcv::Dataset& raw, std::uint64_t seed) {
  using cbcv::Json;
  const cbcv::Dataset ds = cbcv::standardize(raw);
  const auto dist = cbcv::class_distribution(ds);
  Json j;
  j["name"] = ds.name;
  j["n_instances"] = ds.n_instances();
  j["n_features"] = ds.n_features();
  j["n_classes"] = ds.n_classes();
  j["rejected_rows"] = raw.rejected_rows;
  Json classes = Json::array();
  for (int c = 0; c < ds.n_classes(); ++c)
    classes.push_back({{"label", ds.class_names[c]},
                       {"count", dist.counts[c]},
                       {"proportion", dist.proportions[c]}});
  j["classes"] = std::move(classes);
  j["imbalance"] = cbcv::imbalance_index(dist);
  j["balance"] = cbcv::to_string(cbcv::classify_balance(j["imbalance"].get<double>()));
  try {
    j["clusters"] = cbcv::estimate_cluster_count(ds, seed);
  } catch (const cbcv::Error& e) {
    j["clusters"] = nullptr;
    j["clusters_error"] = e.what();
  }
  try {
    const auto p = cbcv::estimate_dbscan_params(ds);
    j["dbscan"] = {{"epsilon", p.epsilon}, {"min_samples", p.min_samples}};
  } catch (const cbcv::Error& e) {
    j["dbscan"] = nullptr;
    j["dbscan_error"] = e.what();
  }
  return j;
}

}  // namespace

extern "C" {

const char* cbcv_version(void) { return CBCV_VERSION; }

const char* cbcv_last_error(void) { return g_last_error.c_str(); }

const char* cbcv_status_name(cbcv_status status) {
  switch (status) {
    case CBCV_OK: return "ok";
    case CBCV_INVALID_ARGUMENT: return "invalid argument";
    case CBCV_IO_ERROR: return "i/o error";
    case CBCV_PARSE_ERROR: return "parse error";
    case CBCV_DATA_ERROR: return "data error";
    case CBCV_INTERNAL_ERROR: return "internal error";
    case CBCV_PARTIAL_FAILURE: return "partial failure";
  }
  return "unknown status";
}

void cbcv_string_free(char* s) { std::free(s); }

cbcv_status cbcv_dataset_load(const char* path, const char* label_column, char delimiter, cbcv_dataset** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    cbcv::LoadOptions opt;
    if (label_column) opt.label_column = label_column;
    if (delimiter) opt.delimiter = delimiter;
    *out = new cbcv_dataset{cbcv::load_dataset(path, opt)};
    return CBCV_OK;
  });
}

cbcv_status cbcv_dataset_from_arrays(const char* name, const double* features, size_t n_rows, size_t n_cols,
                                     const int* labels, int n_classes, cbcv_dataset** out) {
  return guarded([&] {
    need(features, "features");
    need(labels, "labels");
    need(out, "out");
    cbcv::Dataset ds;
    ds.name = name ? name : "dataset";
    ds.features = cbcv::Matrix(n_rows, n_cols, std::vector<double>(features, features + n_rows * n_cols));
    ds.labels.assign(labels, labels + n_rows);
    for (int c = 0; c < n_classes; ++c) ds.class_names.push_back(std::to_string(c));
    cbcv::validate(ds);
    *out = new cbcv_dataset{std::move(ds)};
    return CBCV_OK;
  });
}

cbcv_status cbcv_dataset_generate(const char* spec_json, cbcv_dataset** out) {
  return guarded([&] {
    need(spec_json, "spec_json");
    need(out, "out");
    const auto j = cbcv::Json::parse(spec_json);
    if (!j.is_object()) cbcv::fail(cbcv::ErrorKind::Parse, "generator spec must be a JSON object");
    cbcv::BlobSpec spec;
    spec.name = j.value("name", spec.name);
    spec.n_instances = j.value("n_instances", spec.n_instances);
    spec.n_features = j.value("n_features", spec.n_features);
    spec.class_weights = j.value("class_weights", spec.class_weights);
    spec.clusters_per_class = j.value("clusters_per_class", spec.clusters_per_class);
    spec.separation = j.value("separation", spec.separation);
    spec.spread = j.value("spread", spec.spread);
    spec.label_noise = j.value("label_noise", spec.label_noise);
    spec.seed = j.value("seed", spec.seed);
    *out = new cbcv_dataset{cbcv::make_blobs(spec)};
    return CBCV_OK;
  });
}

cbcv_status cbcv_dataset_save(const cbcv_dataset* ds, const char* path) {
  return guarded([&] {
    need(ds, "dataset");
    need(path, "path");
    cbcv::save_dataset(ds->ds, path);
    return CBCV_OK;
  });
}

cbcv_status cbcv_dataset_standardize(const cbcv_dataset* ds, cbcv_dataset** out) {
  return guarded([&] {
    need(ds, "dataset");
    need(out, "out");
    *out = new cbcv_dataset{cbcv::standardize(ds->ds)};
    return CBCV_OK;
  });
}

void cbcv_dataset_free(cbcv_dataset* ds) { delete ds; }

size_t cbcv_dataset_n_instances(const cbcv_dataset* ds) { return ds ? ds->ds.n_instances() : 0; }
size_t cbcv_dataset_n_features(const cbcv_dataset* ds) { return ds ? ds->ds.n_features() : 0; }
int cbcv_dataset_n_classes(const cbcv_dataset* ds) { return ds ? ds->ds.n_classes() : 0; }
size_t cbcv_dataset_rejected_rows(const cbcv_dataset* ds) { return ds ? ds->ds.rejected_rows : 0; }
const char* cbcv_dataset_name(const cbcv_dataset* ds) { return ds ? ds->ds.name.c_str() : ""; }

cbcv_status cbcv_dataset_class_counts(const cbcv_dataset* ds, size_t* counts) {
  return guarded([&] {
    need(ds, "dataset");
    need(counts, "counts");
    const auto dist = cbcv::class_distribution(ds->ds);
    std::copy(dist.counts.begin(), dist.counts.end(), counts);
    return CBCV_OK;
  });
}

double cbcv_dataset_imbalance(const cbcv_dataset* ds) { return ds ? cbcv::imbalance_index(ds->ds) : 0.0; }

int cbcv_dataset_is_imbalanced(const cbcv_dataset* ds) {
  return ds && cbcv::classify_balance(ds->ds) == cbcv::BalanceClass::Imbalanced ? 1 : 0;
}

cbcv_status cbcv_estimate_cluster_count(const cbcv_dataset* ds, uint64_t seed, int* out) {
  return guarded([&] {
    need(ds, "dataset");
    need(out, "out");
    *out = cbcv::estimate_cluster_count(ds->ds, seed);
    return CBCV_OK;
  });
}

cbcv_status cbcv_estimate_dbscan(const cbcv_dataset* ds, double* epsilon, int* min_samples) {
  return guarded([&] {
    need(ds, "dataset");
    need(epsilon, "epsilon");
    need(min_samples, "min_samples");
    const auto p = cbcv::estimate_dbscan_params(ds->ds);
    *epsilon = p.epsilon;
    *min_samples = p.min_samples;
    return CBCV_OK;
  });
}

cbcv_status cbcv_dataset_report_json(const cbcv_dataset* ds, uint64_t seed, char** out) {
  return guarded([&] {
    need(ds, "dataset");
    need(out, "out");
    *out = dup_string(report(ds->ds, seed).dump());
    return CBCV_OK;
  });
}

cbcv_status cbcv_split(const cbcv_dataset* ds, const char* splitter_json, int k_splits, uint64_t seed,
                       cbcv_folds** out) {
  return guarded([&] {
    need(ds, "dataset");
    need(splitter_json, "splitter_json");
    need(out, "out");
    const auto j = cbcv::Json::parse(splitter_json);
    cbcv::SplitterSpec spec = cbcv::splitter_from_json(j);
    spec.k_splits = k_splits;
    spec.seed = seed;
    spec = cbcv::resolve_cluster_params(spec, ds->ds, seed);
    *out = new cbcv_folds{cbcv::make_folds(ds->ds, spec)};
    return CBCV_OK;
  });
}

void cbcv_folds_free(cbcv_folds* folds) { delete folds; }
int cbcv_folds_k(const cbcv_folds* folds) { return folds ? folds->fa.k : 0; }
size_t cbcv_folds_size(const cbcv_folds* folds) { return folds ? folds->fa.fold_of.size() : 0; }
const int* cbcv_folds_assignment(const cbcv_folds* folds) { return folds ? folds->fa.fold_of.data() : nullptr; }

cbcv_status cbcv_config_load(const char* path, cbcv_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new cbcv_config{cbcv::load_config(path)};
    return CBCV_OK;
  });
}

cbcv_status cbcv_config_parse(const char* json, cbcv_config** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    cbcv::Json j;
    try {
      j = cbcv::Json::parse(json);
    } catch (const nlohmann::json::parse_error& e) {
      cbcv::fail(cbcv::ErrorKind::Parse, e.what());
    }
    *out = new cbcv_config{cbcv::config_from_json(j)};
    return CBCV_OK;
  });
}

void cbcv_config_free(cbcv_config* cfg) { delete cfg; }

cbcv_status cbcv_config_set_seed(cbcv_config* cfg, uint64_t seed) {
  return guarded([&] {
    need(cfg, "config");
    cfg->cfg.master_seed = seed;
    return CBCV_OK;
  });
}

cbcv_status cbcv_config_set_workers(cbcv_config* cfg, int workers) {
  return guarded([&] {
    need(cfg, "config");
    cbcv::require(workers >= 1, "workers must be positive");
    cfg->cfg.workers = workers;
    return CBCV_OK;
  });
}

cbcv_status cbcv_config_set_metric(cbcv_config* cfg, const char* metric) {
  return guarded([&] {
    need(cfg, "config");
    if (metric)
      cfg->cfg.metric_override = cbcv::metric_from_string(metric);
    else
      cfg->cfg.metric_override.reset();
    return CBCV_OK;
  });
}

cbcv_status cbcv_config_set_label_column(cbcv_config* cfg, const char* label_column) {
  return guarded([&] {
    need(cfg, "config");
    need(label_column, "label_column");
    cfg->cfg.load.label_column = label_column;
    return CBCV_OK;
  });
}

cbcv_status cbcv_config_apply_tuned(cbcv_config* cfg, const char* tuned_path) {
  return guarded([&] {
    need(cfg, "config");
    need(tuned_path, "tuned_path");
    cbcv::apply_tuned(cfg->cfg, cbcv::tuned_from_json(cbcv::read_json_file(tuned_path)));
    return CBCV_OK;
  });
}

cbcv_status cbcv_config_to_json(const cbcv_config* cfg, char** out) {
  return guarded([&] {
    need(cfg, "config");
    need(out, "out");
    *out = dup_string(cbcv::to_json(cfg->cfg).dump(2));
    return CBCV_OK;
  });
}

cbcv_status cbcv_tune(const cbcv_config* cfg, const char* out_path, char** summary) {
  return guarded([&] {
    need(cfg, "config");
    need(out_path, "out_path");
    const auto result = cbcv::tune_learners(cfg->cfg);
    const cbcv::Json file = cbcv::tuned_to_json(result.entries, cfg->cfg.master_seed);
    cbcv::write_text_file(out_path, file.dump(2) + "\n");
    if (summary) {
      cbcv::Json s = file;
      s["errors"] = result.errors;
      *summary = dup_string(s.dump());
    }
    if (!result.errors.empty()) {
      g_last_error = result.errors.front();
      return result.entries.empty() ? CBCV_DATA_ERROR : CBCV_PARTIAL_FAILURE;
    }
    return CBCV_OK;
  });
}

cbcv_status cbcv_run(const cbcv_config* cfg, const char* results_dir, int resume, cbcv_progress_fn progress,
                     void* user, char** summary) {
  return guarded([&] {
    need(cfg, "config");
    need(results_dir, "results_dir");
    cbcv::RunOptions opt;
    opt.results_dir = results_dir;
    opt.resume = resume != 0;
    if (progress)
      opt.on_cell_done = [&](const cbcv::CellStatus& c) {
        progress(c.key.c_str(), c.status.c_str(), c.error.c_str(), user);
      };
    const auto result = cbcv::run_experiment(cfg->cfg, opt);
    if (summary) {
      cbcv::Json s;
      s["records"] = result.records.size();
      s["cells"] = result.cells.size();
      s["executed_cells"] = result.executed_cells;
      s["failed_cells"] = result.failed_cells;
      cbcv::Json failed = cbcv::Json::array();
      for (const auto& c : result.cells)
        if (c.status == "failed") failed.push_back({{"key", c.key}, {"error", c.error}});
      s["failures"] = std::move(failed);
      *summary = dup_string(s.dump());
    }
    if (result.failed_cells > 0) {
      for (const auto& c : result.cells)
        if (c.status == "failed") {
          g_last_error = c.key + ": " + c.error;
          break;
        }
      return CBCV_PARTIAL_FAILURE;
    }
    return CBCV_OK;
  });
}

cbcv_status cbcv_analyze(const char* results_dir, const char* out_dir, char** summary) {
  return guarded([&] {
    need(results_dir, "results_dir");
    const auto res = cbcv::analyze_results_dir(results_dir, out_dir ? out_dir : "");
    if (summary) {
      using cbcv::Json;
      Json s;
      s["friedman_skipped"] = res.friedman_skipped;
      s["messages"] = res.messages;
      Json fr = Json::array();
      for (const auto& r : res.friedman) {
        Json e{{"balance", r.balance},
               {"k", r.k_splits},
               {"measure", cbcv::to_string(r.measure)},
               {"n_blocks", r.n_blocks},
               {"n_treatments", r.n_treatments}};
        if (r.result) {
          e["statistic"] = r.result->statistic;
          e["p_value"] = r.result->p_value;
          e["exact"] = r.result->exact;
        }
        fr.push_back(std::move(e));
      }
      s["friedman"] = std::move(fr);
      Json wins = Json::array();
      for (const auto& w : res.wins)
        wins.push_back({{"balance", w.balance},
                        {"k", w.k_splits},
                        {"measure", cbcv::to_string(w.measure)},
                        {"splitter", w.splitter},
                        {"wins", w.wins}});
      s["wins"] = std::move(wins);
      Json timing = Json::array();
      for (const auto& t : res.timing)
        timing.push_back({{"splitter", t.splitter},
                          {"splitter_kind", t.splitter_kind},
                          {"k", t.k_splits},
                          {"n_runs", t.n_runs},
                          {"total_seconds", t.total_seconds},
                          {"mean_seconds", t.mean_seconds},
                          {"rank", t.rank},
                          {"kmeans_based", t.kmeans_based}});
      s["timing"] = std::move(timing);
      *summary = dup_string(s.dump());
    }
    return CBCV_OK;
  });
}

}  // extern "C"
