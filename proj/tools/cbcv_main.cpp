// cbcv command-line front end. Talks to the library only through cbcv.h.

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cbcv/cbcv.h"

namespace {

using Json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitPartial = 3;

int exit_code(cbcv_status s) {
  switch (s) {
    case CBCV_OK: return kExitOk;
    case CBCV_INVALID_ARGUMENT: return kExitUsage;
    case CBCV_PARTIAL_FAILURE: return kExitPartial;
    default: return kExitData;
  }
}

int report_failure(cbcv_status s, bool json) {
  if (json)
    std::cout << Json{{"ok", false}, {"status", cbcv_status_name(s)}, {"error", cbcv_last_error()}}.dump() << "\n";
  else
    std::cerr << "cbcv: " << cbcv_status_name(s) << ": " << cbcv_last_error() << "\n";
  return exit_code(s);
}

// Takes ownership of a library-allocated string.
std::string take(char* s) {
  std::string out = s ? s : "";
  cbcv_string_free(s);
  return out;
}

struct DatasetDeleter {
  void operator()(cbcv_dataset* d) const { cbcv_dataset_free(d); }
};
struct FoldsDeleter {
  void operator()(cbcv_folds* f) const { cbcv_folds_free(f); }
};
struct ConfigDeleter {
  void operator()(cbcv_config* c) const { cbcv_config_free(c); }
};
using DatasetPtr = std::unique_ptr<cbcv_dataset, DatasetDeleter>;
using FoldsPtr = std::unique_ptr<cbcv_folds, FoldsDeleter>;
using ConfigPtr = std::unique_ptr<cbcv_config, ConfigDeleter>;

struct Common {
  bool json = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> label_column;
};

void add_common(CLI::App* cmd, Common& c, bool with_seed = true, bool with_label = true) {
  cmd->add_flag("--json", c.json, "Machine-readable JSON output");
  if (with_seed) cmd->add_option("--seed", c.seed, "Master seed");
  if (with_label) cmd->add_option("--label-column", c.label_column, "Name of the class column (default: target)");
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

// ---- inspect ----

int cmd_inspect(const std::vector<std::string>& paths, const Common& c) {
  Json all = Json::array();
  int rc = kExitOk;
  for (const auto& path : paths) {
    cbcv_dataset* raw = nullptr;
    cbcv_status s = cbcv_dataset_load(path.c_str(), c.label_column ? c.label_column->c_str() : nullptr, 0, &raw);
    if (s != CBCV_OK) {
      rc = report_failure(s, c.json);
      continue;
    }
    DatasetPtr ds(raw);
    char* text = nullptr;
    s = cbcv_dataset_report_json(ds.get(), c.seed.value_or(0), &text);
    if (s != CBCV_OK) {
      rc = report_failure(s, c.json);
      continue;
    }
    const Json r = Json::parse(take(text));
    if (c.json) {
      all.push_back(r);
      continue;
    }
    std::cout << r["name"].get<std::string>() << "\n"
              << "  instances   " << r["n_instances"] << "\n"
              << "  attributes  " << r["n_features"] << "\n"
              << "  classes     " << r["n_classes"] << "\n";
    for (const auto& cl : r["classes"])
      std::cout << "    " << cl["label"].get<std::string>() << ": " << cl["count"] << " ("
                << fmt(100.0 * cl["proportion"].get<double>(), 1) << "%)\n";
    std::cout << "  imbalance   " << fmt(r["imbalance"].get<double>()) << " (" << r["balance"].get<std::string>()
              << ")\n";
    if (r["clusters"].is_null())
      std::cout << "  clusters    n/a (" << r["clusters_error"].get<std::string>() << ")\n";
    else
      std::cout << "  clusters    " << r["clusters"] << "\n";
    if (r["dbscan"].is_null())
      std::cout << "  dbscan      n/a (" << r["dbscan_error"].get<std::string>() << ")\n";
    else
      std::cout << "  dbscan      eps=" << fmt(r["dbscan"]["epsilon"].get<double>())
                << " min_samples=" << r["dbscan"]["min_samples"] << "\n";
    if (r["rejected_rows"].get<std::size_t>() > 0)
      std::cout << "  rejected    " << r["rejected_rows"] << " rows with missing values\n";
  }
  if (c.json) std::cout << all.dump(2) << "\n";
  return rc;
}

// ---- config-based commands ----

struct ConfigFlags {
  std::string path;
  std::optional<int> workers;
  std::optional<std::string> metric;
  std::vector<std::string> tuned;
};

cbcv_status open_config(const ConfigFlags& f, const Common& c, ConfigPtr& out) {
  cbcv_config* raw = nullptr;
  cbcv_status s = cbcv_config_load(f.path.c_str(), &raw);
  if (s != CBCV_OK) return s;
  out.reset(raw);
  if (c.seed && (s = cbcv_config_set_seed(raw, *c.seed)) != CBCV_OK) return s;
  if (f.workers && (s = cbcv_config_set_workers(raw, *f.workers)) != CBCV_OK) return s;
  if (f.metric && (s = cbcv_config_set_metric(raw, f.metric->c_str())) != CBCV_OK) return s;
  if (c.label_column && (s = cbcv_config_set_label_column(raw, c.label_column->c_str())) != CBCV_OK) return s;
  for (const auto& t : f.tuned)
    if ((s = cbcv_config_apply_tuned(raw, t.c_str())) != CBCV_OK) return s;
  return CBCV_OK;
}

int cmd_tune(const ConfigFlags& f, const std::string& out, const Common& c) {
  ConfigPtr cfg;
  if (cbcv_status s = open_config(f, c, cfg); s != CBCV_OK) return report_failure(s, c.json);
  char* text = nullptr;
  const cbcv_status s = cbcv_tune(cfg.get(), out.c_str(), &text);
  if (s != CBCV_OK && s != CBCV_PARTIAL_FAILURE && !text) return report_failure(s, c.json);
  const Json summary = Json::parse(take(text));
  if (c.json) {
    Json j = summary;
    j["ok"] = s == CBCV_OK;
    j["output"] = out;
    std::cout << j.dump(2) << "\n";
  } else {
    for (const auto& e : summary["entries"])
      std::cout << e["dataset"].get<std::string>() << " / "
                << e["learner"].value("label", e["learner"]["kind"].get<std::string>()) << ": "
                << e["learner"]["params"].dump() << "  balanced accuracy " << fmt(e["score"].get<double>()) << "\n";
    for (const auto& err : summary["errors"]) std::cerr << "cbcv: tune failed: " << err.get<std::string>() << "\n";
    std::cout << "wrote " << out << "\n";
  }
  return exit_code(s);
}

void print_progress(const char* key, const char* status, const char* error, void*) {
  std::cerr << "[" << status << "] " << key;
  if (error && *error) std::cerr << ": " << error;
  std::cerr << "\n";
}

int cmd_run(const ConfigFlags& f, const std::string& out, bool resume, bool quiet, const Common& c) {
  ConfigPtr cfg;
  if (cbcv_status s = open_config(f, c, cfg); s != CBCV_OK) return report_failure(s, c.json);
  char* text = nullptr;
  const cbcv_status s =
      cbcv_run(cfg.get(), out.c_str(), resume ? 1 : 0, quiet || c.json ? nullptr : print_progress, nullptr, &text);
  if (!text) return report_failure(s, c.json);
  Json summary = Json::parse(take(text));
  if (c.json) {
    summary["ok"] = s == CBCV_OK;
    summary["results_dir"] = out;
    std::cout << summary.dump(2) << "\n";
  } else {
    std::cout << summary["executed_cells"] << " cells executed, " << summary["records"] << "/" << summary["cells"]
              << " records in " << out << "\n";
    if (summary["failed_cells"].get<int>() > 0) {
      std::cerr << "cbcv: " << summary["failed_cells"] << " cells failed:\n";
      for (const auto& e : summary["failures"])
        std::cerr << "  " << e["key"].get<std::string>() << ": " << e["error"].get<std::string>() << "\n";
    }
  }
  return exit_code(s);
}

// ---- analyze ----

int cmd_analyze(const std::string& dir, const std::string& out, const Common& c) {
  char* text = nullptr;
  const cbcv_status s = cbcv_analyze(dir.c_str(), out.empty() ? nullptr : out.c_str(), &text);
  if (s != CBCV_OK) return report_failure(s, c.json);
  Json summary = Json::parse(take(text));
  if (c.json) {
    summary["ok"] = true;
    std::cout << summary.dump(2) << "\n";
    return kExitOk;
  }
  for (const auto& m : summary["messages"]) std::cerr << "cbcv: " << m.get<std::string>() << "\n";
  if (!summary["friedman_skipped"].get<bool>()) {
    std::cout << "Friedman p-values\n";
    for (const auto& r : summary["friedman"]) {
      std::cout << "  " << r["balance"].get<std::string>() << " k=" << r["k"] << " " << r["measure"].get<std::string>()
                << ": ";
      if (r.contains("p_value"))
        std::cout << "p=" << fmt(r["p_value"].get<double>()) << " (chi2=" << fmt(r["statistic"].get<double>())
                  << ", blocks=" << r["n_blocks"] << ")\n";
      else
        std::cout << "not computed\n";
    }
  }
  std::cout << "Execution time\n";
  for (const auto& t : summary["timing"])
    std::cout << "  k=" << t["k"] << " #" << t["rank"] << " " << t["splitter"].get<std::string>() << ": mean "
              << fmt(t["mean_seconds"].get<double>(), 6) << " s over " << t["n_runs"] << " runs\n";
  std::cout << "tables written to " << (out.empty() ? dir : out) << "\n";
  return kExitOk;
}

// ---- split ----

int cmd_split(const std::string& path, const std::string& splitter, int k, std::optional<int> k_clusters,
              bool raw_features, const Common& c) {
  cbcv_dataset* raw = nullptr;
  cbcv_status s = cbcv_dataset_load(path.c_str(), c.label_column ? c.label_column->c_str() : nullptr, 0, &raw);
  if (s != CBCV_OK) return report_failure(s, c.json);
  DatasetPtr ds(raw);
  if (!raw_features) {
    cbcv_dataset* std_ds = nullptr;
    if ((s = cbcv_dataset_standardize(ds.get(), &std_ds)) != CBCV_OK) return report_failure(s, c.json);
    ds.reset(std_ds);
  }
  Json spec;
  if (splitter.find('{') != std::string::npos) {
    try {
      spec = Json::parse(splitter);
    } catch (const Json::exception& e) {
      std::cerr << "cbcv: --splitter: " << e.what() << "\n";
      return kExitUsage;
    }
  } else {
    spec = {{"kind", splitter}};
  }
  if (k_clusters) spec["k_clusters"] = *k_clusters;
  cbcv_folds* folds_raw = nullptr;
  s = cbcv_split(ds.get(), spec.dump().c_str(), k, c.seed.value_or(0), &folds_raw);
  if (s != CBCV_OK) return report_failure(s, c.json);
  FoldsPtr folds(folds_raw);
  const int* fold_of = cbcv_folds_assignment(folds.get());
  const std::size_t n = cbcv_folds_size(folds.get());
  if (c.json) {
    std::cout << Json{{"ok", true}, {"k", cbcv_folds_k(folds.get())}, {"fold_of", std::vector<int>(fold_of, fold_of + n)}}
                     .dump()
              << "\n";
  } else {
    std::cout << "row\tfold\n";
    for (std::size_t i = 0; i < n; ++i) std::cout << i << "\t" << fold_of[i] << "\n";
  }
  return kExitOk;
}

// ---- generate ----

int cmd_generate(const Json& spec, const std::string& out, const Common& c) {
  cbcv_dataset* raw = nullptr;
  cbcv_status s = cbcv_dataset_generate(spec.dump().c_str(), &raw);
  if (s != CBCV_OK) return report_failure(s, c.json);
  DatasetPtr ds(raw);
  if ((s = cbcv_dataset_save(ds.get(), out.c_str())) != CBCV_OK) return report_failure(s, c.json);
  if (c.json)
    std::cout << Json{{"ok", true}, {"output", out}, {"imbalance", cbcv_dataset_imbalance(ds.get())}}.dump() << "\n";
  else
    std::cout << "wrote " << out << " (" << cbcv_dataset_n_instances(ds.get()) << " rows, imbalance "
              << fmt(cbcv_dataset_imbalance(ds.get())) << ")\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cluster-based cross-validation: fold splitters and bias/variance/cost experiments"};
  app.set_version_flag("--version", std::string(cbcv_version()));
  app.require_subcommand(1);

  Common common;

  auto* inspect = app.add_subcommand("inspect", "Describe datasets: size, class balance, clustering estimates");
  std::vector<std::string> inspect_paths;
  inspect->add_option("datasets", inspect_paths, "Dataset files (TSV, optionally .gz)")->required();
  add_common(inspect, common);

  ConfigFlags cf;
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", cf.path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--workers", cf.workers, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--tuned", cf.tuned, "Tuned-learner file(s) to merge into the config")->check(CLI::ExistingFile);
    add_common(cmd, common);
  };

  auto* tune = app.add_subcommand("tune", "Grid-search learner hyperparameters per dataset");
  std::string tune_out = "tuned.json";
  add_config(tune);
  tune->add_option("-o,--out", tune_out, "Output tuned-learner file");

  auto* run = app.add_subcommand("run", "Run the experiment grid");
  std::string run_out = "results";
  bool resume = false;
  bool quiet = false;
  add_config(run);
  run->add_option("-o,--out", run_out, "Results directory");
  run->add_flag("--resume", resume, "Skip cells already present in the results directory");
  run->add_flag("-q,--quiet", quiet, "No per-cell progress on stderr");
  run->add_option("--metric-override", cf.metric, "Force one metric: accuracy, f1, balanced_accuracy");

  auto* analyze = app.add_subcommand("analyze", "Friedman tests, win counts, distributions and timing tables");
  std::string analyze_dir;
  std::string analyze_out;
  analyze->add_option("results", analyze_dir, "Results directory")->required()->check(CLI::ExistingDirectory);
  analyze->add_option("-o,--out", analyze_out, "Output directory for the CSV tables (default: results dir)");
  add_common(analyze, common, false, false);

  auto* split = app.add_subcommand("split", "Print the fold of every row for one splitter");
  std::string split_path;
  std::string split_kind = "scbcv";
  int split_k = 10;
  std::optional<int> split_clusters;
  bool split_raw = false;
  split->add_option("dataset", split_path, "Dataset file")->required();
  split->add_option("-s,--splitter", split_kind, "Splitter kind or a JSON splitter object");
  split->add_option("-k,--folds", split_k, "Number of folds")->check(CLI::Range(2, 1 << 30));
  split->add_option("--k-clusters", split_clusters, "Fixed cluster count (default: estimated)");
  split->add_flag("--raw", split_raw, "Do not standardize features before clustering");
  add_common(split, common);

  auto* generate = app.add_subcommand("generate", "Write a synthetic Gaussian-blob dataset");
  std::string gen_out;
  std::size_t gen_n = 200;
  std::size_t gen_d = 4;
  std::vector<double> gen_weights{0.5, 0.5};
  int gen_clusters = 2;
  double gen_sep = 4.0;
  double gen_spread = 1.0;
  double gen_noise = 0.0;
  generate->add_option("-o,--out", gen_out, "Output file")->required();
  generate->add_option("-n,--instances", gen_n, "Number of rows");
  generate->add_option("-d,--features", gen_d, "Number of features");
  generate->add_option("-w,--weights", gen_weights, "Relative class sizes")->delimiter(',');
  generate->add_option("--clusters-per-class", gen_clusters, "Blobs per class");
  generate->add_option("--separation", gen_sep, "Spread of blob centres");
  generate->add_option("--spread", gen_spread, "Spread of points around their blob centre");
  generate->add_option("--label-noise", gen_noise, "Probability of flipping a label");
  add_common(generate, common, true, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (inspect->parsed()) return cmd_inspect(inspect_paths, common);
  if (tune->parsed()) return cmd_tune(cf, tune_out, common);
  if (run->parsed()) return cmd_run(cf, run_out, resume, quiet, common);
  if (analyze->parsed()) return cmd_analyze(analyze_dir, analyze_out, common);
  if (split->parsed()) return cmd_split(split_path, split_kind, split_k, split_clusters, split_raw, common);
  if (generate->parsed()) {
    const Json spec{{"name", "generated"},   {"n_instances", gen_n},       {"n_features", gen_d},
                    {"class_weights", gen_weights}, {"clusters_per_class", gen_clusters},
                    {"separation", gen_sep}, {"spread", gen_spread},       {"label_noise", gen_noise},
                    {"seed", common.seed.value_or(0)}};
    return cmd_generate(spec, gen_out, common);
  }
  return kExitUsage;
}
