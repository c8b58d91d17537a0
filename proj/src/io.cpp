#include "cbcv/io.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace cbcv {

namespace fs = std::filesystem;

namespace {

// Reads an optional field, converting JSON type errors into Parse errors.
template <class T>
void read_opt(const Json& j, const char* key, T& out) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::Parse, std::string("field '") + key + "': " + e.what());
  }
}

template <class T>
T read_req(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) fail(ErrorKind::Parse, std::string("missing field '") + key + "'");
  T out{};
  read_opt(j, key, out);
  return out;
}

void expect_object(const Json& j, const char* what) {
  if (!j.is_object()) fail(ErrorKind::Parse, std::string(what) + " must be a JSON object");
}

Json grid_to_json(const Grid& g) {
  Json arr = Json::array();
  for (const auto& [name, values] : g) arr.push_back({{"param", name}, {"values", values}});
  return arr;
}

Grid grid_from_json(const Json& j) {
  if (!j.is_array()) fail(ErrorKind::Parse, "grid must be an array of {param, values}");
  Grid g;
  for (const auto& e : j) {
    auto values = read_req<std::vector<double>>(e, "values");
    if (values.empty()) fail(ErrorKind::Parse, "grid values must be nonempty");
    g.emplace_back(read_req<std::string>(e, "param"), std::move(values));
  }
  return g;
}

Json cluster_count_to_json(const ClusterCountOptions& o) {
  return {{"repetitions", o.repetitions}, {"sample_size", o.sample_size}, {"gap_ratio", o.gap_ratio},
          {"min_clusters", o.min_clusters}, {"max_clusters", o.max_clusters},
          {"linkage", to_string(o.linkage)}};
}

ClusterCountOptions cluster_count_from_json(const Json& j) {
  expect_object(j, "cluster_count");
  ClusterCountOptions o;
  read_opt(j, "repetitions", o.repetitions);
  read_opt(j, "sample_size", o.sample_size);
  read_opt(j, "gap_ratio", o.gap_ratio);
  read_opt(j, "min_clusters", o.min_clusters);
  read_opt(j, "max_clusters", o.max_clusters);
  if (j.contains("linkage")) o.linkage = linkage_from_string(read_req<std::string>(j, "linkage"));
  return o;
}

std::string resolve_path(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute() || base.empty()) return p;
  return (base / path).lexically_normal().string();
}

}  // namespace

Json to_json(const SplitterSpec& s) {
  Json j;
  j["kind"] = to_string(s.kind);
  if (!s.label.empty()) j["label"] = s.label;
  if (s.k_clusters) j["k_clusters"] = *s.k_clusters;
  if (s.dbscan) j["dbscan"] = {{"epsilon", s.dbscan->epsilon}, {"min_samples", s.dbscan->min_samples}};
  j["linkage"] = to_string(s.linkage);
  j["batch_size"] = s.batch_size;
  j["kmeans_max_iterations"] = s.kmeans_max_iterations;
  return j;
}

SplitterSpec splitter_from_json(const Json& j) {
  SplitterSpec s;
  if (j.is_string()) {
    s.kind = splitter_kind_from_string(j.get<std::string>());
    return s;
  }
  expect_object(j, "splitter");
  s.kind = splitter_kind_from_string(read_req<std::string>(j, "kind"));
  read_opt(j, "label", s.label);
  if (j.contains("k_clusters") && !j.at("k_clusters").is_null()) {
    const Json& kc = j.at("k_clusters");
    if (!(kc.is_string() && kc.get<std::string>() == "auto")) {
      s.k_clusters = read_req<int>(j, "k_clusters");
      require(*s.k_clusters >= 1, "splitter: k_clusters must be positive");
    }
  }
  if (j.contains("dbscan") && !j.at("dbscan").is_null()) {
    const Json& d = j.at("dbscan");
    if (!(d.is_string() && d.get<std::string>() == "auto")) {
      DbscanParams p;
      p.epsilon = read_req<double>(d, "epsilon");
      p.min_samples = read_req<int>(d, "min_samples");
      validate(p);
      s.dbscan = p;
    }
  }
  if (j.contains("linkage")) s.linkage = linkage_from_string(read_req<std::string>(j, "linkage"));
  read_opt(j, "batch_size", s.batch_size);
  read_opt(j, "kmeans_max_iterations", s.kmeans_max_iterations);
  require(s.batch_size >= 1, "splitter: batch_size must be positive");
  require(s.kmeans_max_iterations >= 1, "splitter: kmeans_max_iterations must be positive");
  return s;
}

Json to_json(const LearnerSpec& s) {
  Json j;
  j["kind"] = to_string(s.kind);
  if (!s.label.empty()) j["label"] = s.label;
  j["params"] = s.hyperparams;
  return j;
}

LearnerSpec learner_from_json(const Json& j) {
  LearnerSpec s;
  if (j.is_string()) {
    s.kind = learner_kind_from_string(j.get<std::string>());
    return s;
  }
  expect_object(j, "learner");
  s.kind = learner_kind_from_string(read_req<std::string>(j, "kind"));
  read_opt(j, "label", s.label);
  read_opt(j, "params", s.hyperparams);
  validate(s);
  return s;
}

Json to_json(const ExperimentConfig& cfg) {
  Json j;
  j["datasets"] = cfg.datasets;
  j["splitters"] = Json::array();
  for (const auto& s : cfg.splitters) j["splitters"].push_back(to_json(s));
  j["learners"] = Json::array();
  for (const auto& l : cfg.learners) j["learners"].push_back(to_json(l));
  if (!cfg.tuned.empty()) {
    Json t = Json::object();
    for (const auto& [ds, by_learner] : cfg.tuned)
      for (const auto& [id, spec] : by_learner) t[ds][id] = to_json(spec);
    j["tuned"] = std::move(t);
  }
  j["fold_counts"] = cfg.fold_counts;
  j["holdout_reps"] = cfg.holdout_reps;
  j["cv_reps"] = cfg.cv_reps;
  j["train_fraction"] = cfg.train_fraction;
  j["master_seed"] = cfg.master_seed;
  if (cfg.metric_override) j["metric_override"] = to_string(*cfg.metric_override);
  j["f1_average"] = cfg.f1_average == F1Average::Macro ? "macro" : "weighted";
  j["standardize"] = cfg.standardize;
  j["label_column"] = cfg.load.label_column;
  j["delimiter"] = std::string(1, cfg.load.delimiter);
  j["workers"] = cfg.workers;
  j["timing_run"] = cfg.timing_run;
  j["cluster_count"] = cluster_count_to_json(cfg.cluster_count);
  if (!cfg.grids.empty()) {
    Json g = Json::object();
    for (const auto& [kind, grid] : cfg.grids) g[to_string(kind)] = grid_to_json(grid);
    j["grids"] = std::move(g);
  }
  return j;
}

ExperimentConfig config_from_json(const Json& j) {
  expect_object(j, "config");
  static const std::set<std::string> known = {
      "datasets", "splitters",  "learners",    "tuned",     "tuned_file",   "fold_counts",
      "holdout_reps", "cv_reps", "train_fraction", "master_seed", "metric_override", "f1_average",
      "standardize", "label_column", "delimiter", "workers", "timing_run", "cluster_count",
      "grids", "description"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) fail(ErrorKind::Parse, "config: unknown field '" + key + "'");

  ExperimentConfig cfg;
  cfg.datasets = read_req<std::vector<std::string>>(j, "datasets");
  if (!j.contains("splitters") || !j.at("splitters").is_array()) fail(ErrorKind::Parse, "config: 'splitters' must be an array");
  for (const auto& s : j.at("splitters")) cfg.splitters.push_back(splitter_from_json(s));
  if (!j.contains("learners") || !j.at("learners").is_array()) fail(ErrorKind::Parse, "config: 'learners' must be an array");
  for (const auto& l : j.at("learners")) cfg.learners.push_back(learner_from_json(l));
  if (j.contains("tuned")) {
    const Json& t = j.at("tuned");
    expect_object(t, "tuned");
    for (const auto& [ds, by_learner] : t.items()) {
      expect_object(by_learner, "tuned entry");
      for (const auto& [id, spec] : by_learner.items()) cfg.tuned[ds][id] = learner_from_json(spec);
    }
  }
  read_opt(j, "fold_counts", cfg.fold_counts);
  read_opt(j, "holdout_reps", cfg.holdout_reps);
  read_opt(j, "cv_reps", cfg.cv_reps);
  read_opt(j, "train_fraction", cfg.train_fraction);
  read_opt(j, "master_seed", cfg.master_seed);
  if (j.contains("metric_override") && !j.at("metric_override").is_null())
    cfg.metric_override = metric_from_string(read_req<std::string>(j, "metric_override"));
  if (j.contains("f1_average")) {
    const auto a = read_req<std::string>(j, "f1_average");
    if (a == "macro")
      cfg.f1_average = F1Average::Macro;
    else if (a == "weighted")
      cfg.f1_average = F1Average::Weighted;
    else
      fail(ErrorKind::Parse, "config: f1_average must be 'macro' or 'weighted'");
  }
  read_opt(j, "standardize", cfg.standardize);
  read_opt(j, "label_column", cfg.load.label_column);
  if (j.contains("delimiter")) {
    auto d = read_req<std::string>(j, "delimiter");
    if (d == "\\t" || d == "tab") d = "\t";
    if (d.size() != 1) fail(ErrorKind::Parse, "config: delimiter must be one character");
    cfg.load.delimiter = d[0];
  }
  read_opt(j, "workers", cfg.workers);
  read_opt(j, "timing_run", cfg.timing_run);
  if (j.contains("cluster_count")) cfg.cluster_count = cluster_count_from_json(j.at("cluster_count"));
  if (j.contains("grids")) {
    const Json& g = j.at("grids");
    expect_object(g, "grids");
    for (const auto& [kind, grid] : g.items()) cfg.grids[learner_kind_from_string(kind)] = grid_from_json(grid);
  }
  validate(cfg);
  return cfg;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::Parse, "'" + path + "': " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  // Write-then-rename so readers never see a half-written file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write '" + tmp + "'");
    out << text;
    if (!out) fail(ErrorKind::Io, "write failed for '" + tmp + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::Io, "cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

ExperimentConfig load_config(const std::string& path) {
  const Json j = read_json_file(path);
  const fs::path base = fs::path(path).parent_path();
  ExperimentConfig cfg = config_from_json(j);
  for (auto& d : cfg.datasets) d = resolve_path(base, d);
  if (j.contains("tuned_file") && !j.at("tuned_file").is_null()) {
    const auto tuned_path = resolve_path(base, read_req<std::string>(j, "tuned_file"));
    apply_tuned(cfg, tuned_from_json(read_json_file(tuned_path)));
  }
  return cfg;
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  write_text_file(path, to_json(cfg).dump(2) + "\n");
}

Json to_json(const EvalRecord& r) {
  Json j;
  j["schema_version"] = r.schema_version;
  j["dataset"] = r.dataset;
  j["learner"] = r.learner;
  j["splitter"] = r.splitter;
  j["splitter_kind"] = r.splitter_kind;
  j["k_splits"] = r.k_splits;
  j["balance"] = r.balance;
  j["imbalance"] = r.imbalance;
  j["metric"] = to_string(r.metric);
  j["cv_estimates"] = r.cv_estimates;
  j["cv_mean"] = r.cv_mean;
  j["true_perf"] = r.true_perf;
  j["bias"] = r.bias;
  j["std"] = r.std;
  j["wall_seconds"] = r.wall_seconds;
  j["fold_seconds"] = r.fold_seconds;
  j["learner_params"] = r.learner_params;
  j["splitter_params"] = r.splitter_params;
  j["workers"] = r.workers;
  return j;
}

EvalRecord record_from_json(const Json& j) {
  expect_object(j, "record");
  EvalRecord r;
  r.schema_version = read_req<int>(j, "schema_version");
  if (r.schema_version != kRecordSchemaVersion)
    fail(ErrorKind::Parse, "unsupported record schema version " + std::to_string(r.schema_version));
  r.dataset = read_req<std::string>(j, "dataset");
  r.learner = read_req<std::string>(j, "learner");
  r.splitter = read_req<std::string>(j, "splitter");
  read_opt(j, "splitter_kind", r.splitter_kind);
  r.k_splits = read_req<int>(j, "k_splits");
  r.balance = read_req<std::string>(j, "balance");
  r.imbalance = read_req<double>(j, "imbalance");
  r.metric = metric_from_string(read_req<std::string>(j, "metric"));
  r.cv_estimates = read_req<std::vector<double>>(j, "cv_estimates");
  r.cv_mean = read_req<double>(j, "cv_mean");
  r.true_perf = read_req<double>(j, "true_perf");
  r.bias = read_req<double>(j, "bias");
  r.std = read_req<double>(j, "std");
  r.wall_seconds = read_req<std::vector<double>>(j, "wall_seconds");
  read_opt(j, "fold_seconds", r.fold_seconds);
  read_opt(j, "learner_params", r.learner_params);
  read_opt(j, "splitter_params", r.splitter_params);
  read_opt(j, "workers", r.workers);
  return r;
}

std::vector<EvalRecord> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) lines.push_back(std::move(line));
  std::vector<EvalRecord> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    Json j;
    try {
      j = Json::parse(lines[i]);
    } catch (const Json::parse_error& e) {
      if (i + 1 == lines.size()) break;  // interrupted append
      fail(ErrorKind::Parse, path + ":" + std::to_string(i + 1) + ": " + e.what());
    }
    out.push_back(record_from_json(j));
  }
  return out;
}

void write_records(const std::vector<EvalRecord>& records, const std::string& path) {
  std::string text;
  for (const auto& r : records) text += to_json(r).dump() + "\n";
  write_text_file(path, text);
}

Json tuned_to_json(const std::vector<TunedEntry>& entries, std::uint64_t seed) {
  Json j;
  j["schema_version"] = 1;
  j["seed"] = seed;
  j["entries"] = Json::array();
  for (const auto& e : entries)
    j["entries"].push_back({{"dataset", e.dataset}, {"learner", to_json(e.learner)}, {"score", e.score}});
  return j;
}

std::vector<TunedEntry> tuned_from_json(const Json& j) {
  expect_object(j, "tuned file");
  if (!j.contains("entries") || !j.at("entries").is_array()) fail(ErrorKind::Parse, "tuned file: missing 'entries'");
  std::vector<TunedEntry> out;
  for (const auto& e : j.at("entries")) {
    TunedEntry t;
    t.dataset = read_req<std::string>(e, "dataset");
    if (!e.contains("learner")) fail(ErrorKind::Parse, "tuned file: entry without 'learner'");
    t.learner = learner_from_json(e.at("learner"));
    read_opt(e, "score", t.score);
    out.push_back(std::move(t));
  }
  return out;
}

void apply_tuned(ExperimentConfig& cfg, const std::vector<TunedEntry>& entries) {
  for (const auto& e : entries) cfg.tuned[e.dataset][e.learner.id()] = e.learner;
}

}  // namespace cbcv
