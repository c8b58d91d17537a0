#pragma once

// JSON (de)serialization of configs, tuned-learner files, records and the
// run manifest.

#include <string>
#include <vector>

#include "json.hpp"

#include "cbcv/harness.hpp"

namespace cbcv {

using Json = nlohmann::json;

Json to_json(const SplitterSpec& s);
SplitterSpec splitter_from_json(const Json& j);

Json to_json(const LearnerSpec& s);
LearnerSpec learner_from_json(const Json& j);

Json to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const Json& j);

/// Relative dataset / tuned-file paths resolve against the config's directory.
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

Json to_json(const EvalRecord& r);
EvalRecord record_from_json(const Json& j);

/// Reads a records.jsonl file; a truncated trailing line (interrupted write)
/// is skipped.
std::vector<EvalRecord> read_records(const std::string& path);
void write_records(const std::vector<EvalRecord>& records, const std::string& path);

Json tuned_to_json(const std::vector<TunedEntry>& entries, std::uint64_t seed);
std::vector<TunedEntry> tuned_from_json(const Json& j);
/// Merges a tuned file into cfg.tuned.
void apply_tuned(ExperimentConfig& cfg, const std::vector<TunedEntry>& entries);

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace cbcv
