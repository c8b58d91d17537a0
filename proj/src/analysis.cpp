#include "cbcv/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include "cbcv/io.hpp"

namespace cbcv {

namespace fs = std::filesystem;

namespace {

bool kmeans_kind(const std::string& kind) {
  return kind == "scbcv" || kind == "scbcv_mini" || kind == "kcbcv" || kind == "kcbcv_mini";
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Quotes a CSV field when it contains a delimiter, quote or newline.
std::string field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<EvalRecord> filter(const std::vector<EvalRecord>& records, const std::string& balance, int k) {
  std::vector<EvalRecord> out;
  for (const auto& r : records)
    if ((balance == "all" || r.balance == balance) && r.k_splits == k) out.push_back(r);
  return out;
}

}  // namespace

AnalysisResult analyze_records(const std::vector<EvalRecord>& records, const AnalysisOptions& options) {
  if (records.empty()) fail(ErrorKind::Data, "analysis: no records");
  AnalysisResult res;

  std::vector<std::string> splitters;
  std::set<int> ks;
  std::vector<std::string> balances;
  for (const auto& r : records) {
    if (std::find(splitters.begin(), splitters.end(), r.splitter) == splitters.end()) splitters.push_back(r.splitter);
    ks.insert(r.k_splits);
    if (std::find(balances.begin(), balances.end(), r.balance) == balances.end()) balances.push_back(r.balance);
  }
  std::sort(balances.begin(), balances.end());

  constexpr Measure kMeasures[] = {Measure::Bias, Measure::Std};

  if (splitters.size() < 2) {
    res.friedman_skipped = true;
    res.messages.push_back("Friedman test skipped: it needs at least 2 splitters, the results contain only '" +
                           splitters.front() + "'");
  } else {
    for (const auto& balance : balances)
      for (int k : ks)
        for (Measure m : kMeasures) {
          const auto group = filter(records, balance, k);
          if (group.empty()) continue;
          FriedmanRow row{balance, k, m, 0, splitters.size(), std::nullopt};
          const BlockTable table = build_block_table(group, m, options.block_unit, options.raw_bias);
          row.n_blocks = table.blocks.size();
          row.n_treatments = table.treatments.size();
          if (table.blocks.size() >= 2 && table.treatments.size() >= 2)
            row.result = friedman_test(table, options.p_method);
          else
            res.messages.push_back("Friedman test not computed for " + balance + ", k=" + std::to_string(k) + ", " +
                                   to_string(m) + ": fewer than 2 complete blocks");
          res.friedman.push_back(std::move(row));
        }
  }

  std::vector<std::string> win_groups = balances;
  win_groups.push_back("all");
  for (const auto& balance : win_groups)
    for (int k : ks)
      for (Measure m : kMeasures) {
        const auto group = filter(records, balance, k);
        if (group.empty()) continue;
        for (const auto& w : win_counts(group, m)) res.wins.push_back({balance, k, m, w.treatment, w.wins});
      }

  std::map<std::pair<std::string, int>, TimingRow> timing;
  std::vector<std::pair<std::string, int>> order;
  for (const auto& r : records) {
    const std::pair key{r.splitter, r.k_splits};
    if (!timing.contains(key)) {
      order.push_back(key);
      timing[key] = {r.splitter, r.splitter_kind, r.k_splits, 0, 0.0, 0.0, 0, kmeans_kind(r.splitter_kind)};
    }
    TimingRow& t = timing[key];
    for (double s : r.wall_seconds) {
      t.total_seconds += s;
      ++t.n_runs;
    }
  }
  for (auto& [_, t] : timing) t.mean_seconds = t.n_runs ? t.total_seconds / static_cast<double>(t.n_runs) : 0.0;
  for (int k : ks) {
    std::vector<TimingRow*> same_k;
    for (auto& [key, t] : timing)
      if (key.second == k) same_k.push_back(&t);
    std::stable_sort(same_k.begin(), same_k.end(),
                     [](const TimingRow* a, const TimingRow* b) { return a->mean_seconds < b->mean_seconds; });
    for (std::size_t i = 0; i < same_k.size(); ++i) same_k[i]->rank = static_cast<int>(i + 1);
  }
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  for (const auto& key : order) res.timing.push_back(timing.at(key));
  return res;
}

void write_analysis(const AnalysisResult& result, const std::vector<EvalRecord>& records, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  if (!result.friedman_skipped) {
    std::string csv = "balance,k,measure,n_blocks,n_treatments,statistic,p_value,exact\n";
    for (const auto& r : result.friedman) {
      csv += r.balance + "," + std::to_string(r.k_splits) + "," + to_string(r.measure) + "," +
             std::to_string(r.n_blocks) + "," + std::to_string(r.n_treatments) + ",";
      if (r.result)
        csv += num(r.result->statistic) + "," + num(r.result->p_value) + "," + (r.result->exact ? "true" : "false");
      else
        csv += ",,";
      csv += "\n";
    }
    write_text_file((dir / "friedman.csv").string(), csv);
  }

  std::string wins = "balance,k,measure,splitter,wins\n";
  for (const auto& w : result.wins)
    wins += w.balance + "," + std::to_string(w.k_splits) + "," + to_string(w.measure) + "," + field(w.splitter) + "," +
            std::to_string(w.wins) + "\n";
  write_text_file((dir / "wins.csv").string(), wins);

  std::string dist = "dataset,learner,splitter,k,balance,measure,value\n";
  for (const auto& r : records)
    for (Measure m : {Measure::Bias, Measure::Std})
      dist += field(r.dataset) + "," + field(r.learner) + "," + field(r.splitter) + "," + std::to_string(r.k_splits) +
              "," + r.balance + "," + to_string(m) + "," + num(m == Measure::Bias ? r.bias : r.std) + "\n";
  write_text_file((dir / "distributions.csv").string(), dist);

  std::string timing = "splitter,splitter_kind,k,n_runs,total_seconds,mean_seconds,rank,kmeans_based\n";
  for (const auto& t : result.timing)
    timing += field(t.splitter) + "," + t.splitter_kind + "," + std::to_string(t.k_splits) + "," +
              std::to_string(t.n_runs) + "," + num(t.total_seconds) + "," + num(t.mean_seconds) + "," +
              std::to_string(t.rank) + "," + (t.kmeans_based ? "true" : "false") + "\n";
  write_text_file((dir / "timing.csv").string(), timing);
}

AnalysisResult analyze_results_dir(const std::string& results_dir, const std::string& out_dir,
                                   const AnalysisOptions& options) {
  const fs::path path = fs::path(results_dir) / "records.jsonl";
  if (!fs::exists(path)) fail(ErrorKind::Io, "no records.jsonl in '" + results_dir + "'");
  const auto records = read_records(path.string());
  if (records.empty()) fail(ErrorKind::Data, "analysis: '" + path.string() + "' holds no records");
  AnalysisResult res = analyze_records(records, options);
  write_analysis(res, records, out_dir.empty() ? results_dir : out_dir);
  return res;
}

}  // namespace cbcv
