#include "cbcv/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <zlib.h>

namespace cbcv {

std::vector<std::vector<std::size_t>> Dataset::indices_by_class() const {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(n_classes()));
  for (std::size_t i = 0; i < labels.size(); ++i) out[static_cast<std::size_t>(labels[i])].push_back(i);
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.name = name;
  out.features = features.select_rows(rows);
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) out.labels.push_back(labels[r]);
  out.class_names = class_names;
  return out;
}

void validate(const Dataset& ds) {
  if (ds.features.rows() != ds.labels.size())
    fail(ErrorKind::Data, "dataset '" + ds.name + "': label count does not match row count");
  const int k = ds.n_classes();
  for (int y : ds.labels)
    if (y < 0 || y >= k) fail(ErrorKind::Data, "dataset '" + ds.name + "': label out of range");
  for (double v : ds.features.data())
    if (!std::isfinite(v)) fail(ErrorKind::Data, "dataset '" + ds.name + "': non-finite feature");
}

std::size_t ClassDistribution::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

ClassDistribution class_distribution(const Dataset& ds) {
  ClassDistribution d;
  d.counts.assign(static_cast<std::size_t>(ds.n_classes()), 0);
  for (int y : ds.labels) ++d.counts[static_cast<std::size_t>(y)];
  const double n = static_cast<double>(ds.n_instances());
  for (std::size_t c : d.counts) d.proportions.push_back(n > 0 ? static_cast<double>(c) / n : 0.0);
  return d;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_line(std::string_view line, char delim) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

bool is_missing(std::string_view cell) {
  return cell.empty() || cell == "?" || cell == "NA" || cell == "na" || cell == "nan" ||
         cell == "NaN" || cell == "NAN";
}

}  // namespace

Dataset parse_dataset(const std::string& text, const std::string& name, const LoadOptions& options) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  std::vector<std::string_view> header;
  std::string header_line;
  while (std::getline(in, header_line)) {
    ++line_no;
    if (!trim(header_line).empty()) break;
  }
  if (trim(header_line).empty()) fail(ErrorKind::Parse, name + ": missing header row");
  header = split_line(header_line, options.delimiter);

  std::size_t label_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == options.label_column) label_col = c;
  if (label_col == header.size())
    fail(ErrorKind::Data, name + ": label column '" + options.label_column + "' absent");
  const std::size_t n_features = header.size() - 1;

  Dataset ds;
  ds.name = name;
  std::vector<double> values;
  std::unordered_map<std::string, int> label_ids;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line, options.delimiter);
    if (cells.size() != header.size())
      fail(ErrorKind::Parse, name + ": line " + std::to_string(line_no) + " has " +
                                 std::to_string(cells.size()) + " cells, expected " +
                                 std::to_string(header.size()));

    bool missing = false;
    std::vector<double> row;
    row.reserve(n_features);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (is_missing(cells[c])) {
        missing = true;
        break;
      }
      if (c == label_col) continue;
      double v = 0.0;
      const char* first = cells[c].data();
      const char* last = first + cells[c].size();
      if (*first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last)
        fail(ErrorKind::Parse, name + ": unparsable cell '" + std::string(cells[c]) + "' at line " +
                                   std::to_string(line_no) + ", column " + std::to_string(c + 1));
      if (!std::isfinite(v)) {
        missing = true;
        break;
      }
      row.push_back(v);
    }
    if (missing) {
      ++ds.rejected_rows;
      continue;
    }

    const std::string label(cells[label_col]);
    auto [it, inserted] = label_ids.try_emplace(label, static_cast<int>(ds.class_names.size()));
    if (inserted) ds.class_names.push_back(label);
    ds.labels.push_back(it->second);
    values.insert(values.end(), row.begin(), row.end());
  }

  // Class ids follow sorted label order (numerically when every label is a
  // number) so they do not depend on row order.
  std::vector<std::string> sorted = ds.class_names;
  bool numeric = true;
  std::unordered_map<std::string, double> as_number;
  for (const auto& l : sorted) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(l.data(), l.data() + l.size(), v);
    numeric = numeric && ec == std::errc() && ptr == l.data() + l.size();
    as_number[l] = v;
  }
  std::stable_sort(sorted.begin(), sorted.end(), [&](const std::string& a, const std::string& b) {
    return numeric ? as_number[a] < as_number[b] : a < b;
  });
  std::vector<int> remap(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) remap[static_cast<std::size_t>(label_ids.at(sorted[i]))] = static_cast<int>(i);
  for (int& y : ds.labels) y = remap[static_cast<std::size_t>(y)];
  ds.class_names = std::move(sorted);

  if (ds.labels.size() < 2) fail(ErrorKind::Data, name + ": fewer than 2 instances");
  if (ds.class_names.size() < 2) fail(ErrorKind::Data, name + ": fewer than 2 classes");
  ds.features = Matrix(ds.labels.size(), n_features, std::move(values));
  return ds;
}

std::string dataset_name_from_path(const std::string& path) {
  std::string name = path;
  if (const auto slash = name.find_last_of("/\\"); slash != std::string::npos) name = name.substr(slash + 1);
  for (const char* ext : {".gz", ".tsv", ".csv", ".txt"})
    if (name.size() > std::strlen(ext) && name.ends_with(ext)) name.resize(name.size() - std::strlen(ext));
  return name;
}

Dataset load_dataset(const std::string& path, const LoadOptions& options) {
  std::string text;
  if (path.ends_with(".gz")) {
    // PMLB distributes its tables gzip-compressed.
    gzFile gz = gzopen(path.c_str(), "rb");
    if (!gz) fail(ErrorKind::Io, "cannot open dataset file '" + path + "'");
    char chunk[1 << 16];
    int got = 0;
    while ((got = gzread(gz, chunk, sizeof chunk)) > 0) text.append(chunk, static_cast<std::size_t>(got));
    const bool bad = got < 0;
    gzclose(gz);
    if (bad) fail(ErrorKind::Io, "corrupt gzip stream in '" + path + "'");
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open dataset file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  }
  return parse_dataset(text, dataset_name_from_path(path), options);
}

void save_dataset(const Dataset& ds, const std::string& path, char delimiter) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write dataset file '" + path + "'");
  for (std::size_t c = 0; c < ds.n_features(); ++c) out << 'x' << c << delimiter;
  out << "target\n";
  char buf[64];
  for (std::size_t r = 0; r < ds.n_instances(); ++r) {
    for (double v : ds.features.row(r)) {
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      out.write(buf, res.ptr - buf);
      out << delimiter;
    }
    out << ds.class_names[static_cast<std::size_t>(ds.labels[r])] << '\n';
  }
  if (!out) fail(ErrorKind::Io, "failed writing '" + path + "'");
}

Dataset standardize(const Dataset& ds) {
  require(ds.n_instances() >= 2, "standardize: need at least 2 instances");
  Dataset out = ds;
  const std::size_t n = ds.n_instances();
  for (std::size_t c = 0; c < ds.n_features(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += ds.features(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double d = ds.features(r, c) - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (std::size_t r = 0; r < n; ++r)
      out.features(r, c) = sd > 0.0 ? (ds.features(r, c) - mean) / sd : 0.0;
  }
  return out;
}

double imbalance_index(const ClassDistribution& dist) {
  require(!dist.proportions.empty(), "imbalance_index: empty distribution");
  const double k = static_cast<double>(dist.proportions.size());
  double s = 0.0;
  for (double p : dist.proportions) s += (p - 1.0 / k) * (p - 1.0 / k);
  return k * s;
}

double imbalance_index(const Dataset& ds) { return imbalance_index(class_distribution(ds)); }

BalanceClass classify_balance(double imbalance) {
  return imbalance > kImbalanceThreshold ? BalanceClass::Imbalanced : BalanceClass::Balanced;
}

BalanceClass classify_balance(const Dataset& ds) { return classify_balance(imbalance_index(ds)); }

const char* to_string(BalanceClass b) {
  return b == BalanceClass::Balanced ? "balanced" : "imbalanced";
}

std::vector<std::size_t> stratified_counts(std::span<const std::size_t> class_sizes, double fraction) {
  require(fraction > 0.0 && fraction <= 1.0, "stratified_counts: fraction must be in (0, 1]");
  constexpr double kSlack = 1e-9;  // absorbs 0.9 * 100 = 90.000000000000014
  std::vector<std::size_t> counts(class_sizes.size());
  std::vector<double> remainder(class_sizes.size());
  std::size_t total = 0;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < class_sizes.size(); ++i) {
    const double exact = fraction * static_cast<double>(class_sizes[i]);
    counts[i] = static_cast<std::size_t>(std::floor(exact + kSlack));
    remainder[i] = std::max(0.0, exact - static_cast<double>(counts[i]));
    if (remainder[i] < kSlack) remainder[i] = 0.0;
    total += class_sizes[i];
    assigned += counts[i];
  }
  const auto target = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total) + 0.5));
  std::vector<std::size_t> order(class_sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i : order) {
    if (assigned >= target) break;
    if (remainder[i] > 0.0 && counts[i] < class_sizes[i]) {
      ++counts[i];
      ++assigned;
    }
  }
  return counts;
}

Subsample stratified_subsample(const Dataset& ds, const SubsampleSpec& spec) {
  require(spec.fraction > 0.0 && spec.fraction <= 1.0, "stratified_subsample: fraction must be in (0, 1]");
  Rng rng(spec.seed);
  std::vector<std::size_t> selected;

  if (spec.stratified) {
    auto by_class = ds.indices_by_class();
    std::vector<std::size_t> sizes;
    for (const auto& members : by_class) sizes.push_back(members.size());
    const auto counts = stratified_counts(sizes, spec.fraction);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      if (sizes[c] > 0 && counts[c] == 0)
        fail(ErrorKind::Data, "stratified_subsample: class '" + ds.class_names[c] + "' would become empty");
      auto members = by_class[c];
      rng.shuffle(members);
      selected.insert(selected.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(counts[c]));
    }
  } else {
    std::vector<std::size_t> all(ds.n_instances());
    std::iota(all.begin(), all.end(), 0);
    rng.shuffle(all);
    const auto take = static_cast<std::size_t>(std::floor(spec.fraction * static_cast<double>(all.size()) + 0.5));
    selected.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(take, 1)));
  }

  std::sort(selected.begin(), selected.end());
  Subsample out;
  out.data = ds.subset(selected);
  out.indices = std::move(selected);
  return out;
}

HoldoutSplit stratified_holdout_split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0,
          "stratified_holdout_split: train fraction must be in (0, 1)");
  const auto dist = class_distribution(ds);
  for (std::size_t c = 0; c < dist.counts.size(); ++c) {
    if (dist.counts[c] < 2)
      fail(ErrorKind::Data, "stratified_holdout_split: class '" + ds.class_names[c] +
                                "' too small to appear on both sides");
  }
  const auto sub = stratified_subsample(ds, {train_fraction, true, seed});
  HoldoutSplit split;
  split.train = sub.indices;
  std::vector<bool> in_train(ds.n_instances(), false);
  for (std::size_t i : split.train) in_train[i] = true;
  for (std::size_t i = 0; i < ds.n_instances(); ++i)
    if (!in_train[i]) split.test.push_back(i);
  if (split.test.empty())
    fail(ErrorKind::Data, "stratified_holdout_split: test side would be empty");
  return split;
}

}  // namespace cbcv
