#include "cbcv/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

namespace cbcv {

void validate(const BlockTable& t) {
  require(t.values.size() == t.blocks.size(), "block table: block labels do not match rows");
  for (const auto& row : t.values) {
    require(row.size() == t.treatments.size(), "block table: ragged row");
    for (double v : row) require(std::isfinite(v), "block table: non-finite value");
  }
}

std::vector<double> average_ranks(std::span<const double> row) {
  const std::size_t k = row.size();
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row[a] < row[b]; });
  std::vector<double> ranks(k);
  for (std::size_t i = 0; i < k;) {
    std::size_t j = i;
    while (j + 1 < k && row[order[j + 1]] == row[order[i]]) ++j;
    const double r = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = r;
    i = j + 1;
  }
  return ranks;
}

double chi_square_sf(double x, double dof) {
  require(dof > 0, "chi_square_sf: dof must be positive");
  if (x <= 0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, x / 2.0);
}

namespace {

double factorial(std::size_t k) {
  double f = 1;
  for (std::size_t i = 2; i <= k; ++i) f *= static_cast<double>(i);
  return f;
}

// Number of distinct arrangements of a row's ranks (multinomial over ties).
double arrangements(std::vector<double> ranks) {
  std::sort(ranks.begin(), ranks.end());
  double count = factorial(ranks.size());
  for (std::size_t i = 0; i < ranks.size();) {
    std::size_t j = i;
    while (j < ranks.size() && ranks[j] == ranks[i]) ++j;
    count /= factorial(j - i);
    i = j;
  }
  return count;
}

struct ExactSearch {
  std::vector<std::vector<std::vector<double>>> row_perms;  // distinct arrangements per row
  std::vector<double> sums;
  double threshold = 0.0;
  double hits = 0.0;
  double total = 0.0;

  void walk(std::size_t row) {
    if (row == row_perms.size()) {
      double s = 0.0;
      for (double v : sums) s += v * v;
      total += 1.0;
      if (s >= threshold) hits += 1.0;
      return;
    }
    for (const auto& perm : row_perms[row]) {
      for (std::size_t j = 0; j < sums.size(); ++j) sums[j] += perm[j];
      walk(row + 1);
      for (std::size_t j = 0; j < sums.size(); ++j) sums[j] -= perm[j];
    }
  }
};

}  // namespace

FriedmanResult friedman_test(const BlockTable& t, PValueMethod method) {
  validate(t);
  const std::size_t n = t.values.size();
  const std::size_t k = t.treatments.size();
  require(k >= 2, "friedman_test: needs at least 2 treatments");
  require(n >= 2, "friedman_test: needs at least 2 blocks");

  FriedmanResult res;
  res.n_blocks = n;
  res.n_treatments = k;

  std::vector<std::vector<double>> ranks;
  std::vector<double> rank_sums(k, 0.0);
  double tie_sum = 0.0;
  for (const auto& row : t.values) {
    ranks.push_back(average_ranks(row));
    for (std::size_t j = 0; j < k; ++j) rank_sums[j] += ranks.back()[j];
    std::map<double, double> groups;
    for (double v : row) groups[v] += 1.0;
    for (const auto& [_, c] : groups) tie_sum += c * c * c - c;
  }
  const double nd = static_cast<double>(n);
  const double kd = static_cast<double>(k);
  const double correction = 1.0 - tie_sum / (nd * (kd * kd * kd - kd));
  if (correction <= 1e-12) return res;  // every row constant

  double ss = 0.0;
  for (double r : rank_sums) {
    const double dev = r / nd - (kd + 1.0) / 2.0;
    ss += dev * dev;
  }
  res.statistic = 12.0 * nd / (kd * (kd + 1.0)) * ss / correction;

  double space = 1.0;
  for (const auto& r : ranks) space *= arrangements(r);
  if (method == PValueMethod::Auto && space <= kExactLimit) {
    // Under the null every arrangement of each row's ranks is equally likely.
    // The statistic is a monotone function of the sum of squared rank sums.
    ExactSearch search;
    for (const auto& r : ranks) {
      std::vector<double> perm = r;
      std::sort(perm.begin(), perm.end());
      std::vector<std::vector<double>> all;
      do all.push_back(perm);
      while (std::next_permutation(perm.begin(), perm.end()));
      search.row_perms.push_back(std::move(all));
    }
    double observed = 0.0;
    for (double r : rank_sums) observed += r * r;
    search.threshold = observed - 1e-9 * std::max(1.0, observed);
    search.sums.assign(k, 0.0);
    search.walk(0);
    res.p_value = std::clamp(search.hits / search.total, 0.0, 1.0);
    res.exact = true;
  } else {
    res.p_value = std::clamp(chi_square_sf(res.statistic, kd - 1.0), 0.0, 1.0);
  }
  return res;
}

const char* to_string(Measure m) { return m == Measure::Bias ? "bias" : "std"; }

double measure_value(const EvalRecord& r, Measure m, bool raw_bias) {
  if (m == Measure::Std) return r.std;
  return raw_bias ? r.bias : std::abs(r.bias);
}

namespace {

std::vector<std::string> treatment_order(const std::vector<EvalRecord>& records) {
  std::vector<std::string> out;
  for (const auto& r : records)
    if (std::find(out.begin(), out.end(), r.splitter) == out.end()) out.push_back(r.splitter);
  return out;
}

}  // namespace

std::vector<WinCount> win_counts(const std::vector<EvalRecord>& records, Measure m) {
  require(!records.empty(), "win_counts: no records");
  const auto treatments = treatment_order(records);
  std::vector<WinCount> out;
  for (const auto& t : treatments) out.push_back({t, 0});

  using RowKey = std::tuple<std::string, std::string, int>;
  std::vector<RowKey> row_order;
  std::map<RowKey, std::map<std::string, double>> rows;
  for (const auto& r : records) {
    RowKey key{r.dataset, r.learner, r.k_splits};
    if (!rows.contains(key)) row_order.push_back(key);
    rows[key][r.splitter] = measure_value(r, m);
  }
  for (const auto& key : row_order) {
    const auto& row = rows.at(key);
    if (row.size() != treatments.size()) continue;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [_, v] : row) best = std::min(best, v);
    for (auto& w : out)
      if (row.at(w.treatment) == best) ++w.wins;
  }
  return out;
}

BlockTable build_block_table(const std::vector<EvalRecord>& records, Measure m, BlockUnit unit, bool raw_bias) {
  BlockTable t;
  t.treatments = treatment_order(records);
  std::vector<std::string> order;
  std::map<std::string, std::map<std::string, std::pair<double, int>>> acc;
  for (const auto& r : records) {
    const std::string block = unit == BlockUnit::Dataset ? r.dataset
                                                         : r.dataset + "|" + r.learner;
    if (!acc.contains(block)) order.push_back(block);
    auto& cell = acc[block][r.splitter];
    cell.first += measure_value(r, m, raw_bias);
    cell.second += 1;
  }
  for (const auto& block : order) {
    const auto& row = acc.at(block);
    if (row.size() != t.treatments.size()) continue;
    // With dataset blocks every treatment must have the same learners.
    const int count = row.begin()->second.second;
    bool complete = true;
    for (const auto& [_, c] : row) complete = complete && c.second == count;
    if (!complete) continue;
    std::vector<double> values;
    for (const auto& tr : t.treatments) values.push_back(row.at(tr).first / row.at(tr).second);
    t.blocks.push_back(block);
    t.values.push_back(std::move(values));
  }
  return t;
}

}  // namespace cbcv
