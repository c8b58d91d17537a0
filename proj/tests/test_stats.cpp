#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

#include "cbcv/stats.hpp"

using namespace cbcv;

namespace {

BlockTable table(std::vector<std::vector<double>> v) {
  BlockTable t;
  for (std::size_t i = 0; i < v.size(); ++i) t.blocks.push_back("b" + std::to_string(i));
  for (std::size_t j = 0; j < v[0].size(); ++j) t.treatments.push_back("t" + std::to_string(j));
  t.values = std::move(v);
  return t;
}

EvalRecord rec(std::string ds, std::string learner, std::string splitter, double bias, double sd, int k = 2) {
  EvalRecord r;
  r.dataset = std::move(ds);
  r.learner = std::move(learner);
  r.splitter = std::move(splitter);
  r.k_splits = k;
  r.bias = bias;
  r.std = sd;
  return r;
}

}  // namespace

TEST_CASE("average ranks with ties") {
  const std::vector<double> row{3, 1, 3, 2};
  CHECK(average_ranks(row) == std::vector<double>{3.5, 1, 3.5, 2});
}

TEST_CASE("friedman statistic agrees with the definition, with and without ties") {
  Rng rng(4);
  for (int t = 0; t < 30; ++t) {
    std::vector<std::vector<double>> v(3 + rng.uniform_index(6), std::vector<double>(2 + rng.uniform_index(4)));
    for (auto& row : v)
      for (auto& x : row) x = static_cast<double>(rng.uniform_index(4));
    const auto r = friedman_test(table(v), PValueMethod::ChiSquare);
    CHECK(r.statistic == doctest::Approx(oracle::friedman_statistic(v)).epsilon(1e-12));
    CHECK(!r.exact);
  }
}

TEST_CASE("friedman exact p matches full permutation enumeration on small tables") {
  Rng rng(19);
  for (int t = 0; t < 10; ++t) {
    std::vector<std::vector<double>> v(3, std::vector<double>(3));
    for (auto& row : v)
      for (auto& x : row) x = rng.uniform01();
    const auto r = friedman_test(table(v));
    CHECK(r.exact);
    CHECK(r.p_value == doctest::Approx(oracle::friedman_permutation_p(v)).epsilon(1e-9));
  }
}

TEST_CASE("friedman: perfectly consistent ranking, identical rows, and chi-square tail") {
  const auto r = friedman_test(table({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}, {1, 2, 3}}), PValueMethod::ChiSquare);
  CHECK(r.statistic == doctest::Approx(8.0));
  CHECK(r.p_value == doctest::Approx(std::exp(-4.0)));
  const auto flat = friedman_test(table({{0.1, 0.1, 0.1}, {0.3, 0.3, 0.3}}));
  CHECK(flat.statistic == 0.0);
  CHECK(flat.p_value == 1.0);
  CHECK(chi_square_sf(0.0, 3) == 1.0);
  CHECK(chi_square_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK_THROWS_AS(friedman_test(table({{1, 2, 3}})), Error);
}

TEST_CASE("win counts: smallest |bias| or std wins, ties all win") {
  std::vector<EvalRecord> rs{rec("d1", "l", "a", -0.01, 0.2), rec("d1", "l", "b", 0.02, 0.1),
                             rec("d2", "l", "a", 0.05, 0.1),  rec("d2", "l", "b", -0.05, 0.3),
                             rec("d3", "l", "a", 0.2, 0.1)};
  const auto bias = win_counts(rs, Measure::Bias);
  REQUIRE(bias.size() == 2);
  CHECK(bias[0].treatment == "a");
  CHECK(bias[0].wins == 2);
  CHECK(bias[1].wins == 1);
  const auto sd = win_counts(rs, Measure::Std);
  CHECK(sd[0].wins == 1);
  CHECK(sd[1].wins == 1);
}

TEST_CASE("block tables: complete rows only, dataset blocks average over learners") {
  std::vector<EvalRecord> rs{rec("d1", "l1", "a", 0.1, 0), rec("d1", "l1", "b", -0.3, 0),
                             rec("d1", "l2", "a", 0.3, 0), rec("d1", "l2", "b", 0.1, 0),
                             rec("d2", "l1", "a", 0.5, 0)};
  const auto t = build_block_table(rs, Measure::Bias, BlockUnit::DatasetLearner);
  CHECK(t.blocks.size() == 2);
  CHECK(t.values[0] == std::vector<double>{0.1, 0.3});
  const auto raw = build_block_table(rs, Measure::Bias, BlockUnit::DatasetLearner, true);
  CHECK(raw.values[0][1] == -0.3);
  const auto byds = build_block_table(rs, Measure::Bias, BlockUnit::Dataset);
  REQUIRE(byds.blocks.size() == 1);
  CHECK(byds.values[0][0] == doctest::Approx(0.2));
  CHECK(byds.values[0][1] == doctest::Approx(0.2));
}
