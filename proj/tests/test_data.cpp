#include <cmath>
#include <filesystem>
#include <fstream>
#include <zlib.h>

#include "doctest.h"
#include "oracles.hpp"

#include "cbcv/data.hpp"
#include "cbcv/synth.hpp"

using namespace cbcv;

namespace {

Dataset two_class(std::size_t n0, std::size_t n1) {
  std::string text = "a\tb\ttarget\n";
  for (std::size_t i = 0; i < n0 + n1; ++i)
    text += std::to_string(i) + "\t" + std::to_string(i % 7) + "\t" + (i < n0 ? "0" : "1") + "\n";
  return parse_dataset(text, "t");
}

}  // namespace

TEST_CASE("parse: header-first TSV with the label column anywhere") {
  const Dataset ds = parse_dataset("target\tx\ty\nb\t1\t2\na\t3\t4\nb\t5\t6\n", "mini");
  CHECK(ds.n_instances() == 3);
  CHECK(ds.n_features() == 2);
  CHECK(ds.n_classes() == 2);
  CHECK(ds.class_names == std::vector<std::string>{"a", "b"});
  CHECK(ds.labels == std::vector<int>{1, 0, 1});
  CHECK(ds.features(1, 0) == 3.0);
  CHECK(ds.features(2, 1) == 6.0);
}

TEST_CASE("parse: numeric labels sort numerically, independent of row order") {
  const Dataset ds = parse_dataset("x\ttarget\n1\t10\n2\t2\n3\t-1\n4\t2\n", "num");
  CHECK(ds.class_names == std::vector<std::string>{"-1", "2", "10"});
  CHECK(ds.labels == std::vector<int>{2, 1, 0, 1});
}

TEST_CASE("parse: rows with missing cells are dropped and counted") {
  const Dataset ds = parse_dataset("x\ty\ttarget\n1\t2\t0\n?\t2\t1\n1\tNA\t1\n3\t4\t1\n\t1\t0\n5\tnan\t0\n6\t7\t0\n", "m");
  CHECK(ds.n_instances() == 3);
  CHECK(ds.rejected_rows == 4);
}

TEST_CASE("parse: malformed input is rejected with the right error kind") {
  auto kind_of = [](const std::string& text) {
    try {
      parse_dataset(text, "bad");
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Internal;
  };
  CHECK(kind_of("x\ttarget\nabc\t0\n1\t1\n") == ErrorKind::Parse);
  CHECK(kind_of("x\ttarget\n1\t0\t5\n") == ErrorKind::Parse);
  CHECK(kind_of("x\tlabel\n1\t0\n2\t1\n") == ErrorKind::Data);
  CHECK(kind_of("x\ttarget\n1\t0\n2\t0\n") == ErrorKind::Data);
  CHECK(kind_of("x\ttarget\n1\t0\n") == ErrorKind::Data);
  CHECK(kind_of("") == ErrorKind::Parse);
}

TEST_CASE("load/save round trip, plain and gzip") {
  const auto dir = std::filesystem::temp_directory_path() / "cbcv_test_data";
  std::filesystem::create_directories(dir);
  BlobSpec spec;
  spec.n_instances = 40;
  spec.seed = 3;
  const Dataset ds = make_blobs(spec);
  const auto plain = (dir / "rt.tsv").string();
  save_dataset(ds, plain);
  const Dataset back = load_dataset(plain);
  CHECK(back.name == "rt");
  CHECK(back.labels == ds.labels);
  CHECK(back.features == ds.features);  // shortest round-trip formatting

  std::ifstream in(plain);
  const std::string text((std::istreambuf_iterator<char>(in)), {});
  const auto gz = (dir / "rt2.tsv.gz").string();
  gzFile f = gzopen(gz.c_str(), "wb");
  REQUIRE(f != nullptr);
  gzwrite(f, text.data(), static_cast<unsigned>(text.size()));
  gzclose(f);
  const Dataset zipped = load_dataset(gz);
  CHECK(zipped.name == "rt2");
  CHECK(zipped.features == ds.features);

  CHECK_THROWS_AS(load_dataset((dir / "missing.tsv").string()), Error);
}

TEST_CASE("csv via delimiter and label column options") {
  LoadOptions opt;
  opt.delimiter = ',';
  opt.label_column = "class";
  const Dataset ds = parse_dataset("class,f1\nyes,1\nno,2\nyes,3\n", "csv", opt);
  CHECK(ds.n_features() == 1);
  CHECK(ds.class_names == std::vector<std::string>{"no", "yes"});
}

TEST_CASE("imbalance index: closed-form values") {
  CHECK(imbalance_index(ClassDistribution{{735, 265}, {0.735, 0.265}}) == doctest::Approx(0.2209).epsilon(1e-12));
  CHECK(imbalance_index(ClassDistribution{{985, 15}, {0.985, 0.015}}) == doctest::Approx(0.9409).epsilon(1e-12));
  CHECK(imbalance_index(ClassDistribution{{50, 50, 50}, {1.0 / 3, 1.0 / 3, 1.0 / 3}}) == doctest::Approx(0.0));
  CHECK(classify_balance(0.2209) == BalanceClass::Imbalanced);
  CHECK(classify_balance(0.20) == BalanceClass::Balanced);
  CHECK(classify_balance(two_class(50, 50)) == BalanceClass::Balanced);
  CHECK(classify_balance(two_class(74, 26)) == BalanceClass::Imbalanced);
}

TEST_CASE("imbalance index agrees with the direct formula on random distributions") {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    const std::size_t K = 2 + rng.uniform_index(6);
    ClassDistribution d;
    double total = 0;
    for (std::size_t c = 0; c < K; ++c) {
      d.counts.push_back(1 + rng.uniform_index(100));
      total += static_cast<double>(d.counts.back());
    }
    for (auto c : d.counts) d.proportions.push_back(static_cast<double>(c) / total);
    const double I = imbalance_index(d);
    CHECK(I == doctest::Approx(oracle::imbalance(d.proportions)).epsilon(1e-12));
    CHECK(I >= 0.0);
    CHECK(I <= static_cast<double>(K - 1) + 1e-12);
  }
}

TEST_CASE("standardize: zero mean, unit population variance, constant column to zero") {
  Dataset ds = parse_dataset("a\tb\ttarget\n1\t5\t0\n2\t5\t1\n3\t5\t0\n6\t5\t1\n", "s");
  const Dataset z = standardize(ds);
  double m = 0, v = 0;
  for (std::size_t i = 0; i < 4; ++i) m += z.features(i, 0);
  for (std::size_t i = 0; i < 4; ++i) v += z.features(i, 0) * z.features(i, 0);
  CHECK(m == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v / 4 == doctest::Approx(1.0));
  for (std::size_t i = 0; i < 4; ++i) CHECK(z.features(i, 1) == 0.0);
}

TEST_CASE("stratified counts: floor plus largest remainder") {
  const std::size_t sizes[] = {50, 50};
  CHECK(stratified_counts(sizes, 0.9) == std::vector<std::size_t>{45, 45});
  const std::size_t odd[] = {5, 5};
  CHECK(stratified_counts(odd, 0.9) == std::vector<std::size_t>{5, 4});
  const std::size_t three[] = {10, 7, 3};
  const auto c = stratified_counts(three, 0.5);
  CHECK(c[0] + c[1] + c[2] == 10);
  CHECK(c[0] == 5);
}

TEST_CASE("stratified subsample: per-class counts, sorted unique indices, deterministic") {
  const Dataset ds = two_class(60, 40);
  const auto a = stratified_subsample(ds, {0.9, true, 5});
  const auto b = stratified_subsample(ds, {0.9, true, 5});
  CHECK(a.indices == b.indices);
  CHECK(a.indices.size() == 90);
  CHECK(std::is_sorted(a.indices.begin(), a.indices.end()));
  CHECK(std::adjacent_find(a.indices.begin(), a.indices.end()) == a.indices.end());
  const auto dist = class_distribution(a.data);
  CHECK(dist.counts == std::vector<std::size_t>{54, 36});
  const auto c = stratified_subsample(ds, {0.9, true, 6});
  CHECK(c.indices != a.indices);
}

TEST_CASE("stratified holdout: complementary, stratified, and guarded") {
  const Dataset ds = two_class(50, 50);
  const auto h = stratified_holdout_split(ds, 0.9, 1);
  CHECK(h.train.size() == 90);
  CHECK(h.test.size() == 10);
  std::vector<std::size_t> all = h.train;
  all.insert(all.end(), h.test.begin(), h.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
  std::size_t ones = 0;
  for (auto i : h.test) ones += static_cast<std::size_t>(ds.labels[i]);
  CHECK(ones == 5);
  CHECK_THROWS_AS(stratified_holdout_split(two_class(1, 20), 0.9, 1), Error);
}
