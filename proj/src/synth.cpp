#include "cbcv/synth.hpp"

#include <cmath>
#include <numeric>

namespace cbcv {

Dataset make_blobs(const BlobSpec& spec) {
  const std::size_t K = spec.class_weights.size();
  require(K >= 2, "make_blobs: need at least 2 classes");
  require(spec.n_features >= 1, "make_blobs: need at least 1 feature");
  require(spec.n_instances >= 2 * K, "make_blobs: need at least 2 instances per class");
  require(spec.clusters_per_class >= 1, "make_blobs: clusters_per_class must be positive");
  require(spec.spread >= 0 && spec.separation >= 0, "make_blobs: negative scale");
  require(spec.label_noise >= 0 && spec.label_noise < 1, "make_blobs: label_noise must be in [0, 1)");
  double wsum = 0.0;
  for (double w : spec.class_weights) {
    require(w > 0 && std::isfinite(w), "make_blobs: class weights must be positive");
    wsum += w;
  }

  // Two rows per class up front, the rest by largest remainder.
  const std::size_t free_rows = spec.n_instances - 2 * K;
  std::vector<std::size_t> counts(K, 2);
  std::vector<double> rem(K);
  std::size_t given = 0;
  for (std::size_t c = 0; c < K; ++c) {
    const double exact = static_cast<double>(free_rows) * spec.class_weights[c] / wsum;
    const auto whole = static_cast<std::size_t>(std::floor(exact));
    counts[c] += whole;
    given += whole;
    rem[c] = exact - static_cast<double>(whole);
  }
  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; given < free_rows; ++i, ++given) ++counts[order[i % K]];

  Rng rng(spec.seed);
  const std::size_t d = spec.n_features;
  const auto blobs = static_cast<std::size_t>(spec.clusters_per_class);
  Matrix centres(K * blobs, d);
  for (std::size_t b = 0; b < K * blobs; ++b)
    for (std::size_t j = 0; j < d; ++j) centres(b, j) = rng.normal() * spec.separation;

  Dataset ds;
  ds.name = spec.name;
  ds.features = Matrix(spec.n_instances, d);
  ds.labels.reserve(spec.n_instances);
  for (std::size_t c = 0; c < K; ++c) ds.class_names.push_back(std::to_string(c));
  std::size_t row = 0;
  for (std::size_t c = 0; c < K; ++c)
    for (std::size_t i = 0; i < counts[c]; ++i, ++row) {
      const std::size_t b = c * blobs + i % blobs;
      for (std::size_t j = 0; j < d; ++j) ds.features(row, j) = centres(b, j) + rng.normal() * spec.spread;
      int label = static_cast<int>(c);
      // The first two rows of a class keep their label so no class vanishes.
      if (spec.label_noise > 0 && rng.uniform01() < spec.label_noise && i >= 2) {
        const auto other = rng.uniform_index(K - 1);
        label = static_cast<int>(other >= c ? other + 1 : other);
      }
      ds.labels.push_back(label);
    }
  return ds;
}

}  // namespace cbcv
