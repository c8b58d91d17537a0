#pragma once

// Seeded synthetic classification data: Gaussian blobs, several per class.

#include <cstdint>
#include <string>
#include <vector>

#include "cbcv/data.hpp"

namespace cbcv {

struct BlobSpec {
  std::string name = "blobs";
  std::size_t n_instances = 200;
  std::size_t n_features = 4;
  /// Relative class sizes; normalized internally. Each class gets >= 2 rows.
  std::vector<double> class_weights{0.5, 0.5};
  int clusters_per_class = 2;
  /// Standard deviation of the blob centres around the origin.
  double separation = 4.0;
  /// Standard deviation of points around their centre.
  double spread = 1.0;
  /// Probability that a row's label is replaced by a uniformly drawn other class.
  double label_noise = 0.0;
  std::uint64_t seed = 0;
};

/// Rows are ordered class by class; within a class, blob members interleave.
Dataset make_blobs(const BlobSpec& spec);

}  // namespace cbcv
