#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "badm/errors.hpp"

namespace badm {

// Fixed sample set: N rows of d features plus either integer class labels
// (n_classes > 0) or real regression targets (n_classes == 0).
struct Dataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> features;     // n x d, row-major
  std::vector<int> labels;          // classification only
  std::vector<double> targets;      // regression only
  int n_classes = 0;                // 0 means regression

  bool classification() const { return n_classes > 0; }

  const double* row(std::size_t i) const { return features.data() + i * d; }

  void validate() const {
    detail::require(n >= 1, "Dataset: need at least one sample");
    detail::require(features.size() == n * d, "Dataset: feature buffer size mismatch");
    for (double x : features)
      if (!std::isfinite(x)) throw DataError("Dataset: non-finite feature value");
    if (classification()) {
      detail::require(labels.size() == n, "Dataset: label count mismatch");
      for (int y : labels)
        detail::require(y >= 0 && y < n_classes, "Dataset: class id out of range");
    } else {
      detail::require(targets.size() == n, "Dataset: target count mismatch");
      for (double y : targets)
        if (!std::isfinite(y)) throw DataError("Dataset: non-finite target value");
    }
  }
};

// Strictly increasing, nonempty set of sample indices into a Dataset.
struct IndexSet {
  std::vector<std::size_t> idx;

  static IndexSet full(std::size_t n) {
    IndexSet s;
    s.idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.idx[i] = i;
    return s;
  }

  static IndexSet checked(std::vector<std::size_t> indices, std::size_t n) {
    IndexSet s{std::move(indices)};
    s.validate(n);
    return s;
  }

  std::size_t size() const { return idx.size(); }
  auto begin() const { return idx.begin(); }
  auto end() const { return idx.end(); }

  void validate(std::size_t n) const {
    detail::require(!idx.empty(), "IndexSet: must be nonempty");
    for (std::size_t i = 0; i < idx.size(); ++i) {
      detail::require(idx[i] < n, "IndexSet: index out of range");
      if (i > 0) detail::require(idx[i - 1] < idx[i], "IndexSet: indices must be strictly increasing");
    }
  }
};

}  // namespace badm
