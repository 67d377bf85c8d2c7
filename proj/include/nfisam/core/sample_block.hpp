#pragma once

#include <string>
#include <vector>

#include "nfisam/core/mat.hpp"

namespace nfisam {

struct ColumnKey {
  std::string label;      // e.g. "X0.x", "X0.theta", "f4.obs0"
  bool circular = false;  // angular dimension, wrapped to [-pi, pi)
};

// A matrix of samples: rows are draws, columns are flattened scalar
// dimensions with a label per column.
struct SampleBlock {
  Mat data;
  std::vector<ColumnKey> cols;

  std::size_t rows() const { return data.rows(); }
  std::size_t dims() const { return data.cols(); }

  int find_col(const std::string& label) const {
    for (std::size_t j = 0; j < cols.size(); ++j)
      if (cols[j].label == label) return static_cast<int>(j);
    return -1;
  }
};

}  // namespace nfisam
