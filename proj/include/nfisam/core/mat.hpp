#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nfisam/core/require.hpp"

namespace nfisam {

// Dense row-major matrix of doubles. Deliberately minimal: the flow code
// operates on raw rows through the kernel layer, so this is storage plus
// bounds-checked access, not a linear-algebra type.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), d_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return d_.empty(); }

  double* row(std::size_t i) { return d_.data() + i * cols_; }
  const double* row(std::size_t i) const { return d_.data() + i * cols_; }
  std::span<double> row_span(std::size_t i) { return {row(i), cols_}; }
  std::span<const double> row_span(std::size_t i) const { return {row(i), cols_}; }

  double& operator()(std::size_t i, std::size_t j) { return d_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * cols_ + j]; }

  double* data() { return d_.data(); }
  const double* data() const { return d_.data(); }

  std::vector<double> col(std::size_t j) const {
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = d_[i * cols_ + j];
    return out;
  }

  void set_col(std::size_t j, const std::vector<double>& v) {
    require(v.size() == rows_, "Mat::set_col: length mismatch");
    for (std::size_t i = 0; i < rows_; ++i) d_[i * cols_ + j] = v[i];
  }

  void fill(double v) { d_.assign(d_.size(), v); }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> d_;
};

}  // namespace nfisam
