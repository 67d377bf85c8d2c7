#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "nfisam/core/mat.hpp"
#include "nfisam/core/random.hpp"
#include "nfisam/flow/mlp.hpp"
#include "nfisam/flow/spline.hpp"

namespace nfisam::flow {

// Structural choices for a flow; everything else is learned.
struct FlowStructure {
  int knots = 6;                    // spline bin count per row
  std::vector<int> hidden = {32, 32};
  double interval_bound = 5.0;      // spline domain [-B, B] after standardization
  double deriv_floor = 1e-3;
  bool affine = false;              // affine rows instead of splines
};

struct RowShape {
  int target = 0;   // column this row transforms
  int ctx_dim = 0;  // conditioner reads columns [0, ctx_dim)
  int n_pre = 0;
  MlpShape net;
};

// Lower-triangular map to a standard Gaussian reference. Row d transforms
// standardized coordinate d, with spline (or affine) parameters emitted by
// a conditioner over the preceding standardized coordinates. A frozen
// per-dimension affine standardization is applied first; circular
// dimensions are wrapped to [-pi, pi) before standardization.
class TriangularFlow {
 public:
  TriangularFlow() = default;
  static TriangularFlow create(int dim, std::vector<bool> circular, const FlowStructure& s,
                               Rng& init_rng);

  int dim() const { return dim_; }
  const FlowStructure& structure() const { return structure_; }
  const std::vector<RowShape>& rows() const { return rows_; }
  const std::vector<bool>& circular() const { return circular_; }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stdev() const { return stdev_; }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  void set_standardization(std::vector<double> mean, std::vector<double> stdev,
                           std::vector<int> degenerate_dims);

  double final_objective = std::numeric_limits<double>::quiet_NaN();
  const std::vector<int>& degenerate_dims() const { return degenerate_; }

  // y = T(x), returns log|T'(x)| including the standardization term.
  // Circular dimensions of x must be pre-wrapped; x must be finite.
  double forward(std::span<const double> x, std::span<double> y) const;
  void forward_batch(const Mat& x, Mat& y, std::vector<double>& logdet) const;

  // x = T^{-1}(y), sequential per-dimension inversion
  void inverse(std::span<const double> y, std::span<double> x) const;

  // Draw n samples of dimensions [m, D) given the first m raw coordinates.
  Mat conditional_sample(std::span<const double> prefix, std::size_t n, Rng& rng) const;
  // One draw per row of the prefix matrix (prefix row i conditions draw i).
  Mat conditional_sample_rows(const Mat& prefix, Rng& rng) const;

  // log density of x under the flow-transported reference
  double log_density(std::span<const double> x) const;

  // standardize a raw prefix (wrap circular dims first)
  std::vector<double> standardize(std::span<const double> raw) const;

  void save(std::ostream& out) const;
  static TriangularFlow load(std::istream& in);

  // --- internals shared with the trainer ---
  // conditioner outputs for row r over standardized data Z (first ctx cols used)
  void row_preparams(int r, const Mat& z, std::size_t n, Mat& h, MlpCache* cache) const;
  // forward through row r's 1-d transform
  void row_eval(int r, std::span<const double> pre, double v, double& y, double& log_deriv,
                SplineWorkspace& ws) const;
  double row_invert(int r, std::span<const double> pre, double y, SplineWorkspace& ws) const;
  void row_backward(int r, std::span<const double> pre, double v, double gy, double gld,
                    std::span<double> grad_pre, SplineWorkspace& ws) const;

 private:
  int dim_ = 0;
  FlowStructure structure_;
  std::vector<bool> circular_;
  std::vector<double> mean_, stdev_;
  std::vector<int> degenerate_;
  std::vector<RowShape> rows_;
  std::vector<double> params_;
};

}  // namespace nfisam::flow
