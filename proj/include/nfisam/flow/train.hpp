#pragma once

#include <cstdint>
#include <vector>

#include "nfisam/core/sample_block.hpp"
#include "nfisam/flow/triangular_flow.hpp"

namespace nfisam::flow {

struct FlowTrainConfig {
  int knots = 6;
  std::vector<int> hidden = {32, 32};
  double interval_bound = 5.0;
  double deriv_floor = 1e-3;
  bool affine_only = false;

  int epochs = 400;
  int batch = 128;
  double step = 5e-3;      // Adam step size
  int plateau_epochs = 20; // early stop when the best objective stalls this long
  int min_epochs = 60;
  double std_floor = 1e-8; // clamp for zero-variance columns

  std::uint64_t seed = 0;
};

struct TrainDiagnostics {
  std::vector<double> epoch_objective;  // per-epoch mean of the trained objective
  int epochs_run = 0;
  std::vector<int> degenerate_dims;     // columns whose stdev hit the floor
};

// Fit a triangular flow to the samples by stochastic ascent on the
// Monte-Carlo KL objective mean[log q(T(x)) + log|T'(x)|]. Standardization
// is frozen from the sample moments before training. Circular columns are
// wrapped before standardization.
TriangularFlow train_flow(const SampleBlock& samples, const FlowTrainConfig& cfg,
                          TrainDiagnostics* diag = nullptr);

enum class ObjectiveTerm { Both, LogQOnly, LogDetOnly };

// Mean objective over the raw batch; when grad is non-null the analytic
// gradient with respect to flow.params() is accumulated there (ascent
// direction). Exposed for the optimizer and for finite-difference checks.
double flow_objective(const TriangularFlow& flow, const Mat& raw_batch, ObjectiveTerm term,
                      std::vector<double>* grad);

}  // namespace nfisam::flow
