#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nfisam/core/mat.hpp"
#include "nfisam/core/random.hpp"

namespace nfisam::flow {

// Fully connected conditioner network. Parameters live in an external flat
// vector (one per flow) so the optimizer sees a single parameter array;
// the shape only records offsets. Hidden layers use softplus, the output
// layer is linear. An input dimension of zero degenerates to a trainable
// constant output (the bias of the single layer), which is exactly the
// unconditioned first flow row.
struct LinearShape {
  int in = 0, out = 0;
  std::size_t w_off = 0, b_off = 0;
};

struct MlpShape {
  int input_dim = 0;
  int output_dim = 0;
  std::vector<LinearShape> layers;
  std::size_t param_base = 0;   // offset of this net's block in flow params
  std::size_t param_count = 0;

  // layout layers for input->hidden...->output; offsets relative to base
  static MlpShape make(int input_dim, std::span<const int> hidden, int output_dim,
                       std::size_t base);
};

// batch activations kept for the backward pass
struct MlpCache {
  std::vector<Mat> pre;  // pre-activations per hidden layer
  std::vector<Mat> act;  // post-activations per hidden layer
};

// x: [n x input_dim] (ignored when input_dim == 0); out: [n x output_dim]
void mlp_forward(const MlpShape& shape, std::span<const double> params, const Mat& x,
                 Mat& out, MlpCache* cache);

// dout: [n x output_dim]; accumulates into grad (same layout as params)
void mlp_backward(const MlpShape& shape, std::span<const double> params, const Mat& x,
                  const MlpCache& cache, const Mat& dout, std::span<double> grad);

// weight init: hidden layers ~ N(0, 1/in); output layer weights scaled
// small and bias set to out_bias so training starts near a chosen map
void mlp_init(const MlpShape& shape, std::span<double> params, Rng& rng,
              double out_weight_scale, std::span<const double> out_bias);

}  // namespace nfisam::flow
