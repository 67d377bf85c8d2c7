#include "nfisam/flow/mlp.hpp"

#include <cmath>

#include "nfisam/core/require.hpp"
#include "nfisam/kernels/kernels.hpp"

namespace nfisam::flow {

MlpShape MlpShape::make(int input_dim, std::span<const int> hidden, int output_dim,
                        std::size_t base) {
  MlpShape s;
  s.input_dim = input_dim;
  s.output_dim = output_dim;
  s.param_base = base;
  std::size_t off = 0;
  int prev = input_dim;
  auto push = [&](int in, int out) {
    LinearShape l{in, out, off, off + static_cast<std::size_t>(in) * out};
    off = l.b_off + out;
    s.layers.push_back(l);
  };
  if (input_dim == 0) {
    push(0, output_dim);  // bias-only constant head
  } else {
    for (int h : hidden) {
      push(prev, h);
      prev = h;
    }
    push(prev, output_dim);
  }
  s.param_count = off;
  return s;
}

void mlp_forward(const MlpShape& shape, std::span<const double> params, const Mat& x,
                 Mat& out, MlpCache* cache) {
  const auto& k = kernels::active();
  const double* base = params.data() + shape.param_base;
  std::size_t n = shape.input_dim == 0 ? out.rows() : x.rows();
  require(n > 0, "mlp_forward: empty batch");

  if (cache) {
    cache->pre.clear();
    cache->act.clear();
  }

  if (shape.input_dim == 0) {
    const LinearShape& l = shape.layers[0];
    const double* b = base + l.b_off;
    for (std::size_t i = 0; i < n; ++i)
      for (int j = 0; j < l.out; ++j) out(i, j) = b[j];
    return;
  }

  const Mat* cur = &x;
  Mat held;  // keeps the previous layer's activations alive
  for (std::size_t li = 0; li < shape.layers.size(); ++li) {
    const LinearShape& l = shape.layers[li];
    bool last = li + 1 == shape.layers.size();
    Mat z(n, l.out);
    // z = cur * W^T  (W is out x in row-major)
    k.matmul_nt(cur->data(), n, base + l.w_off, l.out, l.in, z.data(), false);
    const double* b = base + l.b_off;
    for (std::size_t i = 0; i < n; ++i) {
      double* row = z.row(i);
      for (int j = 0; j < l.out; ++j) row[j] += b[j];
    }
    if (last) {
      out = std::move(z);
      break;
    }
    Mat act(n, l.out);
    k.softplus(z.data(), act.data(), n * l.out);
    if (cache) {
      cache->pre.push_back(std::move(z));
      cache->act.push_back(act);
    }
    held = std::move(act);
    cur = &held;
  }
}

void mlp_backward(const MlpShape& shape, std::span<const double> params, const Mat& x,
                  const MlpCache& cache, const Mat& dout, std::span<double> grad) {
  const auto& k = kernels::active();
  const double* base = params.data() + shape.param_base;
  double* gbase = grad.data() + shape.param_base;
  std::size_t n = dout.rows();

  if (shape.input_dim == 0) {
    const LinearShape& l = shape.layers[0];
    double* gb = gbase + l.b_off;
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = dout.row(i);
      for (int j = 0; j < l.out; ++j) gb[j] += row[j];
    }
    return;
  }

  Mat delta = dout;
  for (int li = static_cast<int>(shape.layers.size()) - 1; li >= 0; --li) {
    const LinearShape& l = shape.layers[li];
    const Mat& input = li == 0 ? x : cache.act[li - 1];

    // grad W: sum of outer products delta_i^T * input_i
    double* gw = gbase + l.w_off;
    double* gb = gbase + l.b_off;
    for (std::size_t i = 0; i < n; ++i) {
      const double* di = delta.row(i);
      const double* xi = input.row(i);
      for (int o = 0; o < l.out; ++o) {
        if (di[o] != 0.0) k.axpy(gw + static_cast<std::size_t>(o) * l.in, di[o], xi, l.in);
        gb[o] += di[o];
      }
    }

    if (li == 0) break;

    // delta_prev = (delta * W) .hadamard sigmoid(pre)
    Mat dprev(n, l.in, 0.0);
    const double* w = base + l.w_off;
    for (std::size_t i = 0; i < n; ++i) {
      const double* di = delta.row(i);
      double* dp = dprev.row(i);
      for (int o = 0; o < l.out; ++o)
        if (di[o] != 0.0) k.axpy(dp, di[o], w + static_cast<std::size_t>(o) * l.in, l.in);
    }
    const Mat& pre = cache.pre[li - 1];
    Mat sig(n, l.in);
    k.sigmoid(pre.data(), sig.data(), n * l.in);
    for (std::size_t i = 0; i < n * static_cast<std::size_t>(l.in); ++i)
      dprev.data()[i] *= sig.data()[i];
    delta = std::move(dprev);
  }
}

void mlp_init(const MlpShape& shape, std::span<double> params, Rng& rng,
              double out_weight_scale, std::span<const double> out_bias) {
  double* base = params.data() + shape.param_base;
  for (std::size_t li = 0; li < shape.layers.size(); ++li) {
    const LinearShape& l = shape.layers[li];
    bool last = li + 1 == shape.layers.size();
    double scale = l.in > 0 ? 1.0 / std::sqrt(static_cast<double>(l.in)) : 0.0;
    if (last) scale *= out_weight_scale;
    for (int i = 0; i < l.in * l.out; ++i) base[l.w_off + i] = scale * rng.normal();
    for (int j = 0; j < l.out; ++j)
      base[l.b_off + j] = last && !out_bias.empty() ? out_bias[j] : 0.0;
  }
}

}  // namespace nfisam::flow
