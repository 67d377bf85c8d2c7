#include "nfisam/flow/triangular_flow.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "nfisam/core/require.hpp"
#include "nfisam/geometry/pose2.hpp"

namespace nfisam::flow {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

TriangularFlow TriangularFlow::create(int dim, std::vector<bool> circular,
                                      const FlowStructure& s, Rng& init_rng) {
  require(dim >= 1, "flow: dimension must be positive");
  require(static_cast<int>(circular.size()) == dim, "flow: circular mask size mismatch");
  require(s.knots >= 2 || s.affine, "flow: need at least 2 spline bins");

  TriangularFlow f;
  f.dim_ = dim;
  f.structure_ = s;
  f.circular_ = std::move(circular);
  f.mean_.assign(dim, 0.0);
  f.stdev_.assign(dim, 1.0);

  std::size_t base = 0;
  for (int d = 0; d < dim; ++d) {
    RowShape row;
    row.target = d;
    row.ctx_dim = d;
    row.n_pre = s.affine ? 2 : spline_preparam_count(s.knots);
    std::span<const int> hidden = s.affine ? std::span<const int>{} : std::span<const int>(s.hidden);
    row.net = MlpShape::make(d, hidden, row.n_pre, base);
    base += row.net.param_count;
    f.rows_.push_back(row);
  }
  f.params_.assign(base, 0.0);

  // start near the identity map on standardized coordinates
  std::vector<double> bias(f.rows_[0].n_pre, 0.0);
  if (!s.affine) {
    double c0 = std::log(std::expm1(1.0 - s.deriv_floor));
    for (int i = 0; i < s.knots - 1; ++i) bias[2 * s.knots + i] = c0;
  }
  for (const auto& row : f.rows_) mlp_init(row.net, f.params_, init_rng, 0.01, bias);
  return f;
}

void TriangularFlow::set_standardization(std::vector<double> mean, std::vector<double> stdev,
                                         std::vector<int> degenerate_dims) {
  require(static_cast<int>(mean.size()) == dim_ && static_cast<int>(stdev.size()) == dim_,
          "flow: standardization size mismatch");
  for (double s : stdev) require(s > 0.0, "flow: standardization stdev must be positive");
  mean_ = std::move(mean);
  stdev_ = std::move(stdev);
  degenerate_ = std::move(degenerate_dims);
}

std::vector<double> TriangularFlow::standardize(std::span<const double> raw) const {
  require(raw.size() <= static_cast<std::size_t>(dim_), "standardize: too many values");
  std::vector<double> z(raw.size());
  for (std::size_t d = 0; d < raw.size(); ++d) {
    double v = raw[d];
    if (circular_[d]) v = geometry::wrap_angle(v);
    z[d] = (v - mean_[d]) / stdev_[d];
  }
  return z;
}

void TriangularFlow::row_preparams(int r, const Mat& z, std::size_t n, Mat& h,
                                   MlpCache* cache) const {
  const RowShape& row = rows_[r];
  h = Mat(n, row.n_pre);
  if (row.ctx_dim == 0) {
    Mat dummy;
    mlp_forward(row.net, params_, dummy, h, cache);
    return;
  }
  Mat ctx(n, row.ctx_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = z.row(i);
    double* dst = ctx.row(i);
    for (int j = 0; j < row.ctx_dim; ++j) dst[j] = src[j];
  }
  mlp_forward(row.net, params_, ctx, h, cache);
}

void TriangularFlow::row_eval(int r, std::span<const double> pre, double v, double& y,
                              double& log_deriv, SplineWorkspace& ws) const {
  if (structure_.affine) {
    double shift = pre[0], rho = pre[1];
    y = std::exp(rho) * v + shift;
    log_deriv = rho;
    return;
  }
  spline_build(pre, structure_.knots, structure_.interval_bound, structure_.deriv_floor, ws);
  spline_forward(ws, v, y, log_deriv);
  (void)r;
}

double TriangularFlow::row_invert(int r, std::span<const double> pre, double y,
                                  SplineWorkspace& ws) const {
  if (structure_.affine) {
    double shift = pre[0], rho = pre[1];
    return (y - shift) * std::exp(-rho);
  }
  spline_build(pre, structure_.knots, structure_.interval_bound, structure_.deriv_floor, ws);
  (void)r;
  return spline_inverse(ws, y);
}

void TriangularFlow::row_backward(int r, std::span<const double> pre, double v, double gy,
                                  double gld, std::span<double> grad_pre,
                                  SplineWorkspace& ws) const {
  if (structure_.affine) {
    double rho = pre[1];
    grad_pre[0] += gy;
    grad_pre[1] += gy * std::exp(rho) * v + gld;
    return;
  }
  spline_build(pre, structure_.knots, structure_.interval_bound, structure_.deriv_floor, ws);
  spline_backward(ws, v, gy, gld, grad_pre);
  (void)r;
}

double TriangularFlow::forward(std::span<const double> x, std::span<double> y) const {
  require(static_cast<int>(x.size()) == dim_, "forward: dimension mismatch");
  for (double v : x) require(std::isfinite(v), "forward: non-finite input");
  Mat z(1, dim_);
  std::vector<double> zs = standardize(x);
  for (int d = 0; d < dim_; ++d) z(0, d) = zs[d];

  double logdet = 0.0;
  SplineWorkspace ws;
  Mat h;
  for (int r = 0; r < dim_; ++r) {
    row_preparams(r, z, 1, h, nullptr);
    double yr, ld;
    row_eval(r, h.row_span(0), z(0, r), yr, ld, ws);
    y[r] = yr;
    logdet += ld;
  }
  for (int d = 0; d < dim_; ++d) logdet -= std::log(stdev_[d]);
  return logdet;
}

void TriangularFlow::forward_batch(const Mat& x, Mat& y, std::vector<double>& logdet) const {
  std::size_t n = x.rows();
  require(x.cols() == static_cast<std::size_t>(dim_), "forward_batch: dimension mismatch");
  Mat z(n, dim_);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> zs = standardize({x.row(i), static_cast<std::size_t>(dim_)});
    for (int d = 0; d < dim_; ++d) z(i, d) = zs[d];
  }
  y = Mat(n, dim_);
  double std_term = 0.0;
  for (int d = 0; d < dim_; ++d) std_term -= std::log(stdev_[d]);
  logdet.assign(n, std_term);

  SplineWorkspace ws;
  Mat h;
  for (int r = 0; r < dim_; ++r) {
    row_preparams(r, z, n, h, nullptr);
    for (std::size_t i = 0; i < n; ++i) {
      double yr, ld;
      row_eval(r, h.row_span(i), z(i, r), yr, ld, ws);
      y(i, r) = yr;
      logdet[i] += ld;
    }
  }
}

void TriangularFlow::inverse(std::span<const double> y, std::span<double> x) const {
  require(static_cast<int>(y.size()) == dim_, "inverse: dimension mismatch");
  Mat z(1, dim_);
  SplineWorkspace ws;
  Mat h;
  for (int r = 0; r < dim_; ++r) {
    row_preparams(r, z, 1, h, nullptr);
    z(0, r) = row_invert(r, h.row_span(0), y[r], ws);
  }
  for (int d = 0; d < dim_; ++d) {
    double raw = mean_[d] + stdev_[d] * z(0, d);
    x[d] = circular_[d] ? geometry::wrap_angle(raw) : raw;
  }
}

Mat TriangularFlow::conditional_sample(std::span<const double> prefix, std::size_t n,
                                       Rng& rng) const {
  Mat pre(n, prefix.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < prefix.size(); ++j) pre(i, j) = prefix[j];
  return conditional_sample_rows(pre, rng);
}

Mat TriangularFlow::conditional_sample_rows(const Mat& prefix, Rng& rng) const {
  std::size_t m = prefix.cols();
  std::size_t n = prefix.rows();
  require(m < static_cast<std::size_t>(dim_), "conditional_sample: prefix covers all dims");
  require(n > 0, "conditional_sample: empty prefix");

  Mat z(n, dim_);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> zs = standardize({prefix.row(i), m});
    for (std::size_t j = 0; j < m; ++j) z(i, j) = zs[j];
  }
  // reference draws, sample-major for a stable stream order
  Mat yref(n, dim_ - m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j + m < static_cast<std::size_t>(dim_); ++j)
      yref(i, j) = rng.normal();

  SplineWorkspace ws;
  Mat h;
  for (int r = static_cast<int>(m); r < dim_; ++r) {
    row_preparams(r, z, n, h, nullptr);
    for (std::size_t i = 0; i < n; ++i)
      z(i, r) = row_invert(r, h.row_span(i), yref(i, r - m), ws);
  }

  Mat out(n, dim_ - m);
  for (std::size_t i = 0; i < n; ++i) {
    for (int d = static_cast<int>(m); d < dim_; ++d) {
      double raw = mean_[d] + stdev_[d] * z(i, d);
      out(i, d - m) = circular_[d] ? geometry::wrap_angle(raw) : raw;
    }
  }
  return out;
}

double TriangularFlow::log_density(std::span<const double> x) const {
  std::vector<double> y(dim_);
  double logdet = forward(x, y);
  double q = -0.5 * dim_ * kLog2Pi;
  for (double v : y) q -= 0.5 * v * v;
  return q + logdet;
}

// --- serialization (hexfloat text; round-trips bit-exactly) ---

namespace {

void put_hex(std::ostream& out, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  out << buf;
}

double get_hex(std::istream& in, const char* what) {
  std::string tok;
  require(static_cast<bool>(in >> tok), std::string("flow load: missing value for ") + what);
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  require(end && *end == '\0', std::string("flow load: bad value for ") + what);
  return v;
}

}  // namespace

void TriangularFlow::save(std::ostream& out) const {
  out << "nfisam-flow 1\n";
  out << "dim " << dim_ << "\n";
  out << "affine " << (structure_.affine ? 1 : 0) << "\n";
  out << "knots " << structure_.knots << "\n";
  out << "deriv_floor ";
  put_hex(out, structure_.deriv_floor);
  out << "\nbound ";
  put_hex(out, structure_.interval_bound);
  out << "\nhidden " << structure_.hidden.size();
  for (int h : structure_.hidden) out << ' ' << h;
  out << "\ncircular";
  for (bool c : circular_) out << ' ' << (c ? 1 : 0);
  out << "\nmean";
  for (double v : mean_) {
    out << ' ';
    put_hex(out, v);
  }
  out << "\nstd";
  for (double v : stdev_) {
    out << ' ';
    put_hex(out, v);
  }
  out << "\ndegenerate " << degenerate_.size();
  for (int d : degenerate_) out << ' ' << d;
  out << "\nobjective ";
  put_hex(out, final_objective);
  out << "\nparams " << params_.size() << "\n";
  for (std::size_t i = 0; i < params_.size(); ++i) {
    put_hex(out, params_[i]);
    out << ((i % 8 == 7 || i + 1 == params_.size()) ? '\n' : ' ');
  }
  out << "end\n";
}

TriangularFlow TriangularFlow::load(std::istream& in) {
  std::string tag;
  int version = 0;
  in >> tag >> version;
  require(tag == "nfisam-flow" && version == 1, "flow load: bad header");

  auto expect = [&](const char* name) {
    std::string t;
    require(static_cast<bool>(in >> t) && t == name,
            std::string("flow load: expected field ") + name);
  };

  int dim = 0;
  expect("dim");
  in >> dim;
  FlowStructure s;
  int affine = 0;
  expect("affine");
  in >> affine;
  s.affine = affine != 0;
  expect("knots");
  in >> s.knots;
  expect("deriv_floor");
  s.deriv_floor = get_hex(in, "deriv_floor");
  expect("bound");
  s.interval_bound = get_hex(in, "bound");
  expect("hidden");
  std::size_t nh = 0;
  in >> nh;
  s.hidden.resize(nh);
  for (auto& h : s.hidden) in >> h;
  expect("circular");
  std::vector<bool> circular(dim);
  for (int d = 0; d < dim; ++d) {
    int c;
    in >> c;
    circular[d] = c != 0;
  }

  Rng dummy(0);
  TriangularFlow f = create(dim, circular, s, dummy);

  expect("mean");
  std::vector<double> mean(dim), stdev(dim);
  for (auto& v : mean) v = get_hex(in, "mean");
  expect("std");
  for (auto& v : stdev) v = get_hex(in, "std");
  expect("degenerate");
  std::size_t nd = 0;
  in >> nd;
  std::vector<int> degen(nd);
  for (auto& d : degen) in >> d;
  f.set_standardization(std::move(mean), std::move(stdev), std::move(degen));
  expect("objective");
  f.final_objective = get_hex(in, "objective");
  expect("params");
  std::size_t np = 0;
  in >> np;
  require(np == f.params_.size(), "flow load: parameter count mismatch");
  for (auto& p : f.params_) p = get_hex(in, "params");
  expect("end");
  return f;
}

}  // namespace nfisam::flow
