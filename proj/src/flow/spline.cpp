#include "nfisam/flow/spline.hpp"

#include <algorithm>
#include <cmath>

#include "nfisam/core/require.hpp"

namespace nfisam::flow {
namespace {

// Each bin keeps at least this fraction of the interval so extreme logits
// cannot collapse a bin below floating-point resolution mid-training.
constexpr double kMinBinFraction = 1e-4;

void scaled_softmax(std::span<const double> raw, std::vector<double>& soft) {
  soft.resize(raw.size());
  double mx = *std::max_element(raw.begin(), raw.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    soft[i] = std::exp(raw[i] - mx);
    sum += soft[i];
  }
  for (auto& s : soft) s /= sum;
}

int find_bin(const std::vector<double>& knots, double v) {
  auto it = std::upper_bound(knots.begin(), knots.end(), v);
  int k = static_cast<int>(it - knots.begin()) - 1;
  return std::clamp(k, 0, static_cast<int>(knots.size()) - 2);
}

}  // namespace

int spline_preparam_count(int bins) { return 3 * bins - 1; }

void spline_build(std::span<const double> raw, int bins, double bound, double deriv_floor,
                  SplineWorkspace& w) {
  require(static_cast<int>(raw.size()) == spline_preparam_count(bins),
          "spline_build: pre-parameter count mismatch");
  w.bins = bins;
  w.bound = bound;
  w.deriv_floor = deriv_floor;

  scaled_softmax(raw.subspan(0, bins), w.soft_w);
  scaled_softmax(raw.subspan(bins, bins), w.soft_h);

  w.xs.resize(bins + 1);
  w.ys.resize(bins + 1);
  w.xs[0] = -bound;
  w.ys[0] = -bound;
  double floor_w = 2.0 * bound * kMinBinFraction;
  double scale = 2.0 * bound * (1.0 - bins * kMinBinFraction);
  for (int i = 0; i < bins; ++i) {
    w.xs[i + 1] = w.xs[i] + floor_w + scale * w.soft_w[i];
    w.ys[i + 1] = w.ys[i] + floor_w + scale * w.soft_h[i];
  }
  w.xs[bins] = bound;  // kill cumulative rounding at the pinned end
  w.ys[bins] = bound;

  w.derivs.assign(bins + 1, 1.0);
  for (int i = 1; i < bins; ++i) {
    double c = raw[2 * bins + i - 1];
    double sp = (c > 0.0 ? c : 0.0) + std::log1p(std::exp(-std::fabs(c)));
    w.derivs[i] = deriv_floor + sp;
  }
}

void spline_forward(const SplineWorkspace& w, double x, double& y, double& log_deriv) {
  if (x <= -w.bound || x >= w.bound) {
    y = x;
    log_deriv = 0.0;
    return;
  }
  int k = find_bin(w.xs, x);
  double wk = w.xs[k + 1] - w.xs[k];
  double dy = w.ys[k + 1] - w.ys[k];
  double s = dy / wk;
  double xi = (x - w.xs[k]) / wk;
  double u = xi * (1.0 - xi);
  double dk = w.derivs[k], dk1 = w.derivs[k + 1];
  double m = dk1 + dk - 2.0 * s;
  double den = s + m * u;
  double num = dy * (s * xi * xi + dk * u);
  y = w.ys[k] + num / den;
  double p = dk1 * xi * xi + 2.0 * s * u + dk * (1.0 - xi) * (1.0 - xi);
  log_deriv = 2.0 * std::log(s) + std::log(p) - 2.0 * std::log(den);
}

double spline_inverse(const SplineWorkspace& w, double y) {
  if (y <= -w.bound || y >= w.bound) return y;
  int k = find_bin(w.ys, y);
  double wk = w.xs[k + 1] - w.xs[k];
  double dy = w.ys[k + 1] - w.ys[k];
  double s = dy / wk;
  double dk = w.derivs[k], dk1 = w.derivs[k + 1];
  double m = dk1 + dk - 2.0 * s;
  double yr = y - w.ys[k];
  double a = dy * (s - dk) + yr * m;
  double b = dy * dk - yr * m;
  double c = -s * yr;
  // stable quadratic root in [0, 1]
  double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) disc = 0.0;
  double xi = 2.0 * c / (-b - std::sqrt(disc));
  xi = std::clamp(xi, 0.0, 1.0);
  return w.xs[k] + xi * wk;
}

void spline_backward(const SplineWorkspace& w, double x, double gy, double gld,
                     std::span<double> grad_raw) {
  if (x <= -w.bound || x >= w.bound) return;
  int bins = w.bins;
  int k = find_bin(w.xs, x);
  double wk = w.xs[k + 1] - w.xs[k];
  double dy = w.ys[k + 1] - w.ys[k];
  double s = dy / wk;
  double xi = (x - w.xs[k]) / wk;
  double u = xi * (1.0 - xi);
  double dk = w.derivs[k], dk1 = w.derivs[k + 1];
  double m = dk1 + dk - 2.0 * s;
  double den = s + m * u;
  double num = dy * (s * xi * xi + dk * u);
  double p = dk1 * xi * xi + 2.0 * s * u + dk * (1.0 - xi) * (1.0 - xi);

  // reverse pass through y = yk + num/den and
  // log_deriv = 2 log s + log p - 2 log den
  double gnum = gy / den;
  double gden = -gy * num / (den * den) - 2.0 * gld / den;
  double gp = gld / p;
  double gs = 2.0 * gld / s;
  double gyk = gy;

  double gdy = gnum * (s * xi * xi + dk * u);
  gs += gnum * dy * xi * xi;
  double gdk = gnum * dy * u;
  double gxi = gnum * dy * s * 2.0 * xi;
  double gu = gnum * dy * dk;

  gs += gden;
  double gm = gden * u;
  gu += gden * m;

  double gdk1 = gp * xi * xi;
  gs += gp * 2.0 * u;
  gu += gp * 2.0 * s;
  gdk += gp * (1.0 - xi) * (1.0 - xi);
  gxi += gp * (2.0 * dk1 * xi - 2.0 * dk * (1.0 - xi));

  gdk1 += gm;
  gdk += gm;
  gs += -2.0 * gm;

  gxi += gu * (1.0 - 2.0 * xi);

  gdy += gs / wk;
  double gwk = -gs * s / wk;

  double gxk = -gxi / wk;
  gwk += -gxi * xi / wk;

  // cumulative knots: xk depends on widths 0..k-1, wk is width k
  // (same shape for heights through yk and dy)
  std::vector<double> gw_vec(bins, 0.0), gh_vec(bins, 0.0);
  for (int j = 0; j < k; ++j) {
    gw_vec[j] += gxk;
    gh_vec[j] += gyk;
  }
  gw_vec[k] += gwk;
  gh_vec[k] += gdy;

  // widths = floor + scale * softmax(a); heights likewise
  double scale = 2.0 * w.bound * (1.0 - bins * kMinBinFraction);
  double dot_w = 0.0, dot_h = 0.0;
  for (int j = 0; j < bins; ++j) {
    dot_w += gw_vec[j] * scale * w.soft_w[j];
    dot_h += gh_vec[j] * scale * w.soft_h[j];
  }
  for (int j = 0; j < bins; ++j) {
    grad_raw[j] += w.soft_w[j] * (gw_vec[j] * scale - dot_w);
    grad_raw[bins + j] += w.soft_h[j] * (gh_vec[j] * scale - dot_h);
  }

  // derivatives: softplus + floor on interior knots only
  auto add_deriv_grad = [&](int knot, double g) {
    if (knot == 0 || knot == bins) return;  // pinned
    // grad through softplus: sigmoid of the raw value; recover raw from
    // the stored derivative is ill-posed, so recompute sigmoid from
    // derivs: softplus'(c) = 1 - exp(-(d - floor)) is exact since
    // softplus(c) = d - floor  =>  sigmoid(c) = 1 - exp(-(d - floor)).
    double sp = w.derivs[knot] - w.deriv_floor;
    double sig = 1.0 - std::exp(-sp);
    grad_raw[2 * bins + knot - 1] += g * sig;
  };
  add_deriv_grad(k, gdk);
  add_deriv_grad(k + 1, gdk1);
}

}  // namespace nfisam::flow
