#pragma once

#include <span>
#include <vector>

namespace nfisam::flow {

// Monotone rational-quadratic spline on [-B, B] with identity tails.
//
// A spline with K bins is produced from 3K-1 unconstrained pre-parameters:
// K bin-width logits (normalized-exponential, scaled to 2B), K bin-height
// logits (same), and K-1 interior knot derivatives (softplus + floor).
// Boundary knots are pinned to the interval ends and boundary derivatives
// to 1, so the map continues affinely (identity) outside [-B, B].
struct SplineWorkspace {
  int bins = 0;
  double bound = 0.0;
  double deriv_floor = 1e-3;
  std::vector<double> soft_w, soft_h;  // softmax outputs, size K (kept for backward)
  std::vector<double> xs, ys;          // cumulative knots, size K+1
  std::vector<double> derivs;          // size K+1, ends pinned to 1
};

int spline_preparam_count(int bins);

// raw has size 3K-1
void spline_build(std::span<const double> raw, int bins, double bound, double deriv_floor,
                  SplineWorkspace& w);

// y and log of dy/dx at x (identity beyond the interval)
void spline_forward(const SplineWorkspace& w, double x, double& y, double& log_deriv);

double spline_inverse(const SplineWorkspace& w, double y);

// Accumulates d(obj)/d(raw) into grad_raw given upstream seeds
// gy = d(obj)/dy and gld = d(obj)/d(log dy/dx) at input x.
// No gradient flows from tail points.
void spline_backward(const SplineWorkspace& w, double x, double gy, double gld,
                     std::span<double> grad_raw);

}  // namespace nfisam::flow
