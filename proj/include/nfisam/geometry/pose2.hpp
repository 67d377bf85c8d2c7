#pragma once

#include <cmath>

#include "nfisam/core/require.hpp"

namespace nfisam::geometry {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Wrap to the half-open interval [-pi, pi). Idempotent; periodic in 2*pi.
inline double wrap_angle(double a) {
  double w = a - 2.0 * kPi * std::floor((a + kPi) / (2.0 * kPi));
  // floor rounding can land exactly on pi for inputs just below -pi
  if (w >= kPi) w -= 2.0 * kPi;
  return w;
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Tangent2 {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;
};

// Planar pose; theta is stored wrapped to [-pi, pi).
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}
};

inline Pose2 compose(const Pose2& a, const Pose2& b) {
  double c = std::cos(a.theta), s = std::sin(a.theta);
  return Pose2(a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, a.theta + b.theta);
}

inline Pose2 inverse(const Pose2& p) {
  double c = std::cos(p.theta), s = std::sin(p.theta);
  return Pose2(-(c * p.x + s * p.y), -(-s * p.x + c * p.y), -p.theta);
}

// relative pose a^-1 * b
inline Pose2 between(const Pose2& a, const Pose2& b) { return compose(inverse(a), b); }

namespace detail {

// Coefficients of the SE(2) V matrix: V = [[a, -b], [b, a]].
// Taylor branch below 1e-7 avoids the 0/0 at dtheta = 0.
inline void v_coeffs(double t, double& a, double& b) {
  if (std::fabs(t) < 1e-7) {
    a = 1.0 - t * t / 6.0;
    b = 0.5 * t - t * t * t / 24.0;
  } else {
    a = std::sin(t) / t;
    double h = std::sin(0.5 * t);
    b = 2.0 * h * h / t;  // (1 - cos t) / t without cancellation
  }
}

}  // namespace detail

inline Pose2 exp_map(const Tangent2& t) {
  double a, b;
  detail::v_coeffs(t.dtheta, a, b);
  return Pose2(a * t.dx - b * t.dy, b * t.dx + a * t.dy, t.dtheta);
}

inline Tangent2 log_map(const Pose2& p) {
  double a, b;
  detail::v_coeffs(p.theta, a, b);
  double det = a * a + b * b;
  return Tangent2{(a * p.x + b * p.y) / det, (-b * p.x + a * p.y) / det, p.theta};
}

// det of the V matrix; the volume factor between tangent coordinates and
// pose coordinates, needed when a sampling kernel is used as a density.
inline double exp_map_jacobian_det(double dtheta) {
  double a, b;
  detail::v_coeffs(dtheta, a, b);
  return a * a + b * b;
}

inline double range(const Pose2& p, const Point2& l) {
  return std::hypot(l.x - p.x, l.y - p.y);
}

}  // namespace nfisam::geometry
