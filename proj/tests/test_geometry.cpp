#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "nfisam/geometry/pose2.hpp"

using namespace nfisam::geometry;

namespace {

bool pose_close(const Pose2& a, const Pose2& b, double tol) {
  return std::fabs(a.x - b.x) < tol && std::fabs(a.y - b.y) < tol &&
         std::fabs(wrap_angle(a.theta - b.theta)) < tol;
}

// Compose via explicit 3x3 homogeneous matrices; independent of compose().
Pose2 compose_matrix(const Pose2& a, const Pose2& b) {
  double m[2][2] = {{std::cos(a.theta), -std::sin(a.theta)},
                    {std::sin(a.theta), std::cos(a.theta)}};
  return Pose2(m[0][0] * b.x + m[0][1] * b.y + a.x, m[1][0] * b.x + m[1][1] * b.y + a.y,
               a.theta + b.theta);
}

}  // namespace

TEST_CASE("wrap_angle convention") {
  CHECK(wrap_angle(3.0 * kPi) == doctest::Approx(-kPi));
  CHECK(wrap_angle(0.5) == doctest::Approx(0.5));
  CHECK(wrap_angle(-kPi - 1e-9) == doctest::Approx(kPi - 1e-9));
  CHECK(wrap_angle(kPi) == doctest::Approx(-kPi));  // half-open [-pi, pi)

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-50.0, 50.0);
  for (int i = 0; i < 2000; ++i) {
    double a = dist(rng);
    double w = wrap_angle(a);
    CHECK(w >= -kPi);
    CHECK(w < kPi);
    CHECK(wrap_angle(w) == doctest::Approx(w));  // idempotent
    CHECK(wrap_angle(a + 2.0 * kPi) == doctest::Approx(w).epsilon(1e-9));
  }
}

TEST_CASE("compose basics") {
  Pose2 p(1.3, -0.4, 0.9);
  CHECK(pose_close(compose(Pose2(), p), p, 1e-15));
  CHECK(pose_close(compose(p, Pose2()), p, 1e-15));
  CHECK(pose_close(compose(Pose2(1, 0, kPi / 2), Pose2(1, 0, 0)), Pose2(1, 1, kPi / 2), 1e-12));
  CHECK(pose_close(compose(p, inverse(p)), Pose2(), 1e-12));
  CHECK(pose_close(compose(inverse(p), p), Pose2(), 1e-12));
}

TEST_CASE("group axioms on random poses") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-10.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    Pose2 a(dist(rng), dist(rng), dist(rng));
    Pose2 b(dist(rng), dist(rng), dist(rng));
    Pose2 c(dist(rng), dist(rng), dist(rng));
    CHECK(pose_close(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-12));
    CHECK(pose_close(compose(a, b), compose_matrix(a, b), 1e-12));
    CHECK(pose_close(compose(a, inverse(a)), Pose2(), 1e-12));
  }
}

TEST_CASE("exp/log round trip") {
  CHECK(pose_close(exp_map(Tangent2{0, 0, 0}), Pose2(), 1e-15));

  Tangent2 t{0.3, -0.1, 0.7};
  Tangent2 r = log_map(exp_map(t));
  CHECK(r.dx == doctest::Approx(t.dx).epsilon(1e-12));
  CHECK(r.dy == doctest::Approx(t.dy).epsilon(1e-12));
  CHECK(r.dtheta == doctest::Approx(t.dtheta).epsilon(1e-12));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> xy(-5.0, 5.0);
  std::uniform_real_distribution<double> th(-kPi + 1e-3, kPi - 1e-3);
  for (int i = 0; i < 2000; ++i) {
    Tangent2 v{xy(rng), xy(rng), th(rng)};
    Tangent2 w = log_map(exp_map(v));
    CHECK(std::fabs(w.dx - v.dx) < 1e-10);
    CHECK(std::fabs(w.dy - v.dy) < 1e-10);
    CHECK(std::fabs(w.dtheta - v.dtheta) < 1e-10);
    Pose2 p(xy(rng), xy(rng), th(rng));
    CHECK(pose_close(exp_map(log_map(p)), p, 1e-10));
  }
}

TEST_CASE("exp_map at dtheta = pi against quadrature of the V integral") {
  // V(t) = integral_0^1 R(s t) ds, evaluated by Simpson's rule.
  double t = kPi;
  int n = 4000;
  double a = 0.0, b = 0.0;
  double h = 1.0 / n;
  for (int i = 0; i <= n; ++i) {
    double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    a += w * std::cos(i * h * t);
    b += w * std::sin(i * h * t);
  }
  a *= h / 3.0;
  b *= h / 3.0;
  Pose2 p = exp_map(Tangent2{1.0, 0.0, t});
  CHECK(p.x == doctest::Approx(a).epsilon(1e-8));
  CHECK(p.y == doctest::Approx(b).epsilon(1e-8));
  CHECK(p.y == doctest::Approx(2.0 / kPi).epsilon(1e-8));
  CHECK(std::fabs(p.x) < 1e-8);
}

TEST_CASE("small-angle branch is continuous") {
  for (double t : {1e-8, 1e-7, 2e-7, -1e-8, -1e-7}) {
    Pose2 p = exp_map(Tangent2{1.0, 1.0, t});
    CHECK(p.x == doctest::Approx(1.0 - t / 2).epsilon(1e-9));
    CHECK(p.y == doctest::Approx(1.0 + t / 2).epsilon(1e-9));
  }
}

TEST_CASE("range measurement model") {
  CHECK(range(Pose2(0, 0, 1.2), Point2{3, 4}) == doctest::Approx(5.0));
  Pose2 p(2.5, -1.0, 0.4);
  CHECK(range(p, Point2{p.x, p.y}) == doctest::Approx(0.0));
  // invariant under heading
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(-10.0, 10.0);
  for (int i = 0; i < 200; ++i) {
    double x = dist(rng), y = dist(rng);
    Point2 l{dist(rng), dist(rng)};
    double r0 = range(Pose2(x, y, 0.0), l);
    double r1 = range(Pose2(x, y, dist(rng)), l);
    CHECK(r0 == doctest::Approx(r1));
  }
}

TEST_CASE("exp_map jacobian determinant matches finite differences") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    Tangent2 t{dist(rng), dist(rng), dist(rng)};
    double h = 1e-6;
    double jac[3][3];
    for (int j = 0; j < 3; ++j) {
      Tangent2 tp = t, tm = t;
      (&tp.dx)[j] += h;
      (&tm.dx)[j] -= h;
      Pose2 pp = exp_map(tp), pm = exp_map(tm);
      jac[0][j] = (pp.x - pm.x) / (2 * h);
      jac[1][j] = (pp.y - pm.y) / (2 * h);
      jac[2][j] = wrap_angle(pp.theta - pm.theta) / (2 * h);
    }
    double det = jac[0][0] * (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1]) -
                 jac[0][1] * (jac[1][0] * jac[2][2] - jac[1][2] * jac[2][0]) +
                 jac[0][2] * (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0]);
    CHECK(det == doctest::Approx(exp_map_jacobian_det(t.dtheta)).epsilon(1e-4));
  }
}
