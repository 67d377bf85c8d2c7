#include "nfisam/graph/factor.hpp"

#include <cmath>

#include "nfisam/core/require.hpp"

namespace nfisam::graph {

using geometry::Point2;
using geometry::Pose2;
using geometry::Tangent2;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

const Value& lookup(const Assignment& a, const std::string& id, const char* ctx) {
  auto it = a.find(id);
  require(it != a.end(), std::string(ctx) + ": assignment missing variable " + id);
  return it->second;
}

const Pose2& as_pose(const Value& v, const char* ctx) {
  require(std::holds_alternative<Pose2>(v), std::string(ctx) + ": expected a pose value");
  return std::get<Pose2>(v);
}

const Point2& as_point(const Value& v, const char* ctx) {
  require(std::holds_alternative<Point2>(v), std::string(ctx) + ": expected a point value");
  return std::get<Point2>(v);
}

double gaussian_log_density(const Eigen::VectorXd& r, const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  require(llt.info() == Eigen::Success,
          "log_density: noise covariance must be positive definite");
  Eigen::VectorXd w = llt.matrixL().solve(r);
  double logdet = 0.0;
  for (int i = 0; i < cov.rows(); ++i) logdet += std::log(llt.matrixL()(i, i));
  return -0.5 * r.size() * kLog2Pi - logdet - 0.5 * w.squaredNorm();
}

Eigen::Vector3d draw3(const Eigen::MatrixXd& sqrt_cov, Rng& rng) {
  Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
  return sqrt_cov * z;
}

Eigen::Vector2d draw2(const Eigen::MatrixXd& sqrt_cov, Rng& rng) {
  Eigen::Vector2d z(rng.normal(), rng.normal());
  return sqrt_cov * z;
}

Tangent2 odometry_residual(const OdometryPayload& p, const Pose2& from, const Pose2& to) {
  Tangent2 actual = geometry::log_map(geometry::between(from, to));
  return Tangent2{actual.dx - p.obs.dx, actual.dy - p.obs.dy,
                  geometry::wrap_angle(actual.dtheta - p.obs.dtheta)};
}

}  // namespace

Factor make_prior_pose(const std::string& var, const Pose2& mean, const Eigen::Matrix3d& cov) {
  Factor f;
  f.vars = {var};
  f.payload = PriorPosePayload{mean, cov};
  return f;
}

Factor make_prior_point(const std::string& var, const Point2& mean, const Eigen::Matrix2d& cov) {
  Factor f;
  f.vars = {var};
  f.payload = PriorPointPayload{mean, cov};
  return f;
}

Factor make_odometry(const std::string& from, const std::string& to, const Tangent2& obs,
                     const Eigen::Matrix3d& cov) {
  Factor f;
  f.vars = {from, to};
  f.payload = OdometryPayload{obs, cov};
  return f;
}

Factor make_range(const std::string& pose, const std::string& landmark, double obs,
                  double sigma) {
  require(sigma >= 0.0, "range factor: sigma must be non-negative");
  Factor f;
  f.vars = {pose, landmark};
  f.payload = RangePayload{obs, sigma};
  return f;
}

Factor make_separator_marginal(std::shared_ptr<const JointSampler> sampler) {
  require(sampler != nullptr, "separator marginal: null sampler");
  Factor f;
  f.vars = sampler->variables();
  f.payload = MarginalPayload{std::move(sampler)};
  return f;
}

double log_density(const Factor& f, const Assignment& a) {
  switch (f.kind()) {
    case FactorKind::PriorPose: {
      const auto& p = std::get<PriorPosePayload>(f.payload);
      const Pose2& x = as_pose(lookup(a, f.vars[0], "prior-pose"), "prior-pose");
      Tangent2 r = geometry::log_map(geometry::between(p.mean, x));
      return gaussian_log_density(Eigen::Vector3d(r.dx, r.dy, r.dtheta), p.cov);
    }
    case FactorKind::PriorPoint: {
      const auto& p = std::get<PriorPointPayload>(f.payload);
      const Point2& x = as_point(lookup(a, f.vars[0], "prior-point"), "prior-point");
      Eigen::Vector2d r(x.x - p.mean.x, x.y - p.mean.y);
      return gaussian_log_density(r, p.cov);
    }
    case FactorKind::Odometry: {
      const auto& p = std::get<OdometryPayload>(f.payload);
      const Pose2& xi = as_pose(lookup(a, f.vars[0], "odometry"), "odometry");
      const Pose2& xj = as_pose(lookup(a, f.vars[1], "odometry"), "odometry");
      Tangent2 r = odometry_residual(p, xi, xj);
      return gaussian_log_density(Eigen::Vector3d(r.dx, r.dy, r.dtheta), p.cov);
    }
    case FactorKind::Range: {
      const auto& p = std::get<RangePayload>(f.payload);
      const Pose2& x = as_pose(lookup(a, f.vars[0], "range"), "range");
      const Point2& l = as_point(lookup(a, f.vars[1], "range"), "range");
      require(p.sigma > 0.0, "log_density: range sigma must be positive");
      double r = geometry::range(x, l) - p.obs;
      return -0.5 * kLog2Pi - std::log(p.sigma) - 0.5 * (r / p.sigma) * (r / p.sigma);
    }
    case FactorKind::SeparatorMarginal:
      throw ContractError("log_density: separator marginal factors have no closed form");
  }
  throw ContractError("log_density: unknown factor kind");
}

bool forward_direction_allowed(const Factor& f, const std::string& missing) {
  switch (f.kind()) {
    case FactorKind::Odometry:
      return missing == f.vars[0] || missing == f.vars[1];
    case FactorKind::Range:
      return missing == f.vars[1];  // landmark only; pose-given-landmark is excluded
    default:
      return false;
  }
}

Value sample_forward(const Factor& f, const Assignment& given, Rng& rng) {
  int missing_count = 0;
  std::string missing;
  for (const auto& v : f.vars) {
    if (!given.count(v)) {
      ++missing_count;
      missing = v;
    }
  }
  require(missing_count == 1,
          missing_count == 0 ? "sample_forward: no variable to sample"
                             : "sample_forward: more than one unsampled variable; defer this factor");
  require(forward_direction_allowed(f, missing),
          "sample_forward: factor cannot generate variable " + missing);

  switch (f.kind()) {
    case FactorKind::Odometry: {
      const auto& p = std::get<OdometryPayload>(f.payload);
      Eigen::Vector3d noise = draw3(psd_sqrt(p.cov), rng);
      Tangent2 t{p.obs.dx + noise(0), p.obs.dy + noise(1), p.obs.dtheta + noise(2)};
      if (missing == f.vars[1]) {
        const Pose2& xi = as_pose(lookup(given, f.vars[0], "odometry"), "odometry");
        return geometry::compose(xi, geometry::exp_map(t));
      }
      const Pose2& xj = as_pose(lookup(given, f.vars[1], "odometry"), "odometry");
      return geometry::compose(xj, geometry::inverse(geometry::exp_map(t)));
    }
    case FactorKind::Range: {
      const auto& p = std::get<RangePayload>(f.payload);
      const Pose2& x = as_pose(lookup(given, f.vars[0], "range"), "range");
      double r = p.obs + p.sigma * rng.normal();
      double bearing = 2.0 * geometry::kPi * rng.uniform();
      return Point2{x.x + r * std::cos(bearing), x.y + r * std::sin(bearing)};
    }
    default:
      throw ContractError("sample_forward: factor kind has no forward model");
  }
}

Eigen::VectorXd sample_observation(const Factor& f, const Assignment& a, Rng& rng) {
  switch (f.kind()) {
    case FactorKind::Odometry: {
      const auto& p = std::get<OdometryPayload>(f.payload);
      const Pose2& xi = as_pose(lookup(a, f.vars[0], "odometry"), "odometry");
      const Pose2& xj = as_pose(lookup(a, f.vars[1], "odometry"), "odometry");
      Tangent2 t = geometry::log_map(geometry::between(xi, xj));
      Eigen::Vector3d noise = draw3(psd_sqrt(p.cov), rng);
      return Eigen::Vector3d(t.dx + noise(0), t.dy + noise(1), t.dtheta + noise(2));
    }
    case FactorKind::Range: {
      const auto& p = std::get<RangePayload>(f.payload);
      const Pose2& x = as_pose(lookup(a, f.vars[0], "range"), "range");
      const Point2& l = as_point(lookup(a, f.vars[1], "range"), "range");
      Eigen::VectorXd out(1);
      out(0) = geometry::range(x, l) + p.sigma * rng.normal();
      return out;
    }
    default:
      throw ContractError("sample_observation: factor has no observation model");
  }
}

Mat sample_prior(const Factor& f, std::size_t n, Rng& rng) {
  require(n > 0, "sample_prior: draw count must be positive");
  switch (f.kind()) {
    case FactorKind::PriorPose: {
      const auto& p = std::get<PriorPosePayload>(f.payload);
      Eigen::MatrixXd s = psd_sqrt(p.cov);
      Mat out(n, 3);
      for (std::size_t i = 0; i < n; ++i) {
        Eigen::Vector3d e = draw3(s, rng);
        Pose2 x = geometry::compose(p.mean, geometry::exp_map({e(0), e(1), e(2)}));
        out(i, 0) = x.x;
        out(i, 1) = x.y;
        out(i, 2) = x.theta;
      }
      return out;
    }
    case FactorKind::PriorPoint: {
      const auto& p = std::get<PriorPointPayload>(f.payload);
      Eigen::MatrixXd s = psd_sqrt(p.cov);
      Mat out(n, 2);
      for (std::size_t i = 0; i < n; ++i) {
        Eigen::Vector2d e = draw2(s, rng);
        out(i, 0) = p.mean.x + e(0);
        out(i, 1) = p.mean.y + e(1);
      }
      return out;
    }
    case FactorKind::SeparatorMarginal: {
      const auto& p = std::get<MarginalPayload>(f.payload);
      return p.sampler->sample(n, rng);
    }
    default:
      throw ContractError("sample_prior: factor is not a prior");
  }
}

double forward_kernel_log_density(const Factor& f, const Assignment& full,
                                  const std::string& sampled) {
  switch (f.kind()) {
    case FactorKind::PriorPose: {
      const auto& p = std::get<PriorPosePayload>(f.payload);
      const Pose2& x = as_pose(lookup(full, f.vars[0], "prior-pose"), "prior-pose");
      Tangent2 r = geometry::log_map(geometry::between(p.mean, x));
      return gaussian_log_density(Eigen::Vector3d(r.dx, r.dy, r.dtheta), p.cov) -
             std::log(geometry::exp_map_jacobian_det(r.dtheta));
    }
    case FactorKind::PriorPoint:
      return log_density(f, full);
    case FactorKind::Odometry: {
      // same volume factor whichever endpoint was generated
      const auto& p = std::get<OdometryPayload>(f.payload);
      const Pose2& xi = as_pose(lookup(full, f.vars[0], "odometry"), "odometry");
      const Pose2& xj = as_pose(lookup(full, f.vars[1], "odometry"), "odometry");
      Tangent2 actual = geometry::log_map(geometry::between(xi, xj));
      Tangent2 r = odometry_residual(p, xi, xj);
      return gaussian_log_density(Eigen::Vector3d(r.dx, r.dy, r.dtheta), p.cov) -
             std::log(geometry::exp_map_jacobian_det(actual.dtheta));
    }
    case FactorKind::Range: {
      const auto& p = std::get<RangePayload>(f.payload);
      require(sampled == f.vars[1], "forward kernel: range generates the landmark only");
      const Pose2& x = as_pose(lookup(full, f.vars[0], "range"), "range");
      const Point2& l = as_point(lookup(full, f.vars[1], "range"), "range");
      double r = geometry::range(x, l);
      double resid = r - p.obs;
      return -0.5 * kLog2Pi - std::log(p.sigma) - 0.5 * (resid / p.sigma) * (resid / p.sigma) -
             std::log(2.0 * geometry::kPi * r);
    }
    default:
      throw ContractError("forward_kernel_log_density: unsupported factor kind");
  }
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  require(es.info() == Eigen::Success, "psd_sqrt: eigendecomposition failed");
  Eigen::VectorXd lam = es.eigenvalues();
  require(lam.minCoeff() > -1e-10 * std::max(1.0, lam.maxCoeff()),
          "psd_sqrt: matrix is not positive semi-definite");
  Eigen::VectorXd s = lam.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace nfisam::graph
