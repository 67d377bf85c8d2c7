#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "nfisam/core/mat.hpp"
#include "nfisam/core/random.hpp"
#include "nfisam/geometry/pose2.hpp"

namespace nfisam::graph {

enum class VarKind { Pose, Point };

struct VariableSpec {
  std::string id;
  VarKind kind = VarKind::Pose;

  int dims() const { return kind == VarKind::Pose ? 3 : 2; }
  bool circular(int d) const { return kind == VarKind::Pose && d == 2; }
  // flattened scalar labels: X0.x, X0.y, X0.theta
  std::string dim_label(int d) const {
    static const char* pose_suffix[] = {".x", ".y", ".theta"};
    static const char* point_suffix[] = {".x", ".y"};
    return id + (kind == VarKind::Pose ? pose_suffix[d] : point_suffix[d]);
  }
};

using Value = std::variant<geometry::Pose2, geometry::Point2>;
using Assignment = std::map<std::string, Value>;

struct PriorPosePayload {
  geometry::Pose2 mean;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
};

struct PriorPointPayload {
  geometry::Point2 mean;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
};

struct OdometryPayload {
  geometry::Tangent2 obs;  // measured relative transform, tangent coordinates
  Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
};

struct RangePayload {
  double obs = 0.0;
  double sigma = 1.0;
};

// Joint sampler over a fixed ordered set of variables; the interface a
// trained separator-marginal flow implements so the graph layer does not
// depend on the flow layer.
class JointSampler {
 public:
  virtual ~JointSampler() = default;
  virtual const std::vector<std::string>& variables() const = 0;
  virtual std::size_t dim() const = 0;
  // rows = draws, columns = flattened dims of variables() in order
  virtual Mat sample(std::size_t n, Rng& rng) const = 0;
};

struct MarginalPayload {
  std::shared_ptr<const JointSampler> sampler;
};

enum class FactorKind { PriorPose, PriorPoint, Odometry, Range, SeparatorMarginal };

struct Factor {
  int id = -1;  // insertion index within the graph
  std::vector<std::string> vars;
  std::variant<PriorPosePayload, PriorPointPayload, OdometryPayload, RangePayload,
               MarginalPayload>
      payload;

  FactorKind kind() const { return static_cast<FactorKind>(payload.index()); }
  bool is_prior_like() const {
    FactorKind k = kind();
    return k == FactorKind::PriorPose || k == FactorKind::PriorPoint ||
           k == FactorKind::SeparatorMarginal;
  }
  bool is_likelihood() const {
    FactorKind k = kind();
    return k == FactorKind::Odometry || k == FactorKind::Range;
  }
  // scalar dimension of the measurement (forecast-observation columns)
  int obs_dims() const {
    switch (kind()) {
      case FactorKind::Odometry: return 3;
      case FactorKind::Range: return 1;
      default: return 0;
    }
  }
};

Factor make_prior_pose(const std::string& var, const geometry::Pose2& mean,
                       const Eigen::Matrix3d& cov);
Factor make_prior_point(const std::string& var, const geometry::Point2& mean,
                        const Eigen::Matrix2d& cov);
Factor make_odometry(const std::string& from, const std::string& to,
                     const geometry::Tangent2& obs, const Eigen::Matrix3d& cov);
Factor make_range(const std::string& pose, const std::string& landmark, double obs,
                  double sigma);
Factor make_separator_marginal(std::shared_ptr<const JointSampler> sampler);

// --- factor operations -----------------------------------------------------

// Log density of the factor at the assignment (Gaussian residual models;
// see each factor kind). Missing variables are a contract violation.
double log_density(const Factor& f, const Assignment& a);

// Draw the single missing attached variable from the factor's generative
// model given the others. Range factors only support landmark-given-pose.
Value sample_forward(const Factor& f, const Assignment& given, Rng& rng);

// True when sample_forward can produce `missing` for this factor.
bool forward_direction_allowed(const Factor& f, const std::string& missing);

// Synthetic measurement at a full assignment (likelihood factors only).
Eigen::VectorXd sample_observation(const Factor& f, const Assignment& a, Rng& rng);

// n independent draws of all attached variables (prior kinds and
// separator marginals). Columns are flattened dims of f.vars in order.
Mat sample_prior(const Factor& f, std::size_t n, Rng& rng);

// log density of the value produced by sample_forward, as a density over
// the sampled variable's coordinates (includes the volume corrections the
// generative kernels carry). Used by the importance-sampling oracle.
double forward_kernel_log_density(const Factor& f, const Assignment& full,
                                  const std::string& sampled);

// PSD square root (lower triangular); tolerates zero rows/columns so
// noiseless models remain usable.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m);

}  // namespace nfisam::graph
