#include "nfisam/graph/factor_graph.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "nfisam/core/require.hpp"

namespace nfisam::graph {

void FactorGraph::add_variable(const VariableSpec& spec) {
  require(!spec.id.empty(), "add_variable: empty id");
  require(!index_.count(spec.id), "add_variable: duplicate variable " + spec.id);
  index_[spec.id] = vars_.size();
  vars_.push_back(spec);
}

int FactorGraph::add_factor(Factor f) {
  for (const auto& v : f.vars)
    require(index_.count(v), "add_factor: unknown variable " + v);
  if (f.kind() == FactorKind::Odometry) {
    require(variable(f.vars[0]).kind == VarKind::Pose && variable(f.vars[1]).kind == VarKind::Pose,
            "add_factor: odometry attaches two poses");
  } else if (f.kind() == FactorKind::Range) {
    require(variable(f.vars[0]).kind == VarKind::Pose && variable(f.vars[1]).kind == VarKind::Point,
            "add_factor: range attaches a pose and a point");
  } else if (f.kind() == FactorKind::PriorPose) {
    require(variable(f.vars[0]).kind == VarKind::Pose, "add_factor: pose prior on non-pose");
  } else if (f.kind() == FactorKind::PriorPoint) {
    require(variable(f.vars[0]).kind == VarKind::Point, "add_factor: point prior on non-point");
  }
  f.id = static_cast<int>(factors_.size());
  factors_.push_back(std::move(f));
  return factors_.back().id;
}

const VariableSpec& FactorGraph::variable(const std::string& id) const {
  auto it = index_.find(id);
  require(it != index_.end(), "variable: unknown id " + id);
  return vars_[it->second];
}

int FactorGraph::total_dims() const {
  int d = 0;
  for (const auto& v : vars_) d += v.dims();
  return d;
}

double FactorGraph::log_posterior(const Assignment& a) const {
  double lp = 0.0;
  for (const auto& f : factors_) lp += log_density(f, a);
  return lp;
}

namespace {

[[noreturn]] void parse_fail(int line, const std::string& msg) {
  throw ContractError("factor graph parse error at line " + std::to_string(line) + ": " + msg);
}

double read_num(std::istringstream& ss, int line, const char* what) {
  double v;
  if (!(ss >> v)) parse_fail(line, std::string("expected number for ") + what);
  return v;
}

}  // namespace

FactorGraph parse_factor_graph(std::istream& in) {
  FactorGraph g;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::istringstream ss(raw);
    std::string tag;
    if (!(ss >> tag)) continue;

    if (tag == "VAR") {
      std::string id, kind;
      if (!(ss >> id >> kind)) parse_fail(lineno, "VAR needs <id> POSE|POINT");
      if (kind != "POSE" && kind != "POINT") parse_fail(lineno, "unknown kind " + kind);
      g.add_variable({id, kind == "POSE" ? VarKind::Pose : VarKind::Point});
    } else if (tag == "PRIOR") {
      std::string id;
      if (!(ss >> id)) parse_fail(lineno, "PRIOR needs <id>");
      if (!g.has_variable(id)) parse_fail(lineno, "PRIOR on undeclared variable " + id);
      if (g.variable(id).kind == VarKind::Pose) {
        double x = read_num(ss, lineno, "mean.x"), y = read_num(ss, lineno, "mean.y");
        double th = read_num(ss, lineno, "mean.theta");
        Eigen::Matrix3d c;
        double c00 = read_num(ss, lineno, "cov"), c01 = read_num(ss, lineno, "cov");
        double c02 = read_num(ss, lineno, "cov"), c11 = read_num(ss, lineno, "cov");
        double c12 = read_num(ss, lineno, "cov"), c22 = read_num(ss, lineno, "cov");
        c << c00, c01, c02, c01, c11, c12, c02, c12, c22;
        g.add_factor(make_prior_pose(id, geometry::Pose2(x, y, th), c));
      } else {
        double x = read_num(ss, lineno, "mean.x"), y = read_num(ss, lineno, "mean.y");
        Eigen::Matrix2d c;
        double c00 = read_num(ss, lineno, "cov"), c01 = read_num(ss, lineno, "cov");
        double c11 = read_num(ss, lineno, "cov");
        c << c00, c01, c01, c11;
        g.add_factor(make_prior_point(id, geometry::Point2{x, y}, c));
      }
    } else if (tag == "ODOM") {
      std::string i, j;
      if (!(ss >> i >> j)) parse_fail(lineno, "ODOM needs <id_i> <id_j>");
      double dx = read_num(ss, lineno, "dx"), dy = read_num(ss, lineno, "dy");
      double dth = read_num(ss, lineno, "dtheta");
      Eigen::Matrix3d c;
      double c00 = read_num(ss, lineno, "cov"), c01 = read_num(ss, lineno, "cov");
      double c02 = read_num(ss, lineno, "cov"), c11 = read_num(ss, lineno, "cov");
      double c12 = read_num(ss, lineno, "cov"), c22 = read_num(ss, lineno, "cov");
      c << c00, c01, c02, c01, c11, c12, c02, c12, c22;
      if (!g.has_variable(i)) parse_fail(lineno, "ODOM references undeclared " + i);
      if (!g.has_variable(j)) parse_fail(lineno, "ODOM references undeclared " + j);
      g.add_factor(make_odometry(i, j, geometry::Tangent2{dx, dy, dth}, c));
    } else if (tag == "RANGE") {
      std::string p, l;
      if (!(ss >> p >> l)) parse_fail(lineno, "RANGE needs <pose_id> <lmk_id>");
      double obs = read_num(ss, lineno, "observed"), sigma = read_num(ss, lineno, "sigma");
      if (!g.has_variable(p)) parse_fail(lineno, "RANGE references undeclared " + p);
      if (!g.has_variable(l)) parse_fail(lineno, "RANGE references undeclared " + l);
      g.add_factor(make_range(p, l, obs, sigma));
    } else {
      parse_fail(lineno, "unknown record " + tag);
    }
  }
  return g;
}

FactorGraph parse_factor_graph_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open factor graph file " + path);
  return parse_factor_graph(in);
}

void write_factor_graph(const FactorGraph& g, std::ostream& out) {
  out << std::setprecision(17);
  for (const auto& v : g.variables())
    out << "VAR " << v.id << (v.kind == VarKind::Pose ? " POSE" : " POINT") << "\n";
  for (const auto& f : g.factors()) {
    switch (f.kind()) {
      case FactorKind::PriorPose: {
        const auto& p = std::get<PriorPosePayload>(f.payload);
        out << "PRIOR " << f.vars[0] << ' ' << p.mean.x << ' ' << p.mean.y << ' '
            << p.mean.theta << ' ' << p.cov(0, 0) << ' ' << p.cov(0, 1) << ' ' << p.cov(0, 2)
            << ' ' << p.cov(1, 1) << ' ' << p.cov(1, 2) << ' ' << p.cov(2, 2) << "\n";
        break;
      }
      case FactorKind::PriorPoint: {
        const auto& p = std::get<PriorPointPayload>(f.payload);
        out << "PRIOR " << f.vars[0] << ' ' << p.mean.x << ' ' << p.mean.y << ' '
            << p.cov(0, 0) << ' ' << p.cov(0, 1) << ' ' << p.cov(1, 1) << "\n";
        break;
      }
      case FactorKind::Odometry: {
        const auto& p = std::get<OdometryPayload>(f.payload);
        out << "ODOM " << f.vars[0] << ' ' << f.vars[1] << ' ' << p.obs.dx << ' ' << p.obs.dy
            << ' ' << p.obs.dtheta << ' ' << p.cov(0, 0) << ' ' << p.cov(0, 1) << ' '
            << p.cov(0, 2) << ' ' << p.cov(1, 1) << ' ' << p.cov(1, 2) << ' ' << p.cov(2, 2)
            << "\n";
        break;
      }
      case FactorKind::Range: {
        const auto& p = std::get<RangePayload>(f.payload);
        out << "RANGE " << f.vars[0] << ' ' << f.vars[1] << ' ' << p.obs << ' ' << p.sigma
            << "\n";
        break;
      }
      case FactorKind::SeparatorMarginal:
        throw ContractError("write_factor_graph: separator marginals are not serializable");
    }
  }
}

}  // namespace nfisam::graph
