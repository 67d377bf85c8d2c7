#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "nfisam/graph/factor.hpp"

namespace nfisam::graph {

class FactorGraph {
 public:
  void add_variable(const VariableSpec& spec);
  // assigns the factor id; all attached variables must exist
  int add_factor(Factor f);

  bool has_variable(const std::string& id) const { return index_.count(id) > 0; }
  const VariableSpec& variable(const std::string& id) const;
  const std::vector<VariableSpec>& variables() const { return vars_; }
  const std::vector<Factor>& factors() const { return factors_; }

  int total_dims() const;

  // log of the unnormalized posterior density at a full assignment
  double log_posterior(const Assignment& a) const;

 private:
  std::vector<VariableSpec> vars_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Factor> factors_;
};

// Text format, one record per line, '#' starts a comment:
//   VAR <id> POSE|POINT
//   PRIOR <id> <mean...> <upper-tri cov entries>
//   ODOM <id_i> <id_j> <dx> <dy> <dtheta> <c00 c01 c02 c11 c12 c22>
//   RANGE <pose_id> <lmk_id> <observed> <sigma>
FactorGraph parse_factor_graph(std::istream& in);
FactorGraph parse_factor_graph_file(const std::string& path);
void write_factor_graph(const FactorGraph& g, std::ostream& out);

}  // namespace nfisam::graph
