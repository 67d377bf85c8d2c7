#pragma once

#include <stdexcept>
#include <string>

namespace nfisam {

// Contract-violation errors carry a category prefix so callers can tell
// user errors apart from internal inconsistencies.
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

}  // namespace nfisam
