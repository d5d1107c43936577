#pragma once

#include <string>
#include <vector>

#include "slotvid/core/tensor.hpp"

namespace slotvid::testing {

struct GradCase {
  std::string name;
  Real rel_err = 0.0;
  Real tol = 0.0;
};

struct GradSuiteReport {
  std::vector<GradCase> cases;  // worst rel. err seen per case, any seed

  bool ok() const {
    for (const GradCase& c : cases)
      if (!(c.rel_err < c.tol)) return false;
    return true;
  }
  const GradCase* worst() const;
};

// Checks the analytic gradient of every tensor operation against central
// finite differences on fresh random instances, `seeds` times per case.
// Primitive ops are held to 1e-6, composed graphs to 1e-4.
GradSuiteReport run_op_grad_suite(int seeds);

}  // namespace slotvid::testing
