#pragma once

#include <functional>

#include "slotvid/core/tensor.hpp"

namespace slotvid {

// Central-difference gradient of a deterministic scalar function, one
// coordinate at a time: (f(x+h) - f(x-h)) / 2h. Each evaluation runs under
// its own throwaway tape so probing never touches the caller's tape.
Tensor finite_diff_grad(const std::function<Real(const Tensor&)>& f,
                        const Tensor& x, Real h = 1e-5);

// Largest coordinate-wise difference, relative to the largest gradient
// magnitude (floored at 1 so all-zero gradients compare absolutely).
Real grad_rel_err(const Tensor& analytic, const Tensor& numeric);

}  // namespace slotvid
