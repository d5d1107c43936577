#include "slotvid/core/gradcheck.hpp"

#include <cmath>

namespace slotvid {

namespace {

Real eval_isolated(const std::function<Real(const Tensor&)>& f,
                   const Tensor& x) {
  Tape::Scope scope;
  return f(x);
}

}  // namespace

Tensor finite_diff_grad(const std::function<Real(const Tensor&)>& f,
                        const Tensor& x, Real h) {
  require(x.defined(), "finite_diff_grad: undefined input");
  require(h > 0.0, "finite_diff_grad: h must be positive");
  Tensor probe = x.detach();
  Tensor out = Tensor::zeros(x.shape());
  std::vector<Real>& v = probe.data();
  for (int64_t i = 0; i < x.numel(); ++i) {
    Real orig = v[static_cast<size_t>(i)];
    v[static_cast<size_t>(i)] = orig + h;
    Real fp = eval_isolated(f, probe);
    v[static_cast<size_t>(i)] = orig - h;
    Real fm = eval_isolated(f, probe);
    v[static_cast<size_t>(i)] = orig;
    out.data()[static_cast<size_t>(i)] = (fp - fm) / (2.0 * h);
  }
  return out;
}

Real grad_rel_err(const Tensor& analytic, const Tensor& numeric) {
  require(analytic.defined() && numeric.defined(),
          "grad_rel_err: undefined input");
  require(analytic.shape() == numeric.shape(),
          "grad_rel_err: shapes differ: " + shape_str(analytic.shape()) +
              " vs " + shape_str(numeric.shape()));
  Real scale = 1.0, err = 0.0;
  for (size_t i = 0; i < analytic.data().size(); ++i) {
    Real a = analytic.data()[i], n = numeric.data()[i];
    scale = std::max({scale, std::abs(a), std::abs(n)});
    err = std::max(err, std::abs(a - n));
  }
  return err / scale;
}

}  // namespace slotvid
