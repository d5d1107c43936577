#include <cmath>

#include "slotvid/train/trainer.hpp"

namespace slotvid {

AdamMoments init_adam(const std::vector<Tensor>& params) {
  AdamMoments mo;
  mo.m.reserve(params.size());
  mo.v.reserve(params.size());
  for (const Tensor& p : params) {
    mo.m.push_back(Tensor::zeros(p.shape(), false));
    mo.v.push_back(Tensor::zeros(p.shape(), false));
  }
  return mo;
}

void adam_step(const std::vector<Tensor>& params, AdamMoments& moments,
               Real lr, Real beta1, Real beta2, Real eps) {
  if (moments.m.size() != params.size() || moments.v.size() != params.size())
    fail("optimizer state does not match the parameter list");
  moments.step += 1;
  const Real bc1 = 1.0 - std::pow(beta1, static_cast<Real>(moments.step));
  const Real bc2 = 1.0 - std::pow(beta2, static_cast<Real>(moments.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];  // shared handle; writes hit the registered node
    if (moments.m[i].shape() != p.shape())
      fail("optimizer moment shape does not match parameter " +
           std::to_string(i));
    std::vector<Real>& w = p.data();
    const std::vector<Real>& g = p.grad();
    std::vector<Real>& m = moments.m[i].data();
    std::vector<Real>& v = moments.v[i].data();
    for (size_t j = 0; j < w.size(); ++j) {
      m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
      const Real mhat = m[j] / bc1;
      const Real vhat = v[j] / bc2;
      w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace slotvid
