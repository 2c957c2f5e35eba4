#pragma once

#include <cmath>
#include <functional>

#include "chroma/tensor.hpp"

namespace chroma {

// Central-difference gradient of a scalar-valued function, element by
// element: (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps). The function must be
// deterministic; a non-finite evaluation raises NumericError.
inline Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                     float eps = 1e-3f) {
  if (!(eps > 0.0f)) throw std::invalid_argument("finite_difference_grad: eps must be positive");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (int64_t i = 0; i < x.size(); ++i) {
    const float saved = probe[i];
    probe[i] = saved + eps;
    const double fp = f(probe);
    probe[i] = saved - eps;
    const double fm = f(probe);
    probe[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("finite_difference_grad: non-finite function value at element " + std::to_string(i));
    grad[i] = static_cast<float>((fp - fm) / (2.0 * static_cast<double>(eps)));
  }
  return grad;
}

}  // namespace chroma
