#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "csr/tensor.hpp"

namespace csr {

/// Central-difference gradient verification. `f` must map the inputs to a
/// scalar tensor; every input is perturbed coordinate-by-coordinate and the
/// numeric derivative (f(x+eps)-f(x-eps))/(2 eps) is compared against the
/// analytic gradient from one backward pass. Returns the max over coordinates
/// of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
template <typename T>
double grad_check(const std::function<Tensor<T>(std::vector<Tensor<T>>&)>& f,
                  std::vector<Tensor<T>> inputs, double eps) {
  if (eps < 1e-6 || eps > 1e-2)
    throw ValueError("grad_check: eps must be in [1e-6, 1e-2], got " + std::to_string(eps));

  for (auto& in : inputs) in.set_requires_grad(true);

  // Analytic gradients from one taped evaluation.
  std::vector<std::vector<T>> analytic;
  {
    Tape<T> tape;
    typename Tape<T>::Scope scope(tape);
    Tensor<T> loss = f(inputs);
    if (loss.numel() != 1)
      throw ShapeError("grad_check: f must return a scalar, got " + shape_str(loss.shape()));
    tape.backward(loss);
    for (auto& in : inputs) {
      in.ensure_grad();
      analytic.emplace_back(in.grad_mut().begin(), in.grad_mut().end());
      in.zero_grad();
    }
  }

  // Numeric central differences, evaluated without a tape.
  const T h = static_cast<T>(eps);
  double max_rel = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& in = inputs[k];
    for (std::int64_t i = 0; i < in.numel(); ++i) {
      const T saved = in[i];
      in[i] = saved + h;
      const double fp = static_cast<double>(f(inputs).item());
      in[i] = saved - h;
      const double fm = static_cast<double>(f(inputs).item());
      in[i] = saved;
      const double numeric = (fp - fm) / (2.0 * static_cast<double>(h));
      const double a = static_cast<double>(analytic[k][static_cast<std::size_t>(i)]);
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      max_rel = std::max(max_rel, std::fabs(a - numeric) / denom);
    }
  }
  return max_rel;
}

}  // namespace csr
