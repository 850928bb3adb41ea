#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "kdqa/tensor.hpp"

namespace kdqa::testing {

using LossFn = std::function<Tensor(const std::vector<Tensor>&)>;

// Norm-wise relative error ||analytic - numeric|| / (||analytic|| + ||numeric||)
// between backward() and central differences, worst over the inputs that
// require a gradient. The denominator is floored so an exactly-zero
// gradient compares against round-off instead of dividing by zero.
inline double gradient_error(const LossFn& f, const std::vector<Tensor>& inputs,
                             double step = 1e-5) {
  for (auto t : inputs) {
    if (t.requires_grad()) t.zero_grad();
  }
  backward(f(inputs));
  double worst = 0.0;
  for (auto t : inputs) {
    if (!t.requires_grad()) continue;
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto values = t.mutable_values();
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      double up = 0.0, down = 0.0;
      {
        NoGradGuard guard;
        values[i] = orig + step;
        up = f(inputs).item();
        values[i] = orig - step;
        down = f(inputs).item();
      }
      values[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
    const double denom = std::max(std::sqrt(a2) + std::sqrt(n2), 1e-6);
    worst = std::max(worst, std::sqrt(diff2) / denom);
  }
  return worst;
}

}  // namespace kdqa::testing
