#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "kdqa/tensor.hpp"

namespace kdqa {

/// w <- w - lr * grad for each parameter.
void sgd_step(std::span<Tensor> params, double lr);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment state is keyed by tensor id, so the
/// same optimizer can be fed any subset of parameters on each step.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(std::span<Tensor> params);
  const AdamOptions& options() const { return options_; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;
  };
  AdamOptions options_;
  std::unordered_map<std::uint64_t, Moments> state_;
};

}  // namespace kdqa
