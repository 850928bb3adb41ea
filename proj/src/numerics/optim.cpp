#include "kdqa/optim.hpp"

#include <cmath>
#include <string>

#include "kdqa/error.hpp"

namespace kdqa {

namespace {

void require_grad(const Tensor& p) {
  if (!p.has_grad()) {
    throw InvalidState("optimizer step on parameter " + std::to_string(p.id()) +
                       " without a populated gradient");
  }
}

}  // namespace

void sgd_step(std::span<Tensor> params, double lr) {
  if (!(lr >= 0.0)) throw InvalidArgument("sgd_step: learning rate must be non-negative");
  for (auto& p : params) require_grad(p);
  for (auto& p : params) {
    auto w = p.mutable_values();
    auto g = p.grad();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
  }
}

void Adam::step(std::span<Tensor> params) {
  for (auto& p : params) require_grad(p);
  const auto& o = options_;
  for (auto& p : params) {
    auto& s = state_[p.id()];
    auto w = p.mutable_values();
    auto g = p.grad();
    if (s.m.size() != w.size()) {
      s.m.assign(w.size(), 0.0);
      s.v.assign(w.size(), 0.0);
    }
    ++s.t;
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(s.t));
    for (std::size_t i = 0; i < w.size(); ++i) {
      s.m[i] = o.beta1 * s.m[i] + (1.0 - o.beta1) * g[i];
      s.v[i] = o.beta2 * s.v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double mhat = s.m[i] / c1;
      const double vhat = s.v[i] / c2;
      w[i] -= o.lr * mhat / (std::sqrt(vhat) + o.eps);
    }
  }
}

}  // namespace kdqa
