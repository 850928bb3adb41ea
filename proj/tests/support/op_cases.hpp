#pragma once

#include <random>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "kdqa/ops.hpp"

namespace kdqa::testing {

struct GradCase {
  std::string name;
  LossFn loss;
  std::vector<Tensor> inputs;
};

class CaseBuilder {
 public:
  explicit CaseBuilder(std::uint64_t seed) : gen_(seed) {}

  std::size_t dim(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(gen_);
  }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }

  // Values bounded away from zero by `gap` keep relu off its kink.
  Tensor tensor(Shape shape, bool requires_grad = true, double gap = 0.0) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) {
      x = uniform(-1.5, 1.5);
      if (std::abs(x) < gap) x = x < 0 ? -gap - 0.1 : gap + 0.1;
    }
    return Tensor(std::move(shape), std::move(v), requires_grad);
  }

  // Weighted sum so every output entry gets a distinct upstream gradient.
  Tensor weight_like(const Tensor& t) { return tensor(t.shape(), false); }

  std::vector<std::size_t> indices(std::size_t n, std::size_t bound) {
    std::vector<std::size_t> out(n);
    for (auto& i : out) i = dim(0, bound - 1);
    return out;
  }

  std::mt19937_64& gen() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

inline Tensor weighted_sum(const Tensor& out, const Tensor& w) { return sum(mul(out, w)); }

/// `per_op` randomized cases for every differentiable primitive plus a few
/// composites.
inline std::vector<GradCase> op_gradient_cases(std::uint64_t seed, std::size_t per_op) {
  CaseBuilder b(seed);
  std::vector<GradCase> cases;
  auto add_case = [&](std::string name, LossFn f, std::vector<Tensor> in) {
    cases.push_back({std::move(name), std::move(f), std::move(in)});
  };
  for (std::size_t k = 0; k < per_op; ++k) {
    const std::size_t n = b.dim(1, 4), m = b.dim(1, 5), p = b.dim(1, 4);
    {
      auto x = b.tensor({n, m}), y = b.tensor({n, m});
      auto w = b.weight_like(x);
      add_case("add", [w](auto& in) { return weighted_sum(add(in[0], in[1]), w); }, {x, y});
      add_case("sub", [w](auto& in) { return weighted_sum(sub(in[0], in[1]), w); }, {x, y});
      add_case("mul", [w](auto& in) { return weighted_sum(mul(in[0], in[1]), w); }, {x, y});
      add_case("mul_self", [w](auto& in) { return weighted_sum(mul(in[0], in[0]), w); }, {x});
      const double f = b.uniform(-2.0, 2.0);
      add_case("scale", [w, f](auto& in) { return weighted_sum(scale(in[0], f), w); }, {x});
    }
    {
      auto x = b.tensor({n, m}, true, 0.05);
      auto w = b.weight_like(x);
      add_case("relu", [w](auto& in) { return weighted_sum(relu(in[0]), w); }, {x});
    }
    {
      auto x = b.tensor({n, m}), row = b.tensor({m}), v = b.tensor({m});
      auto w = b.weight_like(x), wv = b.weight_like(v);
      add_case("add_row", [w](auto& in) { return weighted_sum(add_row(in[0], in[1]), w); }, {x, row});
      add_case("mul_row", [w](auto& in) { return weighted_sum(mul_row(in[0], in[1]), w); }, {x, row});
      add_case("add_row_rank1", [wv](auto& in) { return weighted_sum(add_row(in[0], in[1]), wv); },
               {v, row});
    }
    {
      auto a = b.tensor({n, p}), c = b.tensor({p, m}), ct = b.tensor({m, p}), v = b.tensor({p});
      auto w = b.tensor({n, m}, false), wv = b.tensor({n}, false);
      add_case("matmul", [w](auto& in) { return weighted_sum(matmul(in[0], in[1]), w); }, {a, c});
      add_case("matmul_nt", [w](auto& in) { return weighted_sum(matmul_nt(in[0], in[1]), w); },
               {a, ct});
      add_case("matvec", [wv](auto& in) { return weighted_sum(matvec(in[0], in[1]), wv); }, {a, v});
    }
    {
      auto x = b.tensor({n, m});
      auto w = b.tensor({m * n}, false);
      add_case("reshape", [w, n, m](auto& in) { return weighted_sum(reshape(in[0], {n * m}), w); }, {x});
    }
    {
      const std::size_t vocab = b.dim(2, 6), count = b.dim(1, 7);
      auto table = b.tensor({vocab, m});
      auto ids = b.indices(count, vocab);
      auto w = b.tensor({count, m}, false);
      add_case("gather_rows", [w, ids](auto& in) { return weighted_sum(gather_rows(in[0], ids), w); },
               {table});
    }
    {
      const std::size_t width = b.dim(2, 6);
      auto x = b.tensor({n, width});
      const std::size_t begin = b.dim(0, width - 1);
      const std::size_t count = b.dim(1, width - begin);
      auto w = b.tensor({n, count}, false);
      add_case("slice_cols",
               [w, begin, count](auto& in) { return weighted_sum(slice_cols(in[0], begin, count), w); },
               {x});
    }
    {
      auto x = b.tensor({n, 1}), y = b.tensor({n, m}), z = b.tensor({n, p});
      auto w = b.tensor({n, 1 + m + p}, false);
      add_case("concat_cols",
               [w](auto& in) {
                 const Tensor parts[] = {in[0], in[1], in[2]};
                 return weighted_sum(concat_cols(parts), w);
               },
               {x, y, z});
    }
    {
      const std::size_t width = b.dim(2, 6);
      auto x = b.tensor({n, width}), gamma = b.tensor({width}), beta = b.tensor({width});
      auto w = b.tensor({n, width}, false);
      add_case("layer_norm",
               [w](auto& in) { return weighted_sum(layer_norm(in[0], in[1], in[2]), w); },
               {x, gamma, beta});
    }
    {
      auto x = b.tensor({n, m});
      auto w = b.weight_like(x);
      const std::uint64_t mask_seed = b.gen()();
      add_case("dropout",
               [w, mask_seed](auto& in) {
                 Rng rng(mask_seed);  // same mask on every evaluation
                 return weighted_sum(dropout(in[0], 0.3, rng), w);
               },
               {x});
    }
    {
      auto x = b.tensor({n, m}), y = b.tensor({n, m});
      auto wm = b.tensor({m}, false);
      const double f = b.uniform(0.5, 2.0);
      add_case("sum", [f](auto& in) { return scale(sum(in[0]), f); }, {x});
      add_case("mean", [f](auto& in) { return scale(mean(in[0]), f); }, {x});
      add_case("mean_rows", [wm](auto& in) { return weighted_sum(mean_rows(in[0]), wm); }, {x});
      add_case("dot", [](auto& in) { return dot(in[0], in[1]); }, {x, y});
    }
    {
      auto x = b.tensor({n, m}), v = b.tensor({m});
      auto w = b.weight_like(x), wv = b.weight_like(v);
      const double tau = b.uniform(0.5, 5.0);
      add_case("softmax_temp",
               [w, tau](auto& in) { return weighted_sum(softmax_temp(in[0], tau), w); }, {x});
      add_case("softmax_temp_rank1",
               [wv, tau](auto& in) { return weighted_sum(softmax_temp(in[0], tau), wv); }, {v});
    }
    {
      auto x = b.tensor({n, m}), y = b.tensor({n, m});
      const double tau = b.uniform(0.5, 4.0);
      add_case("kl_div",
               [tau](auto& in) { return kl_div(softmax_temp(in[0], tau), softmax_temp(in[1], tau)); },
               {x, y});
    }
    {
      const std::size_t width = b.dim(2, 6);
      auto x = b.tensor({n, width});
      auto targets = b.indices(n, width);
      add_case("cross_entropy", [targets](auto& in) { return cross_entropy(in[0], targets); }, {x});
    }
    {
      // Composite: normalized features through an MLP into a cross entropy.
      const std::size_t width = b.dim(2, 5), classes = b.dim(2, 4);
      auto x = b.tensor({n, width}), gamma = b.tensor({width}), beta = b.tensor({width});
      auto w1 = b.tensor({width, p}), bias = b.tensor({p}), w2 = b.tensor({p, classes});
      auto targets = b.indices(n, classes);
      add_case("composite",
               [targets](auto& in) {
                 auto h = relu(add_row(matmul(layer_norm(in[0], in[1], in[2]), in[3]), in[4]));
                 return cross_entropy(matmul(h, in[5]), targets);
               },
               {x, gamma, beta, w1, bias, w2});
    }
  }
  return cases;
}

}  // namespace kdqa::testing
