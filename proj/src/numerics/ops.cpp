#include "kdqa/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "kdqa/error.hpp"

namespace kdqa {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

using detail::make_result;
using detail::Node;

struct RowView {
  std::size_t rows;
  std::size_t cols;
};

RowView as_rows(const Tensor& t, const char* op) {
  const auto& s = t.shape();
  if (s.size() == 1) return {1, s[0]};
  if (s.size() == 2) return {s[0], s[1]};
  throw InvalidArgument(std::string(op) + ": expected rank 1 or 2, got " + shape_str(s));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
  }
}

void require_rank2(const Tensor& a, const char* op) {
  if (a.rank() != 2) {
    throw InvalidArgument(std::string(op) + ": expected rank 2, got " + shape_str(a.shape()));
  }
}

std::vector<double> copy_values(const Tensor& t) {
  auto v = t.values();
  return {v.begin(), v.end()};
}

// Accumulate helper: only touches inputs that take a gradient.
inline bool wants(const Node& self, std::size_t i) { return self.inputs[i]->requires_grad; }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto out = copy_values(a);
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return make_result("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!wants(self, k)) continue;
      auto& g = self.inputs[k]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto out = copy_values(a);
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return make_result("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (wants(self, 0)) {
      auto& g = self.inputs[0]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      auto& g = self.inputs[1]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto out = copy_values(a);
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return make_result("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& av = self.inputs[0]->values;
    const auto& bv = self.inputs[1]->values;
    if (wants(self, 0)) {
      auto& g = self.inputs[0]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (wants(self, 1)) {
      auto& g = self.inputs[1]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  auto out = copy_values(a);
  for (auto& v : out) v *= factor;
  return make_result("scale", a.shape(), std::move(out), {a}, [factor](Node& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor relu(const Tensor& x) {
  auto out = copy_values(x);
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  return make_result("relu", x.shape(), std::move(out), {x}, [](Node& self) {
    const auto& xv = self.inputs[0]->values;
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > 0.0) g[i] += self.grad[i];
    }
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  auto [n, m] = as_rows(a, "add_row");
  if (row.rank() != 1 || row.dim(0) != m) {
    throw InvalidArgument("add_row: row shape " + shape_str(row.shape()) + " incompatible with " +
                          shape_str(a.shape()));
  }
  auto out = copy_values(a);
  auto rv = row.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += rv[j];
  return make_result("add_row", a.shape(), std::move(out), {a, row}, [n, m](Node& self) {
    if (wants(self, 0)) {
      auto& g = self.inputs[0]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      auto& g = self.inputs[1]->grad;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) g[j] += self.grad[i * m + j];
    }
  });
}

Tensor mul_row(const Tensor& a, const Tensor& row) {
  auto [n, m] = as_rows(a, "mul_row");
  if (row.rank() != 1 || row.dim(0) != m) {
    throw InvalidArgument("mul_row: row shape " + shape_str(row.shape()) + " incompatible with " +
                          shape_str(a.shape()));
  }
  auto out = copy_values(a);
  auto rv = row.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] *= rv[j];
  return make_result("mul_row", a.shape(), std::move(out), {a, row}, [n, m](Node& self) {
    const auto& av = self.inputs[0]->values;
    const auto& rv = self.inputs[1]->values;
    if (wants(self, 0)) {
      auto& g = self.inputs[0]->grad;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) g[i * m + j] += self.grad[i * m + j] * rv[j];
    }
    if (wants(self, 1)) {
      auto& g = self.inputs[1]->grad;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) g[j] += self.grad[i * m + j] * av[i * m + j];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  if (b.dim(0) != k) {
    throw InvalidArgument("matmul: inner dimensions differ " + shape_str(a.shape()) + " x " +
                          shape_str(b.shape()));
  }
  std::vector<double> out(n * m);
  const auto ni = static_cast<Eigen::Index>(n), ki = static_cast<Eigen::Index>(k),
             mi = static_cast<Eigen::Index>(m);
  MutMap(out.data(), ni, mi).noalias() =
      ConstMap(a.values().data(), ni, ki) * ConstMap(b.values().data(), ki, mi);
  return make_result("matmul", {n, m}, std::move(out), {a, b}, [ni, ki, mi](Node& self) {
    ConstMap gc(self.grad.data(), ni, mi);
    if (wants(self, 0)) {
      MutMap(self.inputs[0]->grad.data(), ni, ki).noalias() +=
          gc * ConstMap(self.inputs[1]->values.data(), ki, mi).transpose();
    }
    if (wants(self, 1)) {
      MutMap(self.inputs[1]->grad.data(), ki, mi).noalias() +=
          ConstMap(self.inputs[0]->values.data(), ni, ki).transpose() * gc;
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(0);
  if (b.dim(1) != k) {
    throw InvalidArgument("matmul_nt: inner dimensions differ " + shape_str(a.shape()) + " x " +
                          shape_str(b.shape()) + "^T");
  }
  std::vector<double> out(n * m);
  const auto ni = static_cast<Eigen::Index>(n), ki = static_cast<Eigen::Index>(k),
             mi = static_cast<Eigen::Index>(m);
  MutMap(out.data(), ni, mi).noalias() =
      ConstMap(a.values().data(), ni, ki) * ConstMap(b.values().data(), mi, ki).transpose();
  return make_result("matmul_nt", {n, m}, std::move(out), {a, b}, [ni, ki, mi](Node& self) {
    ConstMap gc(self.grad.data(), ni, mi);
    if (wants(self, 0)) {
      MutMap(self.inputs[0]->grad.data(), ni, ki).noalias() +=
          gc * ConstMap(self.inputs[1]->values.data(), mi, ki);
    }
    if (wants(self, 1)) {
      MutMap(self.inputs[1]->grad.data(), mi, ki).noalias() +=
          gc.transpose() * ConstMap(self.inputs[0]->values.data(), ni, ki);
    }
  });
}

Tensor matvec(const Tensor& a, const Tensor& v) {
  require_rank2(a, "matvec");
  if (v.rank() != 1 || v.dim(0) != a.dim(1)) {
    throw InvalidArgument("matvec: vector shape " + shape_str(v.shape()) + " incompatible with " +
                          shape_str(a.shape()));
  }
  return reshape(matmul(a, reshape(v, {v.dim(0), 1})), {a.dim(0)});
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw InvalidArgument("reshape: cannot view " + shape_str(a.shape()) + " as " +
                          shape_str(shape));
  }
  return make_result("reshape", std::move(shape), copy_values(a), {a}, [](Node& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  require_rank2(table, "gather_rows");
  const std::size_t rows = table.dim(0), m = table.dim(1);
  std::vector<std::size_t> index(ids.begin(), ids.end());
  std::vector<double> out(index.size() * m);
  auto tv = table.values();
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= rows) {
      throw InvalidArgument("gather_rows: index " + std::to_string(index[i]) +
                            " out of range for " + std::to_string(rows) + " rows");
    }
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(index[i] * m), m,
                out.begin() + static_cast<std::ptrdiff_t>(i * m));
  }
  const std::size_t count = index.size();
  return make_result("gather_rows", {count, m}, std::move(out), {table},
                     [index = std::move(index), m](Node& self) {
                       auto& g = self.inputs[0]->grad;
                       for (std::size_t i = 0; i < index.size(); ++i)
                         for (std::size_t j = 0; j < m; ++j)
                           g[index[i] * m + j] += self.grad[i * m + j];
                     });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  require_rank2(a, "slice_cols");
  const std::size_t n = a.dim(0), m = a.dim(1);
  if (begin + count > m) {
    throw InvalidArgument("slice_cols: [" + std::to_string(begin) + ", " +
                          std::to_string(begin + count) + ") exceeds " + std::to_string(m) +
                          " columns");
  }
  std::vector<double> out(n * count);
  auto av = a.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = av[i * m + begin + j];
  return make_result("slice_cols", {n, count}, std::move(out), {a},
                     [n, m, begin, count](Node& self) {
                       auto& g = self.inputs[0]->grad;
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < count; ++j)
                           g[i * m + begin + j] += self.grad[i * count + j];
                     });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw InvalidArgument("concat_cols: no inputs");
  for (const auto& p : parts) require_rank2(p, "concat_cols");
  const std::size_t n = parts[0].dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.dim(0) != n) throw InvalidArgument("concat_cols: row counts differ");
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<double> out(n * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto pv = parts[k].values();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + offset + j] = pv[i * widths[k] + j];
    offset += widths[k];
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result("concat_cols", {n, total}, std::move(out), std::move(inputs),
                     [n, total, widths = std::move(widths)](Node& self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         if (wants(self, k)) {
                           auto& g = self.inputs[k]->grad;
                           for (std::size_t i = 0; i < n; ++i)
                             for (std::size_t j = 0; j < widths[k]; ++j)
                               g[i * widths[k] + j] += self.grad[i * total + off + j];
                         }
                         off += widths[k];
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  auto [n, m] = as_rows(x, "layer_norm");
  if (gamma.rank() != 1 || gamma.dim(0) != m || beta.shape() != gamma.shape()) {
    throw InvalidArgument("layer_norm: affine parameters must be [" + std::to_string(m) + "]");
  }
  auto xv = x.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  std::vector<double> xhat(n * m), inv_std(n), out(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < m; ++j) mu += xv[i * m + j];
    mu /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double d = xv[i * m + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(m);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < m; ++j) {
      xhat[i * m + j] = (xv[i * m + j] - mu) * inv_std[i];
      out[i * m + j] = gv[j] * xhat[i * m + j] + bv[j];
    }
  }
  return make_result(
      "layer_norm", x.shape(), std::move(out), {x, gamma, beta},
      [n, m, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        const auto& gv = self.inputs[1]->values;
        const double inv_m = 1.0 / static_cast<double>(m);
        if (wants(self, 0)) {
          auto& gx = self.inputs[0]->grad;
          for (std::size_t i = 0; i < n; ++i) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
              const double d = self.grad[i * m + j] * gv[j];
              mean_d += d;
              mean_dx += d * xhat[i * m + j];
            }
            mean_d *= inv_m;
            mean_dx *= inv_m;
            for (std::size_t j = 0; j < m; ++j) {
              const double d = self.grad[i * m + j] * gv[j];
              gx[i * m + j] += inv_std[i] * (d - mean_d - xhat[i * m + j] * mean_dx);
            }
          }
        }
        if (wants(self, 1)) {
          auto& gg = self.inputs[1]->grad;
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) gg[j] += self.grad[i * m + j] * xhat[i * m + j];
        }
        if (wants(self, 2)) {
          auto& gb = self.inputs[2]->grad;
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) gb[j] += self.grad[i * m + j];
        }
      });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw InvalidArgument("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  for (auto& v : mask) v = rng.uniform() < rate ? 0.0 : keep_scale;
  auto out = copy_values(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_result("dropout", x.shape(), std::move(out), {x},
                     [mask = std::move(mask)](Node& self) {
                       auto& g = self.inputs[0]->grad;
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
                     });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result("sum", {}, {s}, {x}, [](Node& self) {
    auto& g = self.inputs[0]->grad;
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw InvalidArgument("mean of an empty tensor");
  const double inv = 1.0 / static_cast<double>(x.numel());
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result("mean", {}, {s * inv}, {x}, [inv](Node& self) {
    auto& g = self.inputs[0]->grad;
    for (auto& v : g) v += self.grad[0] * inv;
  });
}

Tensor mean_rows(const Tensor& x) {
  auto [n, m] = as_rows(x, "mean_rows");
  if (n == 0) throw InvalidArgument("mean_rows of zero rows");
  const double inv = 1.0 / static_cast<double>(n);
  std::vector<double> out(m, 0.0);
  auto xv = x.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j] += xv[i * m + j];
  for (auto& v : out) v *= inv;
  return make_result("mean_rows", {m}, std::move(out), {x}, [n, m, inv](Node& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) g[i * m + j] += self.grad[j] * inv;
  });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) throw InvalidArgument("dot: length mismatch");
  double s = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  return make_result("dot", {}, {s}, {a, b}, [](Node& self) {
    const auto& av = self.inputs[0]->values;
    const auto& bv = self.inputs[1]->values;
    if (wants(self, 0)) {
      auto& g = self.inputs[0]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * bv[i];
    }
    if (wants(self, 1)) {
      auto& g = self.inputs[1]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * av[i];
    }
  });
}

Tensor softmax_temp(const Tensor& logits, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw InvalidArgument("softmax_temp: temperature must be positive and finite");
  }
  auto [n, m] = as_rows(logits, "softmax_temp");
  if (m == 0) throw InvalidArgument("softmax_temp: empty row");
  auto lv = logits.values();
  for (double v : lv) {
    if (!std::isfinite(v)) throw InvalidArgument("softmax_temp: non-finite logit");
  }
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = lv.data() + i * m;
    const double mx = *std::max_element(row, row + m);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      out[i * m + j] = std::exp((row[j] - mx) / tau);
      z += out[i * m + j];
    }
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] /= z;
  }
  return make_result("softmax_temp", logits.shape(), std::move(out), {logits},
                     [n, m, tau](Node& self) {
                       const auto& y = self.values;
                       auto& g = self.inputs[0]->grad;
                       for (std::size_t i = 0; i < n; ++i) {
                         double s = 0.0;
                         for (std::size_t j = 0; j < m; ++j) s += self.grad[i * m + j] * y[i * m + j];
                         for (std::size_t j = 0; j < m; ++j)
                           g[i * m + j] += y[i * m + j] * (self.grad[i * m + j] - s) / tau;
                       }
                     });
}

Tensor kl_div(const Tensor& p, const Tensor& q) {
  require_same_shape(p, q, "kl_div");
  auto [n, m] = as_rows(p, "kl_div");
  auto pv = p.values();
  auto qv = q.values();
  for (std::size_t i = 0; i < n; ++i) {
    double sp = 0.0, sq = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      sp += pv[i * m + j];
      sq += qv[i * m + j];
    }
    if (std::abs(sp - 1.0) > kRowSumTolerance || std::abs(sq - 1.0) > kRowSumTolerance) {
      throw InvalidArgument("kl_div: row " + std::to_string(i) + " is not a probability distribution");
    }
  }
  double total = 0.0;
  for (std::size_t k = 0; k < pv.size(); ++k) {
    if (pv[k] > 0.0) {
      total += pv[k] * std::log(std::max(pv[k], kProbFloor) / std::max(qv[k], kProbFloor));
    }
  }
  const double inv_rows = 1.0 / static_cast<double>(n);
  return make_result("kl_div", {}, {total * inv_rows}, {p, q}, [inv_rows](Node& self) {
    const auto& pv = self.inputs[0]->values;
    const auto& qv = self.inputs[1]->values;
    const double up = self.grad[0] * inv_rows;
    if (wants(self, 0)) {
      auto& g = self.inputs[0]->grad;
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double pc = std::max(pv[k], kProbFloor);
        const double qc = std::max(qv[k], kProbFloor);
        const double dlog = pv[k] > kProbFloor ? 1.0 : 0.0;
        g[k] += up * (std::log(pc / qc) + dlog);
      }
    }
    if (wants(self, 1)) {
      auto& g = self.inputs[1]->grad;
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (qv[k] > kProbFloor) g[k] -= up * pv[k] / qv[k];
      }
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
  auto [n, m] = as_rows(logits, "cross_entropy");
  if (targets.size() != n) {
    throw InvalidArgument("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                          std::to_string(n) + " rows");
  }
  for (auto t : targets) {
    if (t >= m) {
      throw InvalidArgument("cross_entropy: target " + std::to_string(t) + " out of range for width " +
                            std::to_string(m));
    }
  }
  auto lv = logits.values();
  std::vector<double> probs(n * m);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = lv.data() + i * m;
    const double mx = *std::max_element(row, row + m);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      probs[i * m + j] = std::exp(row[j] - mx);
      z += probs[i * m + j];
    }
    for (std::size_t j = 0; j < m; ++j) probs[i * m + j] /= z;
    total += (mx + std::log(z)) - row[targets[i]];
  }
  const double inv_rows = 1.0 / static_cast<double>(n);
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return make_result("cross_entropy", {}, {total * inv_rows}, {logits},
                     [n, m, inv_rows, probs = std::move(probs), tgt = std::move(tgt)](Node& self) {
                       auto& g = self.inputs[0]->grad;
                       const double up = self.grad[0] * inv_rows;
                       for (std::size_t i = 0; i < n; ++i) {
                         for (std::size_t j = 0; j < m; ++j) g[i * m + j] += up * probs[i * m + j];
                         g[i * m + tgt[i]] -= up;
                       }
                     });
}

Tensor cross_entropy(const Tensor& logits, std::size_t target) {
  const std::size_t t[1] = {target};
  return cross_entropy(logits, std::span<const std::size_t>(t));
}

}  // namespace kdqa
